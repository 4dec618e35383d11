"""Metrics log and the v1 CSV interchange format."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmlab import metrics
from tmlab.errors import CorruptionError, FormatError
from tmlab.metrics import COLUMNS, MetricsLog, MetricsRow


def make_row(ep, **over):
    base = dict(episode=ep, team0_reward=-1.5, team1_reward=2.25,
                lm_a0=0.0, lm_a1=1.0, lm_a2=0.0, lm_a3=0.0,
                winpol_t0=0.8, winpol_t1=0.55,
                speed_a0=4.0, speed_a1=4.01, speed_a2=4.0, speed_a3=2.0,
                incentive_team=0.3, incentive_agent=0.7, collisions=3)
    base.update(over)
    return MetricsRow(**base)


def awkward_log():
    rows = [
        make_row(1, team0_reward=0.1, team1_reward=1.0 / 3.0),
        make_row(2, team0_reward=-0.0, speed_a3=1e-17),
        make_row(3, incentive_team=float(np.nextafter(0.3, 1.0)),
                 collisions=0),
        make_row(4, team1_reward=-123456.789012345, winpol_t0=1.0),
    ]
    return MetricsLog(rows)


def test_header_matches_schema():
    buf = io.StringIO()
    metrics.dump_csv(MetricsLog(), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# tmlab-metrics-v1"
    assert lines[1] == ",".join(COLUMNS)
    assert len(lines) == 2


def test_round_trip_is_byte_identical():
    log = awkward_log()
    buf = io.StringIO()
    metrics.dump_csv(log, buf)
    text = buf.getvalue()
    back = metrics.parse_csv(text)
    assert [r.as_list() for r in back] == [r.as_list() for r in log]
    buf2 = io.StringIO()
    metrics.dump_csv(back, buf2)
    assert buf2.getvalue() == text


def test_file_round_trip(tmp_path):
    log = awkward_log()
    path = tmp_path / "metrics.csv"
    metrics.write_csv(log, path)
    back = metrics.read_csv(path)
    assert len(back) == len(log)
    for a, b in zip(back, log):
        assert a == b


def test_int_columns_written_as_ints():
    buf = io.StringIO()
    metrics.dump_csv(MetricsLog([make_row(7, collisions=12)]), buf)
    first = buf.getvalue().splitlines()[2].split(",")
    assert first[0] == "7"
    assert first[-1] == "12"


def test_missing_magic_rejected():
    with pytest.raises(FormatError, match="tmlab-metrics-v1"):
        metrics.parse_csv("episode,foo\n1,2\n")


def test_wrong_header_rejected():
    text = metrics.SCHEMA_MAGIC + "\nepisode,shuffled\n"
    with pytest.raises(FormatError, match="header"):
        metrics.parse_csv(text)


def test_short_row_is_corruption():
    buf = io.StringIO()
    metrics.dump_csv(MetricsLog([make_row(1)]), buf)
    text = buf.getvalue() + "1,2,3\n"
    with pytest.raises(CorruptionError, match=":4"):
        metrics.parse_csv(text)


def test_non_numeric_field_is_corruption():
    buf = io.StringIO()
    metrics.dump_csv(MetricsLog([make_row(1)]), buf)
    text = buf.getvalue().replace("-1.5", "oops")
    with pytest.raises(CorruptionError):
        metrics.parse_csv(text)


def test_blank_lines_ignored():
    buf = io.StringIO()
    metrics.dump_csv(MetricsLog([make_row(1), make_row(2)]), buf)
    lines = buf.getvalue().splitlines()
    text = "\n".join([lines[0], lines[1], lines[2], "", lines[3], ""]) + "\n"
    assert len(metrics.parse_csv(text)) == 2


def test_column_accessor():
    log = MetricsLog([make_row(1, team0_reward=5.0),
                      make_row(2, team0_reward=-5.0)])
    np.testing.assert_array_equal(log.column("team0_reward"), [5.0, -5.0])
    with pytest.raises(FormatError):
        log.column("no_such_column")


def test_landmark_rates_window():
    rows = [make_row(i + 1, lm_a0=0.0, lm_a1=0.0, lm_a2=0.0, lm_a3=0.0)
            for i in range(6)]
    for i in (2, 3, 5):
        rows[i] = make_row(i + 1, lm_a1=1.0, lm_a2=0.0)
    log = MetricsLog(rows)
    np.testing.assert_allclose(log.landmark_rates(4), [0.0, 0.75, 0.0, 0.0])
    np.testing.assert_allclose(log.landmark_rates(6), [0.0, 0.5, 0.0, 0.0])
    with pytest.raises(FormatError):
        log.landmark_rates(7)
    with pytest.raises(FormatError):
        log.landmark_rates(0)


def test_array_round_trip():
    log = awkward_log()
    arr = log.to_array()
    assert arr.shape == (4, len(COLUMNS))
    back = MetricsLog.from_array(arr)
    assert [r.as_list() for r in back] == [r.as_list() for r in log]
    assert isinstance(back[0].episode, int)
    assert isinstance(back[0].collisions, int)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False,
                          width=64), min_size=14, max_size=14),
       st.integers(1, 10**6), st.integers(0, 10**4))
def test_float_fields_round_trip_exactly(vals, ep, coll):
    floats = dict(zip([c for c in COLUMNS if c not in ("episode", "collisions")],
                      vals))
    log = MetricsLog([MetricsRow(episode=ep, collisions=coll, **floats)])
    buf = io.StringIO()
    metrics.dump_csv(log, buf)
    back = metrics.parse_csv(buf.getvalue())
    assert back[0] == log[0]
