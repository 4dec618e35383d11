import csv
import math

import numpy as np
import pytest

from tmplots import (FigureSpec, FormatError, InputError, build_figure,
                     render, sidecar_path, trailing_mean)

from conftest import MAGIC, write_metrics, write_tournament


def read_plain_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def slow_trailing_mean(xs, window):
    out = []
    for t in range(len(xs)):
        lo = max(0, t - window + 1)
        out.append(sum(xs[lo:t + 1]) / (t + 1 - lo))
    return out


def test_trailing_mean_hand_cases():
    got = trailing_mean([1.0, 2.0, 3.0, 4.0], 2)
    assert np.allclose(got, [1.0, 1.5, 2.5, 3.5])
    got = trailing_mean([1.0, 2.0, 3.0, 4.0], 10)  # all partial windows
    assert np.allclose(got, [1.0, 1.5, 2.0, 2.5])
    assert np.array_equal(trailing_mean([3.0, 7.0], 1), [3.0, 7.0])


def test_sidecar_matches_independent_recomputation(metrics_trio, tmp_path):
    out = tmp_path / "reward.png"
    spec = FigureSpec("reward", metrics_trio, str(out), smooth=25)
    render(spec)
    header, rows = read_plain_csv(sidecar_path(str(out)))
    assert header == ["episode",
                      "team0_reward_mean", "team0_reward_lo",
                      "team0_reward_hi",
                      "team1_reward_mean", "team1_reward_lo",
                      "team1_reward_hi"]

    # recompute from the raw files without tmplots' own reader
    raw = []
    for path in metrics_trio:
        with open(path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == MAGIC
        names = lines[1].split(",")
        cols = {n: [] for n in names}
        for line in lines[2:]:
            for n, cell in zip(names, line.split(",")):
                cols[n].append(float(cell))
        raw.append(cols)

    for ci, col in enumerate(("team0_reward", "team1_reward")):
        smoothed = [slow_trailing_mean(r[col], 25) for r in raw]
        for t, row in enumerate(rows):
            vals = [s[t] for s in smoothed]
            mean = sum(vals) / 3
            sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / 2)
            half = 1.96 * sd / math.sqrt(3)
            got = [float(row[1 + 3 * ci]), float(row[2 + 3 * ci]),
                   float(row[3 + 3 * ci])]
            assert abs(got[0] - mean) <= 1e-9
            assert abs(got[1] - (mean - half)) <= 1e-9
            assert abs(got[2] - (mean + half)) <= 1e-9
            assert int(row[0]) == t + 1


def test_single_seed_band_collapses_exactly(tmp_path):
    path = write_metrics(tmp_path / "m.csv", 120, seed=3)
    out = tmp_path / "landmark.png"
    render(FigureSpec("landmark", (path,), str(out)))
    _, rows = read_plain_csv(sidecar_path(str(out)))
    for row in rows:
        for base in (1, 4, 7, 10):
            assert row[base] == row[base + 1] == row[base + 2]


def test_rendering_is_deterministic(metrics_trio, tmp_path):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    render(FigureSpec("speed", metrics_trio, str(a)))
    render(FigureSpec("speed", metrics_trio, str(b)))
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.points.csv").read_bytes() == \
        (tmp_path / "b.points.csv").read_bytes()


def test_axis_label_discloses_smoothing(metrics_trio, tmp_path):
    fig, _, _ = build_figure(FigureSpec("reward", metrics_trio,
                                        str(tmp_path / "r.png")))
    assert "window 500" in fig.axes[0].get_ylabel()
    fig, _, _ = build_figure(FigureSpec("reward", metrics_trio,
                                        str(tmp_path / "r.png"), smooth=1))
    assert "window" not in fig.axes[0].get_ylabel()


def test_mismatched_seed_logs_are_rejected(tmp_path):
    a = write_metrics(tmp_path / "a.csv", 100, seed=1)
    b = write_metrics(tmp_path / "b.csv", 90, seed=2)
    with pytest.raises(InputError):
        render(FigureSpec("reward", (a, b), str(tmp_path / "r.png")))


def test_schema_mismatch_is_a_format_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(MAGIC + "\nepisode,reward\n1,2.0\n")
    with pytest.raises(FormatError):
        render(FigureSpec("reward", (bad,), str(tmp_path / "r.png")))


def test_unknown_family_and_bad_window_are_input_errors(tmp_path):
    with pytest.raises(InputError):
        FigureSpec("rewards", ("m.csv",), "r.png")
    with pytest.raises(InputError):
        FigureSpec("reward", ("m.csv",), "r.png", smooth=0)
    with pytest.raises(InputError):
        FigureSpec("reward", (), "r.png")


def test_tournament_grid_and_sidecar(tmp_path):
    t1 = write_tournament(tmp_path / "t1.csv", seed=1)
    t2 = write_tournament(tmp_path / "t2.csv", seed=2)
    out = tmp_path / "grid.png"
    render(FigureSpec("tournament", (t1, t2), str(out)))
    header, rows = read_plain_csv(sidecar_path(str(out)))
    assert header == ["name_a", "name_b", "rate_a", "rate_b", "n_seeds"]
    assert len(rows) == 3

    def rates(path):
        with open(path) as fh:
            lines = fh.read().splitlines()[1:]
        out_rates = []
        for line in lines:
            cells = line.split(",")
            out_rates.append((float(cells[3]) / float(cells[2]),
                              float(cells[4]) / float(cells[2])))
        return out_rates

    r1, r2 = rates(t1), rates(t2)
    for i, row in enumerate(rows):
        assert abs(float(row[2]) - (r1[i][0] + r2[i][0]) / 2) <= 1e-9
        assert abs(float(row[3]) - (r1[i][1] + r2[i][1]) / 2) <= 1e-9
        assert row[4] == "2"


def test_tournament_rejects_mismatched_pairings(tmp_path):
    t1 = write_tournament(tmp_path / "t1.csv", seed=1)
    t2 = write_tournament(tmp_path / "t2.csv", seed=2,
                          names=("Baseline", "StaticTeam"))
    with pytest.raises(FormatError):
        render(FigureSpec("tournament", (t1, t2),
                          str(tmp_path / "g.png")))


def test_tournament_rejects_smoothing():
    with pytest.raises(InputError):
        FigureSpec("tournament", ("t.csv",), "g.png", smooth=100)
