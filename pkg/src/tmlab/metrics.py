"""Per-episode training metrics and their on-disk CSV form.

The CSV layout is a stable external interface: a `# tmlab-metrics-v1`
comment line, a fixed header, then one row per episode. Plain-text
numbers use '.' decimals and repr-style shortest float formatting, so a
written file parses back bit-identically.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields

import numpy as np

from .errors import CorruptionError, FormatError

SCHEMA_MAGIC = "# tmlab-metrics-v1"

COLUMNS = ("episode", "team0_reward", "team1_reward",
           "lm_a0", "lm_a1", "lm_a2", "lm_a3",
           "winpol_t0", "winpol_t1",
           "speed_a0", "speed_a1", "speed_a2", "speed_a3",
           "incentive_team", "incentive_agent", "collisions")

_INT_COLUMNS = {"episode", "collisions"}


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    team0_reward: float
    team1_reward: float
    lm_a0: float
    lm_a1: float
    lm_a2: float
    lm_a3: float
    winpol_t0: float
    winpol_t1: float
    speed_a0: float
    speed_a1: float
    speed_a2: float
    speed_a3: float
    incentive_team: float
    incentive_agent: float
    collisions: int

    def as_list(self):
        return [getattr(self, c) for c in COLUMNS]


assert tuple(f.name for f in fields(MetricsRow)) == COLUMNS


class MetricsLog:
    """In-memory list of MetricsRow with array accessors."""

    def __init__(self, rows=None):
        self.rows = list(rows) if rows else []

    def append(self, row):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        if name not in COLUMNS:
            raise FormatError(f"unknown metrics column {name!r}")
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def landmark_rates(self, window):
        """Per-agent scoring rate over the final `window` episodes."""
        if window < 1 or window > len(self.rows):
            raise FormatError(
                f"window {window} out of range for {len(self.rows)} rows")
        tail = self.rows[-window:]
        counts = np.zeros(4)
        for r in tail:
            counts += (r.lm_a0, r.lm_a1, r.lm_a2, r.lm_a3)
        return counts / window

    def to_array(self):
        return np.array([r.as_list() for r in self.rows], dtype=np.float64)

    @classmethod
    def from_array(cls, arr):
        log = cls()
        for row in np.asarray(arr, dtype=np.float64):
            log.append(_row_from_values(row))
        return log


def _row_from_values(values):
    kwargs = {}
    for name, v in zip(COLUMNS, values):
        kwargs[name] = int(v) if name in _INT_COLUMNS else float(v)
    return MetricsRow(**kwargs)


def _format_value(name, v):
    if name in _INT_COLUMNS:
        return str(int(v))
    return repr(float(v))


def dump_csv(log, stream):
    stream.write(SCHEMA_MAGIC + "\n")
    stream.write(",".join(COLUMNS) + "\n")
    for row in log:
        stream.write(",".join(_format_value(c, v)
                              for c, v in zip(COLUMNS, row.as_list())) + "\n")


def write_csv(log, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_csv(log, fh)


def read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_csv(fh, name=str(path))


def parse_csv(stream, name="<stream>"):
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    magic = stream.readline().rstrip("\n")
    if magic != SCHEMA_MAGIC:
        raise FormatError(
            f"{name}: expected leading {SCHEMA_MAGIC!r} line, got {magic!r}")
    header = stream.readline().rstrip("\n")
    if header != ",".join(COLUMNS):
        raise FormatError(f"{name}: header does not match schema v1")
    log = MetricsLog()
    for lineno, line in enumerate(stream, start=3):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise CorruptionError(
                f"{name}:{lineno}: expected {len(COLUMNS)} fields, "
                f"got {len(parts)}")
        try:
            kwargs = {c: (int(p) if c in _INT_COLUMNS else float(p))
                      for c, p in zip(COLUMNS, parts)}
        except ValueError as exc:
            raise CorruptionError(f"{name}:{lineno}: {exc}") from None
        log.append(MetricsRow(**kwargs))
    return log
