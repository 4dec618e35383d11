"""Readers for the two CSV shapes the trainer writes.

Both formats are consumed as documented files, not through the trainer's
code, so this package works on bare CSV exports from anywhere. A metrics
file opens with a `# tmlab-metrics-v1` magic line and a fixed 16-column
header; a tournament file is a plain CSV with one row per pairing.
"""

import csv

import numpy as np

from .errors import FormatError, InputError

METRICS_MAGIC = "# tmlab-metrics-v1"

METRICS_COLUMNS = ("episode", "team0_reward", "team1_reward",
                   "lm_a0", "lm_a1", "lm_a2", "lm_a3",
                   "winpol_t0", "winpol_t1",
                   "speed_a0", "speed_a1", "speed_a2", "speed_a3",
                   "incentive_team", "incentive_agent", "collisions")

TOURNAMENT_COLUMNS = ("name_a", "name_b", "episodes", "wins_a", "wins_b",
                      "draws", "weak_share_a", "weak_share_b")


def read_metrics(path):
    """Parse one per-episode metrics file into a dict of float columns.

    Raises FormatError when the magic line, header, or a cell does not
    match the v1 schema, and InputError when the file holds no episodes.
    """
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().rstrip("\n")
        if magic != METRICS_MAGIC:
            raise FormatError(f"{path}: expected a {METRICS_MAGIC!r} "
                              f"first line, got {magic!r}")
        header = fh.readline().rstrip("\n")
        if header != ",".join(METRICS_COLUMNS):
            raise FormatError(f"{path}: header does not match the v1 "
                              "metrics schema")
        rows = []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if len(cells) != len(METRICS_COLUMNS):
                raise FormatError(f"{path}:{lineno}: expected "
                                  f"{len(METRICS_COLUMNS)} cells, got "
                                  f"{len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise InputError(f"{path}: no episodes to plot")
    arr = np.asarray(rows, dtype=np.float64)
    return {name: arr[:, i] for i, name in enumerate(METRICS_COLUMNS)}


def read_tournament(path):
    """Parse one tournament summary into a list of pairing dicts.

    Name cells stay strings; counters become ints, shares floats.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: no pairings to plot") from None
        if tuple(header) != TOURNAMENT_COLUMNS:
            raise FormatError(f"{path}: header does not match the "
                              "tournament schema")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(TOURNAMENT_COLUMNS):
                raise FormatError(f"{path}:{lineno}: expected "
                                  f"{len(TOURNAMENT_COLUMNS)} cells, got "
                                  f"{len(cells)}")
            try:
                rows.append({
                    "name_a": cells[0], "name_b": cells[1],
                    "episodes": int(float(cells[2])),
                    "wins_a": int(float(cells[3])),
                    "wins_b": int(float(cells[4])),
                    "draws": int(float(cells[5])),
                    "weak_share_a": float(cells[6]),
                    "weak_share_b": float(cells[7])})
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise InputError(f"{path}: no pairings to plot")
    return rows
