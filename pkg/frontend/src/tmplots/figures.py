"""Figure construction: curves with cross-seed bands, tournament grids.

Every figure is deterministic for fixed inputs and writes a sidecar CSV
holding exactly the plotted points, so the numbers behind any picture
can be diffed and recomputed without parsing pixels.
"""

import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import FormatError, InputError
from .reader import read_metrics, read_tournament

SMOOTH_DEFAULT = 500


@dataclass(frozen=True)
class Family:
    columns: tuple
    labels: tuple
    ylabel: str


# One curve per team or agent in each family.
FAMILIES = {
    "reward": Family(("team0_reward", "team1_reward"),
                     ("team 0", "team 1"), "mean team reward"),
    "landmark": Family(("lm_a0", "lm_a1", "lm_a2", "lm_a3"),
                       ("agent 0", "agent 1", "agent 2", "agent 3"),
                       "scoring rate"),
    "winpolicy": Family(("winpol_t0", "winpol_t1"),
                        ("team 0", "team 1"), "winning-policy pick rate"),
    "speed": Family(("speed_a0", "speed_a1", "speed_a2", "speed_a3"),
                    ("agent 0", "agent 1", "agent 2", "agent 3"),
                    "speed cap"),
    "incentive": Family(("incentive_team", "incentive_agent"),
                        ("team bonus", "agent bonus"), "bonus weight"),
    "tournament": Family((), (), "win rate"),
}


@dataclass(frozen=True)
class FigureSpec:
    """One figure: a metric family, input CSVs (one per seed), the output
    image path, and an optional smoothing window override."""

    family: str
    inputs: tuple
    out: str
    smooth: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; pick one "
                             f"of {tuple(FAMILIES)}")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise InputError("need at least one input CSV")
        if not self.out:
            raise InputError("output path must not be empty")
        if self.smooth is not None:
            if self.family == "tournament":
                raise InputError(
                    "smoothing does not apply to the tournament family")
            if int(self.smooth) < 1:
                raise InputError("smoothing window must be >= 1")
            object.__setattr__(self, "smooth", int(self.smooth))


def sidecar_path(out):
    """The plotted-points CSV that accompanies a figure file."""
    return os.path.splitext(out)[0] + ".points.csv"


def trailing_mean(x, window):
    """Trailing moving average with partial windows at the start, so the
    series keeps its full length."""
    x = np.asarray(x, dtype=np.float64)
    if window == 1:
        return x.copy()
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(x.size)
    lo = np.maximum(0, idx - window + 1)
    return (csum[idx + 1] - csum[lo]) / (idx - lo + 1.0)


def series_points(spec):
    """Plotted points for a time-series family.

    Returns (episodes, curves, window, n_seeds) where curves maps each
    column to (mean, lo, hi) across seeds: the per-seed series are
    smoothed first, the band is mean +- 1.96 * sd / sqrt(n), and a
    single seed collapses it to the mean exactly.
    """
    fam = FAMILIES[spec.family]
    logs = [read_metrics(p) for p in spec.inputs]
    episodes = logs[0]["episode"]
    for path, log in zip(spec.inputs[1:], logs[1:]):
        if not np.array_equal(log["episode"], episodes):
            raise InputError(f"{path}: episode column disagrees with "
                             f"{spec.inputs[0]}; seeds must come from "
                             "the same experiment")
    window = spec.smooth if spec.smooth is not None else SMOOTH_DEFAULT
    n = len(logs)
    curves = {}
    for col in fam.columns:
        per_seed = np.stack([trailing_mean(log[col], window)
                             for log in logs])
        mean = per_seed.mean(axis=0)
        if n >= 2:
            half = 1.96 * per_seed.std(axis=0, ddof=1) / math.sqrt(n)
            curves[col] = (mean, mean - half, mean + half)
        else:
            curves[col] = (mean, mean, mean)
    return episodes, curves, window, n


def tournament_points(spec):
    """Mean pairing win rates across the input tournament files.

    Every file must list the same pairings. Returns (names, rows) where
    rows hold (name_a, name_b, rate_a, rate_b, n_seeds).
    """
    per_file = [read_tournament(p) for p in spec.inputs]
    keys = [(r["name_a"], r["name_b"]) for r in per_file[0]]
    for path, rows in zip(spec.inputs[1:], per_file[1:]):
        if [(r["name_a"], r["name_b"]) for r in rows] != keys:
            raise FormatError(f"{path}: pairings disagree with "
                              f"{spec.inputs[0]}")
    names = []
    for a, b in keys:
        for name in (a, b):
            if name not in names:
                names.append(name)
    rows = []
    for i, (a, b) in enumerate(keys):
        ra = float(np.mean([rows_f[i]["wins_a"] / rows_f[i]["episodes"]
                            for rows_f in per_file]))
        rb = float(np.mean([rows_f[i]["wins_b"] / rows_f[i]["episodes"]
                            for rows_f in per_file]))
        rows.append((a, b, ra, rb, len(per_file)))
    return names, rows


def _write_sidecar(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def build_figure(spec):
    """Assemble the matplotlib figure plus its sidecar header and rows.

    Split from render() so tests can inspect labels and points without
    touching the filesystem.
    """
    if spec.family == "tournament":
        return _build_tournament(spec)
    return _build_series(spec)


def _build_series(spec):
    fam = FAMILIES[spec.family]
    episodes, curves, window, n = series_points(spec)
    fig, ax = plt.subplots(figsize=(8.0, 4.5), dpi=110)
    for col, label in zip(fam.columns, fam.labels):
        mean, lo, hi = curves[col]
        line, = ax.plot(episodes, mean, label=label, linewidth=1.4)
        ax.fill_between(episodes, lo, hi, alpha=0.25,
                        color=line.get_color(), linewidth=0)
    ax.set_xlabel("episode")
    ylabel = fam.ylabel
    if window > 1:
        ylabel += f" (trailing mean, window {window})"
    ax.set_ylabel(ylabel)
    ax.set_title(f"{spec.family}, {n} seed{'s' if n != 1 else ''}, "
                 "95% band")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()

    header = ["episode"]
    for col in fam.columns:
        header += [f"{col}_mean", f"{col}_lo", f"{col}_hi"]
    rows = []
    for t in range(episodes.size):
        row = [int(episodes[t])]
        for col in fam.columns:
            mean, lo, hi = curves[col]
            row += [float(mean[t]), float(lo[t]), float(hi[t])]
        rows.append(row)
    return fig, header, rows


def _build_tournament(spec):
    names, rows = tournament_points(spec)
    size = len(names)
    grid = np.full((size, size), np.nan)
    for a, b, ra, rb, _ in rows:
        grid[names.index(a), names.index(b)] = ra
        grid[names.index(b), names.index(a)] = rb

    fig, ax = plt.subplots(figsize=(1.2 * size + 3.0, 1.2 * size + 2.0),
                           dpi=110)
    shown = np.ma.masked_invalid(grid)
    im = ax.imshow(shown, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(size), names, rotation=30, ha="right")
    ax.set_yticks(range(size), names)
    ax.set_xlabel("column opponent")
    ax.set_ylabel("row entrant")
    n = rows[0][4] if rows else 0
    ax.set_title(f"tournament win rate, {n} seed{'s' if n != 1 else ''}")
    for i in range(size):
        for j in range(size):
            if not np.isnan(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center",
                        va="center",
                        color="white" if grid[i, j] < 0.6 else "black")
    fig.colorbar(im, ax=ax, label=FAMILIES["tournament"].ylabel)
    fig.tight_layout()

    header = ["name_a", "name_b", "rate_a", "rate_b", "n_seeds"]
    out_rows = [[a, b, float(ra), float(rb), int(ns)]
                for a, b, ra, rb, ns in rows]
    return fig, header, out_rows


def render(spec):
    """Write the figure and its sidecar CSV; returns their paths."""
    fig, header, rows = build_figure(spec)
    try:
        try:
            fig.savefig(spec.out)
        except ValueError as err:  # unknown image format and the like
            raise InputError(f"cannot write figure: {err}") from None
    finally:
        plt.close(fig)
    points = sidecar_path(spec.out)
    _write_sidecar(points, header, rows)
    return spec.out, points
