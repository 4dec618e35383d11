"""Figure rendering for tmlab metrics and tournament CSV files."""

from .errors import FormatError, InputError, PlotError, UsageError
from .figures import (FAMILIES, SMOOTH_DEFAULT, FigureSpec, build_figure,
                      render,
                      sidecar_path, series_points, tournament_points,
                      trailing_mean)
from .reader import (METRICS_COLUMNS, METRICS_MAGIC, TOURNAMENT_COLUMNS,
                     read_metrics, read_tournament)

__version__ = "0.1.0"

__all__ = [
    "FAMILIES", "SMOOTH_DEFAULT", "FigureSpec", "FormatError",
    "build_figure",
    "InputError", "METRICS_COLUMNS", "METRICS_MAGIC", "PlotError",
    "TOURNAMENT_COLUMNS", "UsageError", "read_metrics",
    "read_tournament", "render", "sidecar_path", "series_points",
    "tournament_points", "trailing_mean",
]
