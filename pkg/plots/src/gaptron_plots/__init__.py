"""Figure rendering for gaptron harness outputs."""

from .render import (
    ABSTENTION_COLUMNS,
    FIGURE1_COLUMNS,
    PLOT_KINDS,
    ROUND_COLUMNS,
    FigureSummary,
    PlotJob,
    SchemaError,
    build_figure,
    extract_series,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "ABSTENTION_COLUMNS",
    "FIGURE1_COLUMNS",
    "PLOT_KINDS",
    "ROUND_COLUMNS",
    "FigureSummary",
    "PlotJob",
    "SchemaError",
    "build_figure",
    "extract_series",
    "render",
]
