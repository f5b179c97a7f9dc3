"""Figure generation for teleoperated-driving simulation runs.

Reads the CSV outputs of `tdsim run` (summary.csv, per_tick.csv) and renders
bar charts, boxplots, and mode-share histograms grouped by vehicle count,
transmit power, or state configuration. Byte-identical output on identical
input is a hard guarantee; see figures.render.
"""

from .figures import (
    FIGURE_KINDS,
    GROUPINGS,
    ReportSpec,
    bar_table,
    box_stats,
    build_figure,
    config_digest,
    render,
)
from .loading import RunData, discover_runs, load_run

__all__ = [
    "FIGURE_KINDS",
    "GROUPINGS",
    "ReportSpec",
    "RunData",
    "bar_table",
    "box_stats",
    "build_figure",
    "config_digest",
    "discover_runs",
    "load_run",
    "render",
]
