"""Figure rendering for the sweep CSVs of the control-synthesis harness."""

from .aggregate import Panel, SeriesPoint, aggregate_experiment1, aggregate_experiment2
from .loader import EXPECTED_HEADER, TrialRow, load_trials
from .render import (
    FORMAT_RASTER,
    FORMAT_VECTOR,
    RenderResult,
    ReportSpec,
    render_all,
    render_experiment1,
    render_experiment2,
)

__version__ = "0.1.0"
