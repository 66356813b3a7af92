"""Figure rendering for the exploration design harness CSV outputs.

Reads the versioned sweep and validation files and renders log-log trend
figures and Monte Carlo coverage histograms.  Consumes only the CSV files;
nothing is recomputed, so the plotted values are the file's values.
"""

from .errors import DataError, SchemaError
from .plots import (SCHEMA_VERSION, SWEEP_COLUMNS, VALIDATION_COLUMNS,
                    PlotSpec, SweepTable, ValidationTable, build_sweep_figure,
                    build_validation_figure, parse_sweep, parse_validation,
                    render_sweep, render_validation)

__version__ = "0.1.0"

__all__ = [
    "DataError", "PlotSpec", "SCHEMA_VERSION", "SWEEP_COLUMNS", "SchemaError",
    "SweepTable", "VALIDATION_COLUMNS", "ValidationTable",
    "build_sweep_figure", "build_validation_figure", "parse_sweep",
    "parse_validation", "render_sweep", "render_validation",
]
