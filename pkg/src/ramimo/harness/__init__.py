"""Experiment specs, seeded sweeps and the ``ramimo`` command line tool."""

from .experiments import (
    TrendError,
    format_csv,
    run_experiment,
    run_fig2_analogue,
    run_fig3_analogue,
    run_fig4_analogue,
    run_fig56_analogue,
)
from .spec import ExperimentSpec, load_spec, spec_from_dict

__all__ = [
    "ExperimentSpec",
    "TrendError",
    "format_csv",
    "load_spec",
    "run_experiment",
    "run_fig2_analogue",
    "run_fig3_analogue",
    "run_fig4_analogue",
    "run_fig56_analogue",
    "spec_from_dict",
]
