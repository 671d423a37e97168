"""Numerical lab for graphical mean curvature flow between space forms.

Modules:

* ``spaceform``   flat tori and round spheres: metrics, Christoffel symbols, curvature
* ``gridcalc``    structured grids, finite-difference jets, induced metric, snapshots
* ``frames``      singular values, adapted frames, the S tensor and area margins
* ``equation``    the graph-flow right-hand side, pole filter and time-step bound
* ``flowcore``    time stepping and the run loop
* ``curvdiag``    second fundamental form, consistency residuals, diagnostics rows
* ``identities``  randomized verification of the algebraic identities and inequalities
* ``refinement``  grid-refinement battery for the consistency checks
* ``harness``     configuration, presets, persistence and the command line
"""

from graphflow.errors import (
    ArityError,
    ConfigError,
    ConstraintError,
    DegenerateMetric,
    GraphflowError,
    GraphLost,
    Instability,
    PoleSingularity,
)
from graphflow.flowcore import FlowConfig, FlowResult, run_flow, step
from graphflow.gridcalc import GridSpec, MapState, grid_for
from graphflow.spaceform import SpaceForm

__version__ = "0.1.0"

__all__ = [
    "ArityError",
    "ConfigError",
    "ConstraintError",
    "DegenerateMetric",
    "FlowConfig",
    "FlowResult",
    "GraphLost",
    "GraphflowError",
    "GridSpec",
    "Instability",
    "MapState",
    "PoleSingularity",
    "SpaceForm",
    "grid_for",
    "run_flow",
    "step",
]
