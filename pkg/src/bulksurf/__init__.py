"""Solver, structural checks, and diagnostics for coupled bulk-surface
reaction-diffusion systems on a disk."""

__version__ = "0.1.0"

from .conditions import (
    CheckReport,
    IntermediateSumCert,
    MassControlCert,
    SamplePlan,
    check_growth_thresholds,
    check_intermediate_sum,
    check_mass_control,
    check_polynomial_bound,
    check_quasi_positivity,
)
from .diagnostics import (
    lp_norm,
    mass_report,
    time_integral_sup,
    trace_inequality_report,
    window_sup_report,
)
from .mesh import (
    PolarMesh,
    boundary_trace,
    build_polar_mesh,
    bulk_laplacian,
    surface_laplacian,
)
from .network import (
    Posynomial,
    ReactionNetwork,
    SpeciesSet,
    build_network,
    eval_rates,
    parse_expression,
    parse_network,
)
from .runner import RunOutcome, run
from .scenarios import ScenarioConfig, load_scenario, preset_names
from .solver import SimState, SolverConfig, TimeStepper, check_compatibility, step

__all__ = [
    "__version__",
    "PolarMesh",
    "build_polar_mesh",
    "bulk_laplacian",
    "surface_laplacian",
    "boundary_trace",
    "SpeciesSet",
    "Posynomial",
    "ReactionNetwork",
    "parse_expression",
    "parse_network",
    "build_network",
    "eval_rates",
    "MassControlCert",
    "IntermediateSumCert",
    "SamplePlan",
    "CheckReport",
    "check_quasi_positivity",
    "check_mass_control",
    "check_intermediate_sum",
    "check_polynomial_bound",
    "check_growth_thresholds",
    "SolverConfig",
    "SimState",
    "TimeStepper",
    "step",
    "check_compatibility",
    "run",
    "RunOutcome",
    "lp_norm",
    "mass_report",
    "time_integral_sup",
    "window_sup_report",
    "trace_inequality_report",
    "ScenarioConfig",
    "load_scenario",
    "preset_names",
]
