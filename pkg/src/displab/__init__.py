"""Spectral laboratory for shorttime dispersive estimates on tori.

Submodules: lattice and fields (pseudospectral plumbing), projectors
(band-restriction multipliers), dispersion (symbols, free flow, windows),
bilinear (shorttime product-norm harnesses), variation (p-variation and
windowed norms), solver (exponential RK4 evolution with flux and
commutator diagnostics), config/cli (experiment front end).
"""

__version__ = "0.1.0"

from .lattice import TorusLattice, make_lattice
from .fields import (
    FourierField,
    analyze,
    derivative,
    hermitian_reversal,
    hilbert_transform,
    load_field,
    random_field,
    save_field,
    synthesize,
)
from .projectors import (
    BandProjector,
    dyadic_bands,
    project,
    separated_product,
    slice_band,
)
from .dispersion import DispersionSpec, EuclideanWindow, get_spec, phase_on, propagate, window
from .bilinear import (
    EstimateReport,
    QuadratureRule,
    coherent_slab_pair,
    extremizer_ascent,
    fit_loglog_slope,
    hhh_separated_ratio,
    linear_strichartz_norm,
    monte_carlo_ratio,
    shorttime_bilinear_norm,
    theoretical_factor,
)
from .variation import (
    EnergyLedger,
    SampledPath,
    e_s_norm,
    load_path,
    save_path,
    shorttime_v2,
    v_p_norm,
)
from .solver import (
    BlowUpError,
    EquationSpec,
    FluxRecord,
    SolverState,
    StepGuardError,
    commutator_residual,
    conservation_diagnostics,
    difference_norms,
    equation,
    evolve,
    flux_decompose,
    initial_profile,
    initial_state,
    nonlinearity,
    nonlinearity_divergence_form,
    step,
)
from .config import ConfigError, ExperimentConfig, config_hash, parse_config, serialize_config

__all__ = [
    "__version__",
    "TorusLattice",
    "make_lattice",
    "FourierField",
    "analyze",
    "synthesize",
    "derivative",
    "hilbert_transform",
    "hermitian_reversal",
    "random_field",
    "save_field",
    "load_field",
    "BandProjector",
    "project",
    "dyadic_bands",
    "slice_band",
    "separated_product",
    "DispersionSpec",
    "EuclideanWindow",
    "get_spec",
    "window",
    "propagate",
    "phase_on",
    "QuadratureRule",
    "EstimateReport",
    "shorttime_bilinear_norm",
    "linear_strichartz_norm",
    "monte_carlo_ratio",
    "hhh_separated_ratio",
    "extremizer_ascent",
    "coherent_slab_pair",
    "theoretical_factor",
    "fit_loglog_slope",
    "SampledPath",
    "EnergyLedger",
    "v_p_norm",
    "e_s_norm",
    "shorttime_v2",
    "save_path",
    "load_path",
    "EquationSpec",
    "SolverState",
    "StepGuardError",
    "BlowUpError",
    "equation",
    "initial_state",
    "step",
    "evolve",
    "nonlinearity",
    "nonlinearity_divergence_form",
    "conservation_diagnostics",
    "FluxRecord",
    "flux_decompose",
    "commutator_residual",
    "difference_norms",
    "initial_profile",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "config_hash",
]
