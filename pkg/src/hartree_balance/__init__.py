"""Ground states, thresholds and dynamics for Schrodinger equations with
two competing Hartree (Riesz-potential) nonlinearities."""

from .checkpoint import read_checkpoint, read_sidecar, save_ground_state, write_checkpoint
from .config import RunConfig, parse_config
from .dynamics import blowup_monitor, evolve, k_functional, virial_terms, virial_weight
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    HartreeError,
    IntegrationError,
    NumericError,
    RegimeError,
    SolverError,
    UnsupportedError,
    UsageError,
)
from .functionals import energy, pohozaev_time, scale_t
from .ground_state import (
    DEFAULT_SEED,
    GroundState,
    SolverParams,
    VanishingVerdict,
    minimize_critical,
    minimize_global,
    minimize_pohozaev,
    solve_choquard,
    solve_zero_mass,
)
from .spectral_core import Field, build_kernel, build_kernels, make_grid, make_radial_grid
from .thresholds import critical_mass, decay_fit, scan_gamma, scan_m, subadditivity_check

__all__ = [
    "ConfigError",
    "DEFAULT_SEED",
    "DomainError",
    "Field",
    "FormatError",
    "GroundState",
    "HartreeError",
    "IntegrationError",
    "NumericError",
    "RegimeError",
    "RunConfig",
    "SolverError",
    "SolverParams",
    "UnsupportedError",
    "UsageError",
    "VanishingVerdict",
    "blowup_monitor",
    "build_kernel",
    "build_kernels",
    "critical_mass",
    "decay_fit",
    "energy",
    "evolve",
    "k_functional",
    "make_grid",
    "make_radial_grid",
    "minimize_critical",
    "minimize_global",
    "minimize_pohozaev",
    "parse_config",
    "pohozaev_time",
    "read_checkpoint",
    "read_sidecar",
    "save_ground_state",
    "scale_t",
    "scan_gamma",
    "scan_m",
    "solve_choquard",
    "solve_zero_mass",
    "subadditivity_check",
    "virial_terms",
    "virial_weight",
    "write_checkpoint",
]
