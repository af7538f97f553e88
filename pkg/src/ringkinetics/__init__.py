"""Deterministic transport of a magnetized collisionless annulus plasma.

The package advances an axisymmetric relativistic distribution on a 2D
annulus cross-section coupled to its radial and tangential fields, with an
external magnetic barrier confining the support away from the walls.  Every
analytic guarantee the scheme relies on — charge conservation, the energy
identity, sup-norm field envelopes, momentum-support growth, confinement
distance — is instrumented and checked at runtime.

Public surface: grid/state construction (``domain``), the confining
potential and a-priori constants (``potential``), the wave-pair field step
(``fields``), backward-characteristic transport (``transport``,
``kernels``), verification quantities (``diagnostics``), configuration
(``config``), run orchestration (``runner``), and the ``ringkinetics``
CLI (``cli``).
"""

from .config import RunConfig, emit_config, parse_config, parse_config_file
from .domain import (
    AnnulusSpec,
    BoundaryTrace,
    DistributionFunction,
    FieldState,
    InitialData,
    NormsBundle,
    PhaseSpaceGrid,
    build_grid,
    gaussian_ring_ic,
    gaussian_ring_profile,
    zero_ic,
)
from .errors import (
    BackendError,
    CflError,
    ConfigError,
    DomainError,
    GridError,
    GridSupportWarning,
    HistoryError,
    PotentialTableError,
    StepSizeError,
    SupportError,
    RingError,
)
from .potential import AprioriConstants, PotentialSpec
from .runner import RunResult, build_problem, run, run_with_output

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AnnulusSpec",
    "AprioriConstants",
    "BackendError",
    "BoundaryTrace",
    "CflError",
    "ConfigError",
    "DistributionFunction",
    "DomainError",
    "FieldState",
    "GridError",
    "GridSupportWarning",
    "HistoryError",
    "InitialData",
    "NormsBundle",
    "PhaseSpaceGrid",
    "PotentialSpec",
    "PotentialTableError",
    "RunConfig",
    "RunResult",
    "StepSizeError",
    "SupportError",
    "RingError",
    "build_grid",
    "build_problem",
    "emit_config",
    "gaussian_ring_ic",
    "gaussian_ring_profile",
    "parse_config",
    "parse_config_file",
    "run",
    "run_with_output",
    "zero_ic",
]
