"""Spectral kernel modes for Boltzmann, grazing-limit and Landau collision operators."""

from importlib.metadata import PackageNotFoundError, version

from .boltzmann_modes import GridConfig, ModeTensor, QuadratureSpec, build_mode_tensor, compute_mode, compute_mode_vhs
from .cross_sections import CrossSection, FamilyKind, GrazingFamily, momentum_transfer_constant, parse_kernel_spec
from .errors import (
    BlowupError,
    CacheError,
    ConfigError,
    DimensionMismatchError,
    DomainError,
    GrazingModesError,
    NonIntegrableError,
    QuadratureNotConvergedError,
    SupportViolationError,
)
from .estimator import SpectralCollisionOperator
from .grazing_fpl_modes import FplKernel, SplitKernel, approx_boltzmann_mode, build_split_kernel, fpl_mode, fpl_mode_alt
from .spectral_core import (
    Moments,
    SpectralState,
    collision_direct,
    collision_fast,
    moments,
    project_initial,
    step,
)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

__all__ = [
    "BlowupError",
    "CacheError",
    "ConfigError",
    "CrossSection",
    "DimensionMismatchError",
    "DomainError",
    "FamilyKind",
    "FplKernel",
    "GrazingFamily",
    "GrazingModesError",
    "GridConfig",
    "ModeTensor",
    "Moments",
    "NonIntegrableError",
    "QuadratureNotConvergedError",
    "QuadratureSpec",
    "SpectralCollisionOperator",
    "SpectralState",
    "SplitKernel",
    "SupportViolationError",
    "approx_boltzmann_mode",
    "build_mode_tensor",
    "build_split_kernel",
    "collision_direct",
    "collision_fast",
    "compute_mode",
    "compute_mode_vhs",
    "fpl_mode",
    "fpl_mode_alt",
    "momentum_transfer_constant",
    "moments",
    "parse_kernel_spec",
    "project_initial",
    "step",
]
