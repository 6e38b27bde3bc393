"""Commutation error and data-driven closure for reduced order models.

The pipeline runs a 1D Burgers finite element DNS, builds a POD basis,
evaluates the Laplacian commutation error of the ROM projection and
differential filters, and compares Galerkin and data-driven closure ROMs.
"""

from .exceptions import (
    CeromError,
    ConfigError,
    NumericalError,
    RomInstabilityError,
    SnapshotFormatError,
)
from .fe1d import (
    BurgersConvection,
    FeMatrices,
    Mesh1D,
    assemble_matrices,
    build_mesh,
    dns_solve,
    initial_condition,
)
from .snapshots import SnapshotSet, load_snapshots, save_snapshots
from .pod import POD, ReducedBlocks, ReducedTrajectory, compute_pod, reduce_trajectory, reduced_blocks
from .filters import (
    CeSample,
    FilterSpec,
    ROMFilter,
    apply_filter,
    avg_ce_norm,
    ce_coefficients,
    ce_trajectory,
)
from .closure import (
    ClosureTargets,
    FittedOperators,
    QuadraticClosure,
    RomModel,
    RomOperators,
    assemble_model,
    correction_targets,
    fit_ansatz,
    grom_operators,
)
from .rom_sim import RomTrajectory, integrate, rom_error

__version__ = "0.1.0"

__all__ = [
    "BurgersConvection",
    "CeSample",
    "CeromError",
    "ClosureTargets",
    "ConfigError",
    "FeMatrices",
    "FilterSpec",
    "FittedOperators",
    "Mesh1D",
    "NumericalError",
    "POD",
    "QuadraticClosure",
    "ROMFilter",
    "ReducedBlocks",
    "ReducedTrajectory",
    "RomInstabilityError",
    "RomModel",
    "RomOperators",
    "RomTrajectory",
    "SnapshotFormatError",
    "SnapshotSet",
    "apply_filter",
    "assemble_matrices",
    "assemble_model",
    "avg_ce_norm",
    "build_mesh",
    "ce_coefficients",
    "ce_trajectory",
    "compute_pod",
    "correction_targets",
    "dns_solve",
    "fit_ansatz",
    "grom_operators",
    "initial_condition",
    "integrate",
    "load_snapshots",
    "reduce_trajectory",
    "reduced_blocks",
    "rom_error",
    "save_snapshots",
]
