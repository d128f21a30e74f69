"""Steady-state Gaussian entanglement in Kerr-modified cavity optomagnomechanics.

The pipeline: steady-state mean fields (or directly supplied effective
quantities) -> linearized drift/diffusion matrices -> stationary covariance
via the Lyapunov equation -> bipartite logarithmic negativity and the
bidirectional (Kerr-sign) contrast ratio.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND, NUMBA_ENABLED
from .core import (HBAR, KB, OperatingPoint, SystemParams, occupations,
                   thermal_occupation, to_angular)
from .dynamics import (MODE_ORDER, DriftDiffusion, StabilityResult,
                       build_diffusion, build_drift, drift_diffusion,
                       is_stable)
from .entanglement import (EN_ZERO_TOL, ModePair, ReducedCovariance,
                           contrast_ratio, log_negativity,
                           reduced_covariance, symplectic_eigenvalues_pt)
from .lyapunov import (CovarianceMatrix, UnstableSystemError, residual,
                       solve_lyapunov, symplectic_eigenvalues)
from .steady_state import (Branch, BranchSet, MeanFields, NoSteadyStateError,
                           kerr_shift, operating_point_direct,
                           operating_point_from_fields, solve_mean_fields,
                           steady_state_residual)
from .sweep import (Axis, LocusFit, SweepResult, SweepSpec, export_table,
                    optimal_locus, read_table, run_sweep)

__all__ = [
    "BACKEND", "NUMBA_ENABLED", "HBAR", "KB",
    "SystemParams", "OperatingPoint", "occupations", "thermal_occupation",
    "to_angular",
    "MODE_ORDER", "DriftDiffusion", "StabilityResult", "build_drift",
    "build_diffusion", "drift_diffusion", "is_stable",
    "ModePair", "ReducedCovariance", "EN_ZERO_TOL", "contrast_ratio",
    "log_negativity", "reduced_covariance", "symplectic_eigenvalues_pt",
    "CovarianceMatrix", "UnstableSystemError", "residual", "solve_lyapunov",
    "symplectic_eigenvalues",
    "MeanFields", "Branch", "BranchSet", "NoSteadyStateError", "kerr_shift",
    "operating_point_direct", "operating_point_from_fields",
    "solve_mean_fields", "steady_state_residual",
    "Axis", "SweepSpec", "SweepResult", "LocusFit", "run_sweep",
    "optimal_locus", "export_table", "read_table",
]
