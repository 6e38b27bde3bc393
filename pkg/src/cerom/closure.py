"""Galerkin ROM operators, exact closure targets and least-squares closures.

The ROM right-hand side is

    da_r/dt = A a_r + a_r^T B a_r + E_CE + tau

with ``A = -nu S_r``, ``B_imn = -(phi_m phi_n', phi_i)``, the Laplacian
commutation forcing ``E_CE = -nu M_r (b_r - c_r)`` and the projected
sub-filter-scale term ``tau_i = (u_r u_r', phi_i) - (bar(u_d u_d'), phi_i)``.
With these signs the projected DNS coefficients satisfy the equation exactly
(up to the FE time-discretization error).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConfigError
from .fe1d import BurgersConvection, build_mesh
from .filters import FilterSpec, ce_trajectory
from .pod import POD, ReducedTrajectory

VARIANTS = ("grom", "ddc", "ice_ddc", "ce_ddc")
DEFAULT_RCOND = 1e-5


@dataclass(frozen=True, eq=False)
class RomOperators:
    A: np.ndarray
    B: np.ndarray
    nu: float

    @property
    def r(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class ClosureTargets:
    """Sampled closure terms, one row per snapshot instant."""

    tau: np.ndarray
    e_ce: np.ndarray
    a_r: np.ndarray
    dt: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        if not (self.tau.shape == self.e_ce.shape == self.a_r.shape):
            raise ValueError("tau, e_ce and a_r must have identical shapes")


@dataclass(frozen=True, eq=False)
class FittedOperators:
    A_tilde: np.ndarray
    B_tilde: np.ndarray
    training_residual: float

    @classmethod
    def zeros(cls, r: int) -> "FittedOperators":
        return cls(np.zeros((r, r)), np.zeros((r, r, r)), 0.0)


def quadratic_term(B, a) -> np.ndarray:
    """``(a^T B a)_i = sum_mn B_imn a_m a_n`` for ``a`` of shape (r,) or (M, r)."""
    return np.einsum("imn,...m,...n->...i", B, a, a)


def convection_for(basis: POD) -> BurgersConvection:
    """Convection quadrature for a basis living on a uniform 1D interior mesh."""
    return BurgersConvection(build_mesh(basis.n_features_in_ + 1))


def _check_r(basis: POD, r):
    check_is_fitted(basis, "basis_")
    if isinstance(r, bool) or int(r) != r or not 1 <= r <= basis.n_modes_:
        raise ConfigError(f"r must be an integer in [1, {basis.n_modes_}], got {r!r}")
    return int(r)


def grom_operators(
    basis: POD, r: int, nu: float, convection: Optional[BurgersConvection] = None
) -> RomOperators:
    """Galerkin operators ``A = -nu S_r`` and ``B_imn = -(phi_m phi_n', phi_i)``.

    ``convection`` defaults to a uniform mesh with ``n_dof + 1`` cells.
    """
    r = _check_r(basis, r)
    if basis.reduced_stiffness_ is None:
        raise ConfigError("G-ROM operators need a stiffness matrix at POD fit time")
    if not nu >= 0:
        raise ConfigError("nu must be non-negative")
    conv = convection_for(basis) if convection is None else convection
    Phi = basis.basis_[:, :r]
    A = -nu * basis.reduced_stiffness_[:r, :r]
    B = -conv.tensor(Phi, Phi, Phi)
    return RomOperators(A=A, B=B, nu=float(nu))


def correction_targets(
    traj: ReducedTrajectory,
    basis: POD,
    r: int,
    spec: FilterSpec,
    nu: float,
    convection: Optional[BurgersConvection] = None,
    *,
    state: str = "truncated",
    laplacian_filter: Optional[str] = None,
    with_ce: bool = True,
) -> ClosureTargets:
    """Exact correction ``tau`` and CE forcing sampled along ``traj``.

    Parameters
    ----------
    traj : ReducedTrajectory
        ``d``-space coefficients of the projected snapshots.
    basis : POD
    r : int
    spec : FilterSpec
        Filter defining the overline of the convection term and the CE.
    nu : float
    convection : BurgersConvection, optional
    state : {"truncated", "filtered"}
        ROM state ``a_r``: the leading ``r`` entries of ``a_d`` or the
        ``spec``-filtered coefficients.
    laplacian_filter : str, optional
        Passed to :func:`cerom.filters.ce_trajectory`.
    with_ce : bool
        When False, ``e_ce`` is identically zero.
    """
    r = _check_r(basis, r)
    if state not in ("truncated", "filtered"):
        raise ConfigError(f"state must be 'truncated' or 'filtered', got {state!r}")
    a_d = np.asarray(traj.coeffs, dtype=np.float64)
    if a_d.ndim != 2 or a_d.shape[1] != basis.n_modes_:
        raise ValueError(f"trajectory has shape {a_d.shape}, basis has {basis.n_modes_} modes")
    conv = convection_for(basis) if convection is None else convection
    blocks = basis.reduced_blocks(r)
    Phi_d = basis.basis_
    Phi_r = Phi_d[:, :r]

    b, c = ce_trajectory(a_d, r, spec, blocks, laplacian_filter=laplacian_filter)
    if state == "truncated":
        a_r = a_d[:, :r].copy()
    else:
        filt = blocks.M_r + spec.delta**2 * blocks.S_r if spec.kind == "differential" else blocks.M_r
        a_r = cho_solve(cho_factor(filt, lower=True), blocks.M_rd @ a_d.T).T

    # FE-level nonlinear loads (u u', phi_h) for every snapshot instant
    load_r = Phi_r.T @ conv.load(Phi_r @ a_r.T)
    load_d = Phi_r.T @ conv.load(Phi_d @ a_d.T)
    if spec.kind == "differential":
        filt = blocks.M_r + spec.delta**2 * blocks.S_r
        g = cho_solve(cho_factor(filt, lower=True), load_d)
        overline = blocks.M_r @ g
    else:
        overline = load_d
    tau = (load_r - overline).T

    if with_ce:
        e_ce = -nu * (b - c) @ blocks.M_r.T
    else:
        e_ce = np.zeros_like(tau)
    return ClosureTargets(tau=tau, e_ce=e_ce, a_r=a_r, dt=traj.dt, t0=traj.t0)


def quadratic_features(a, kind: str = "quadratic") -> np.ndarray:
    """Design matrix ``[a, a_m a_n (m <= n)]`` with one row per sample."""
    a = np.atleast_2d(a)
    if kind == "linear":
        return a
    if kind != "quadratic":
        raise ConfigError(f"features must be 'linear' or 'quadratic', got {kind!r}")
    iu = np.triu_indices(a.shape[1])
    pairs = (a[:, :, None] * a[:, None, :])[:, iu[0], iu[1]]
    return np.hstack([a, pairs])


class QuadraticClosure(RegressorMixin, BaseEstimator):
    """Least-squares closure ``tau(a) ~ A_tilde a + a^T B_tilde a``.

    Each target component is fitted independently; the minimum-norm solution
    comes from a truncated SVD of the design matrix.

    Parameters
    ----------
    rcond : float, default 1e-5
        Singular values below ``rcond * sigma_max`` are discarded.
    scale_columns : bool, default True
        Normalize design-matrix columns to unit Euclidean norm before the SVD
        so the cutoff is insensitive to the very different magnitudes of the
        linear and quadratic features.
    features : {"quadratic", "linear"}

    Attributes
    ----------
    coef_ : ndarray of shape (n_features, r)
    A_tilde_ : ndarray of shape (r, r)
    B_tilde_ : ndarray of shape (r, r, r)
        Symmetric in the last two indices.
    rank_ : int
        Number of singular values kept.
    training_residual_ : float
        Frobenius norm of the training misfit.
    """

    def __init__(self, rcond=DEFAULT_RCOND, scale_columns=True, features="quadratic"):
        self.rcond = rcond
        self.scale_columns = scale_columns
        self.features = features

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        if y.ndim == 1:
            y = y[:, None]
        if not 0 <= self.rcond < 1:
            raise ConfigError(f"rcond must lie in [0, 1), got {self.rcond}")
        r = X.shape[1]
        F = quadratic_features(X, self.features)
        scale = np.linalg.norm(F, axis=0) if self.scale_columns else np.ones(F.shape[1])
        scale[scale == 0] = 1.0
        U, s, Vt = np.linalg.svd(F / scale, full_matrices=False)
        keep = s > self.rcond * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
        coef = Vt[keep].T @ ((U[:, keep].T @ y) / s[keep][:, None])
        coef = coef / scale[:, None]

        A_t = coef[:r].T.copy()
        B_t = np.zeros((y.shape[1], r, r))
        if self.features == "quadratic":
            iu = np.triu_indices(r)
            for q, (m, n) in enumerate(zip(*iu)):
                if m == n:
                    B_t[:, m, m] = coef[r + q]
                else:
                    B_t[:, m, n] = 0.5 * coef[r + q]
                    B_t[:, n, m] = 0.5 * coef[r + q]

        self.coef_ = coef
        self.A_tilde_ = A_t
        self.B_tilde_ = B_t
        self.singular_values_ = s
        self.rank_ = int(np.count_nonzero(keep))
        self.n_features_in_ = r
        self.training_residual_ = float(np.linalg.norm(y - F @ coef))
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.A_tilde_.T + quadratic_term(self.B_tilde_, X)

    def to_operators(self) -> FittedOperators:
        check_is_fitted(self, "coef_")
        return FittedOperators(self.A_tilde_, self.B_tilde_, self.training_residual_)


def fit_ansatz(
    targets,
    a_r,
    *,
    rcond: float = DEFAULT_RCOND,
    scale_columns: bool = True,
    features: str = "quadratic",
) -> FittedOperators:
    """Fit ``A_tilde``, ``B_tilde`` so that ``A_tilde a + a^T B_tilde a ~ targets``."""
    targets = np.asarray(targets, dtype=np.float64)
    a_r = np.asarray(a_r, dtype=np.float64)
    if targets.shape != a_r.shape:
        raise ValueError(f"targets {targets.shape} and a_r {a_r.shape} differ in shape")
    model = QuadraticClosure(rcond=rcond, scale_columns=scale_columns, features=features)
    return model.fit(a_r, targets).to_operators()


@dataclass(eq=False)
class RomModel:
    """Validated ROM right-hand side for one closure variant.

    ``ce_forcing`` rows are samples at ``forcing_t0 + j * forcing_dt``;
    between samples the forcing is linearly interpolated.
    """

    variant: str
    ops: RomOperators
    fitted: Optional[FittedOperators] = None
    ce_forcing: Optional[np.ndarray] = None
    forcing_dt: Optional[float] = None
    forcing_t0: float = 0.0
    notes: List[str] = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.ops.r

    @property
    def A_total(self) -> np.ndarray:
        if self.variant == "grom" or self.fitted is None:
            return self.ops.A
        return self.ops.A + self.fitted.A_tilde

    @property
    def B_total(self) -> np.ndarray:
        if self.variant == "grom" or self.fitted is None:
            return self.ops.B
        return self.ops.B + self.fitted.B_tilde

    @property
    def has_forcing(self) -> bool:
        return self.variant == "ice_ddc"

    def forcing(self, t: float) -> np.ndarray:
        if not self.has_forcing:
            return np.zeros(self.r)
        s = (t - self.forcing_t0) / self.forcing_dt
        last = self.ce_forcing.shape[0] - 1
        if s < -1e-9 or s > last + 1e-9:
            raise ConfigError(f"CE forcing does not cover t={t}")
        j = int(np.clip(np.floor(s), 0, max(last - 1, 0)))
        w = float(np.clip(s - j, 0.0, 1.0)) if last > 0 else 0.0
        if last == 0:
            return self.ce_forcing[0].copy()
        return (1.0 - w) * self.ce_forcing[j] + w * self.ce_forcing[j + 1]

    def rhs(self, t: float, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        out = self.A_total @ a + quadratic_term(self.B_total, a)
        if self.has_forcing:
            out = out + self.forcing(t)
        return out


def assemble_model(
    variant: str,
    ops: RomOperators,
    fitted: Optional[FittedOperators] = None,
    ce_forcing=None,
    dt: Optional[float] = None,
    t0: float = 0.0,
) -> RomModel:
    """Check the variant contract and build a :class:`RomModel`.

    ``grom`` ignores any fitted operators or forcing (with a warning kept in
    ``notes``). ``ddc`` and ``ce_ddc`` require ``fitted``; ``ice_ddc`` also
    requires ``ce_forcing`` sampled with step ``dt``.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    notes = []
    r = ops.r
    if variant == "grom":
        if fitted is not None or ce_forcing is not None:
            msg = "grom ignores the supplied fitted operators and forcing"
            warnings.warn(msg, UserWarning, stacklevel=2)
            notes.append(msg)
        return RomModel("grom", ops, notes=notes)

    if fitted is None:
        raise ConfigError(f"variant {variant!r} requires fitted operators")
    if fitted.A_tilde.shape != (r, r) or fitted.B_tilde.shape != (r, r, r):
        raise ConfigError("fitted operator shapes do not match the G-ROM operators")
    if variant != "ice_ddc":
        if ce_forcing is not None:
            notes.append(f"{variant} ignores the supplied CE forcing")
        return RomModel(variant, ops, fitted=fitted, notes=notes)

    if ce_forcing is None:
        raise ConfigError("ice_ddc requires CE forcing samples")
    forcing = np.atleast_2d(np.asarray(ce_forcing, dtype=np.float64))
    if forcing.shape[1] != r:
        raise ConfigError(f"CE forcing has {forcing.shape[1]} components, expected {r}")
    if forcing.shape[0] > 1 and not (dt is not None and dt > 0):
        raise ConfigError("ice_ddc forcing needs a positive sample spacing dt")
    return RomModel(
        "ice_ddc",
        ops,
        fitted=fitted,
        ce_forcing=forcing,
        forcing_dt=float(dt) if dt is not None else 1.0,
        forcing_t0=float(t0),
        notes=notes,
    )
