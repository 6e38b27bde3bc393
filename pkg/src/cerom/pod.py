"""Proper orthogonal decomposition in the FE mass-matrix inner product."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError, NumericalError
from .snapshots import SnapshotSet

DEFAULT_RANK_TOL = 1e-13
# negative eigenvalues of the snapshot correlation matrix above this
# fraction of the largest one indicate a broken mass matrix, not round-off
NEGATIVE_EIG_TOL = 1e-12


class ReducedBlocks(NamedTuple):
    M_r: np.ndarray
    S_r: np.ndarray
    M_rd: np.ndarray
    S_rd: np.ndarray


@dataclass(frozen=True, eq=False)
class ReducedTrajectory:
    """POD coefficients ``a_d(t_j)`` stored row-wise, shape ``(M, d)``."""

    coeffs: np.ndarray
    dt: float
    t0: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.coeffs.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def truncate(self, r: int) -> np.ndarray:
        return self.coeffs[:, :r]


def _identity_mass(n):
    return sp.identity(n, format="csr")


def _m_orthonormalize(Phi, mass):
    """Modified Gram-Schmidt with one re-orthogonalization pass."""
    Q = Phi.copy()
    for j in range(Q.shape[1]):
        v = Q[:, j]
        for _ in range(2):
            for i in range(j):
                v = v - (Q[:, i] @ (mass @ v)) * Q[:, i]
        norm = np.sqrt(v @ (mass @ v))
        if not norm > 0:
            raise NumericalError(f"POD mode {j + 1} collapsed during orthonormalization")
        Q[:, j] = v / norm
    return Q


class POD(TransformerMixin, BaseEstimator):
    """POD basis computed with the method of snapshots.

    Rows of ``X`` are snapshots (FE coefficient vectors). The basis is
    orthonormal in the inner product defined by ``mass``.

    Parameters
    ----------
    rank_tol : float, default 1e-13
        Modes with ``lambda_j / lambda_1 > rank_tol`` are kept.
    n_modes : int, optional
        Pin the number of modes instead of using ``rank_tol``.

    Attributes
    ----------
    basis_ : ndarray of shape (n_dof, d)
        FE coefficients of the modes, one column per mode.
    eigenvalues_ : ndarray of shape (d,)
    all_eigenvalues_ : ndarray of shape (n_samples,)
        Full clamped spectrum, descending.
    n_modes_ : int
        Number of retained modes ``d``.
    reduced_mass_, reduced_stiffness_ : ndarray of shape (d, d)
        ``Phi^T M_h Phi`` and ``Phi^T S_h Phi``; the latter is ``None`` when no
        stiffness matrix was supplied to :meth:`fit`.
    """

    def __init__(self, rank_tol=DEFAULT_RANK_TOL, n_modes=None):
        self.rank_tol = rank_tol
        self.n_modes = n_modes

    def fit(self, X, y=None, mass=None, stiffness=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if not 0 < self.rank_tol < 1:
            raise ConfigError(f"rank_tol must lie in (0, 1), got {self.rank_tol}")
        n_samples, n_dof = X.shape
        mass = _identity_mass(n_dof) if mass is None else sp.csr_matrix(mass)
        if mass.shape != (n_dof, n_dof):
            raise ConfigError("mass matrix does not match snapshot dimension")

        Y = X.T
        corr = Y.T @ (mass @ Y)
        corr = 0.5 * (corr + corr.T)
        lam, W = np.linalg.eigh(corr)
        lam, W = lam[::-1], W[:, ::-1]
        if not lam[0] > 0:
            raise NumericalError("zero-energy snapshots: snapshot matrix has no energy")
        neg = lam < 0
        if np.any(lam[neg] < -NEGATIVE_EIG_TOL * lam[0]):
            raise NumericalError(
                f"snapshot correlation has eigenvalue {lam.min():.3e}; "
                "mass matrix is not positive definite"
            )
        lam = np.where(neg, 0.0, lam)

        n_positive = int(np.count_nonzero(lam > 0))
        if self.n_modes is None:
            d = int(np.count_nonzero(lam / lam[0] > self.rank_tol))
        else:
            d = int(self.n_modes)
            if not 1 <= d <= n_positive:
                raise ConfigError(
                    f"n_modes={d} outside [1, {n_positive}] (numerically positive modes)"
                )

        Phi = Y @ W[:, :d] / np.sqrt(lam[:d])
        # sign convention: largest-magnitude entry of each mode is positive
        idx = np.argmax(np.abs(Phi), axis=0)
        signs = np.sign(Phi[idx, np.arange(d)])
        signs[signs == 0] = 1.0
        Phi = _m_orthonormalize(Phi * signs, mass)

        self.basis_ = Phi
        self.eigenvalues_ = lam[:d].copy()
        self.all_eigenvalues_ = lam
        self.n_modes_ = d
        self.n_features_in_ = n_dof
        self.mass_ = mass
        self.stiffness_ = None if stiffness is None else sp.csr_matrix(stiffness)
        MPhi = mass @ Phi
        self.reduced_mass_ = Phi.T @ MPhi
        if self.stiffness_ is not None:
            S = Phi.T @ (self.stiffness_ @ Phi)
            self.reduced_stiffness_ = 0.5 * (S + S.T)
        else:
            self.reduced_stiffness_ = None
        self._mass_basis = MPhi
        return self

    def transform(self, X):
        """POD coefficients ``a_d = Phi^T M_h u`` for each row ``u`` of ``X``."""
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, POD was fitted with {self.n_features_in_}"
            )
        return X @ self._mass_basis

    def inverse_transform(self, A):
        check_is_fitted(self, "basis_")
        A = check_array(A, dtype=np.float64)
        if A.shape[1] > self.n_modes_:
            raise ValueError(f"got {A.shape[1]} coefficients for {self.n_modes_} modes")
        return A @ self.basis_[:, : A.shape[1]].T

    def orthonormality_defect(self) -> float:
        check_is_fitted(self, "basis_")
        return float(np.max(np.abs(self.reduced_mass_ - np.eye(self.n_modes_))))

    def reduced_blocks(self, r: int) -> ReducedBlocks:
        """Leading blocks ``(M_r, S_r, M_{r x d}, S_{r x d})``."""
        check_is_fitted(self, "basis_")
        if self.reduced_stiffness_ is None:
            raise ConfigError("reduced blocks need a stiffness matrix at fit time")
        d = self.n_modes_
        if isinstance(r, bool) or int(r) != r or not 1 <= r <= d:
            raise ConfigError(f"r must be an integer in [1, {d}], got {r!r}")
        r = int(r)
        Md, Sd = self.reduced_mass_, self.reduced_stiffness_
        return ReducedBlocks(
            M_r=Md[:r, :r].copy(),
            S_r=Sd[:r, :r].copy(),
            M_rd=Md[:r, :].copy(),
            S_rd=Sd[:r, :].copy(),
        )


def compute_pod(
    snapshots: SnapshotSet,
    rank_tol: float = DEFAULT_RANK_TOL,
    n_modes: Optional[int] = None,
) -> POD:
    """Fit a :class:`POD` basis to a snapshot set."""
    return POD(rank_tol=rank_tol, n_modes=n_modes).fit(
        snapshots.Y.T, mass=snapshots.mass, stiffness=snapshots.stiffness
    )


def reduce_trajectory(snapshots: SnapshotSet, basis: POD) -> ReducedTrajectory:
    """Project every snapshot onto the POD basis."""
    if snapshots.n_dof != basis.n_features_in_:
        raise ValueError(
            f"snapshot dimension {snapshots.n_dof} does not match basis "
            f"dimension {basis.n_features_in_}"
        )
    return ReducedTrajectory(
        coeffs=basis.transform(snapshots.Y.T), dt=snapshots.dt, t0=snapshots.t0
    )


def reduced_blocks(basis: POD, r: int) -> ReducedBlocks:
    return basis.reduced_blocks(r)
