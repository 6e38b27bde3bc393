"""Linear finite elements for the 1D viscous Burgers equation on [0, 1].

Homogeneous Dirichlet nodes are eliminated, so every vector and matrix here
lives on the ``n_cells - 1`` interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, solve_banded

from .exceptions import ConfigError, NumericalError
from .snapshots import SnapshotSet

# 3-point Gauss-Legendre rule on the reference element [0, 1]
_GAUSS_X = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0

SMOOTH_ALPHA = 5.0
SMOOTH_BETA = 4.0


@dataclass(frozen=True)
class Mesh1D:
    n_cells: int
    nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def interior_dof_count(self) -> int:
        return self.n_cells - 1

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass(frozen=True)
class FeMatrices:
    """Mass and stiffness matrices over interior DOFs (CSR, symmetric)."""

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix


def build_mesh(n_cells: int) -> Mesh1D:
    """Uniform mesh of ``[0, 1]`` with ``n_cells`` linear elements."""
    if isinstance(n_cells, bool) or int(n_cells) != n_cells or n_cells < 2:
        raise ConfigError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    n_cells = int(n_cells)
    nodes = np.arange(n_cells + 1, dtype=np.float64) / n_cells
    nodes.setflags(write=False)
    return Mesh1D(n_cells=n_cells, nodes=nodes)


def _tridiag(n, diag, off):
    return sp.diags(
        [np.full(n - 1, off), np.full(n, diag), np.full(n - 1, off)],
        [-1, 0, 1],
        format="csr",
    )


def assemble_matrices(mesh: Mesh1D) -> FeMatrices:
    """Consistent mass and stiffness matrices for piecewise linear elements."""
    h = mesh.h
    n = mesh.interior_dof_count
    return FeMatrices(
        mass=_tridiag(n, 2.0 * h / 3.0, h / 6.0),
        stiffness=_tridiag(n, 2.0 / h, -1.0 / h),
    )


def _to_banded(mat: sp.spmatrix) -> np.ndarray:
    dia = sp.dia_matrix(mat)
    n = mat.shape[0]
    ab = np.zeros((3, n))
    for offset, row in zip(dia.offsets, dia.data):
        if offset == 1:
            ab[0, 1:] = row[1:]
        elif offset == 0:
            ab[1] = row
        elif offset == -1:
            ab[2, :-1] = row[:-1]
    return ab


def initial_condition(kind: str, nu: float, mesh: Mesh1D) -> np.ndarray:
    """Nodal interpolant of an initial profile on the interior nodes.

    Parameters
    ----------
    kind : {"smooth", "step"}
        ``smooth`` is ``2 nu beta pi sin(pi x) / (alpha + beta cos(pi x))``
        with ``alpha=5``, ``beta=4``; ``step`` is 1 on ``(0, 1/2]`` and 0 on
        ``(1/2, 1]``.
    nu : float
        Viscosity; only the smooth profile depends on it.
    mesh : Mesh1D
    """
    x = mesh.interior_nodes
    if kind == "smooth":
        if not nu > 0:
            raise ConfigError("smooth initial condition requires nu > 0")
        return (
            2.0 * nu * SMOOTH_BETA * np.pi * np.sin(np.pi * x)
            / (SMOOTH_ALPHA + SMOOTH_BETA * np.cos(np.pi * x))
        )
    if kind == "step":
        return np.where(x <= 0.5, 1.0, 0.0)
    raise ConfigError(f"unknown initial condition kind {kind!r}")


def smooth_exact_solution(x, t, nu):
    """Cole-Hopf solution matching the smooth initial profile."""
    e = np.exp(-np.pi**2 * nu * t)
    return (
        2.0 * nu * SMOOTH_BETA * np.pi * e * np.sin(np.pi * x)
        / (SMOOTH_ALPHA + SMOOTH_BETA * e * np.cos(np.pi * x))
    )


class BurgersConvection:
    """Quadrature of the convection form ``(w u_x, v)`` on a uniform mesh.

    All routines use a 3-point Gauss rule per element, which is exact for
    the cubic integrands produced by products of piecewise linears.
    """

    def __init__(self, mesh: Mesh1D):
        self.mesh = mesh
        self.h = mesh.h
        n = mesh.interior_dof_count
        self._n = n

    def _pad(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != self._n:
            raise ValueError(
                f"expected {self._n} interior values, got {values.shape[0]}"
            )
        pad = [(1, 1)] + [(0, 0)] * (values.ndim - 1)
        return np.pad(values, pad)

    def _at_gauss(self, values):
        full = self._pad(values)
        left, right = full[:-1], full[1:]
        x = _GAUSS_X.reshape((-1,) + (1,) * left.ndim)
        at_q = (1.0 - x) * left + x * right
        slope = (right - left) / self.h
        return at_q, slope

    def banded_matrix(self, w) -> np.ndarray:
        """Banded form of ``C(w)_ij = (w phi_j', phi_i)``."""
        h = self.h
        wq, _ = self._at_gauss(w)
        xq = _GAUSS_X[:, None]
        # int_e w N_a, a = 0 (left) and 1 (right)
        i0 = h * np.sum(_GAUSS_W[:, None] * wq * (1.0 - xq), axis=0)
        i1 = h * np.sum(_GAUSS_W[:, None] * wq * xq, axis=0)
        n_nodes = self.mesh.n_cells + 1
        diag = np.zeros(n_nodes)
        diag[:-1] -= i0 / h
        diag[1:] += i1 / h
        upper = i0 / h
        lower = -i1 / h
        ab = np.zeros((3, self._n))
        ab[1] = diag[1:-1]
        ab[0, 1:] = upper[1:-1]
        ab[2, :-1] = lower[1:-1]
        return ab

    def matrix(self, w) -> sp.csr_matrix:
        ab = self.banded_matrix(w)
        return sp.diags([ab[2, :-1], ab[1], ab[0, 1:]], [-1, 0, 1], format="csr")

    def load(self, u) -> np.ndarray:
        """Nonlinear load ``(u u_x, phi_i)`` for each column of ``u``."""
        h = self.h
        uq, slope = self._at_gauss(u)
        shape = (-1,) + (1,) * (uq.ndim - 1)
        xq = _GAUSS_X.reshape(shape)
        wq = _GAUSS_W.reshape(shape)
        base = h * wq * uq * slope
        left = np.sum(base * (1.0 - xq), axis=0)
        right = np.sum(base * xq, axis=0)
        out = np.zeros((left.shape[0] + 1,) + left.shape[1:])
        out[:-1] += left
        out[1:] += right
        return out[1:-1]

    def tensor(self, test, advect, grad) -> np.ndarray:
        """``T[i, m, n] = (advect_m grad_n', test_i)`` for nodal column sets."""
        tq, _ = self._at_gauss(test)
        aq, _ = self._at_gauss(advect)
        _, gslope = self._at_gauss(grad)
        return np.einsum(
            "q,qei,qem,en->imn", self.h * _GAUSS_W, tq, aq, gslope, optimize=True
        )


def dns_solve(
    mesh: Mesh1D,
    nu: float,
    dt: float,
    t_end: float,
    ic,
    *,
    check_energy: bool = False,
) -> SnapshotSet:
    """Linearized BDF2 finite element solve of Burgers' equation.

    The first step is backward Euler; later steps advect with the
    extrapolated velocity ``2 u^n - u^{n-1}``. Every time level, including
    ``t = 0``, is stored as a snapshot column.

    Parameters
    ----------
    mesh : Mesh1D
    nu : float
        Viscosity, > 0.
    dt, t_end : float
        Step size and final time; ``t_end`` must be a multiple of ``dt``.
    ic : array_like
        Interior nodal values at ``t = 0``.
    check_energy : bool, default False
        Raise if the discrete energy ``u^T M u / 2`` increases between steps.

    Returns
    -------
    SnapshotSet
        ``Y`` has ``round(t_end / dt) + 1`` columns.

    Raises
    ------
    NumericalError
        Singular step system, non-finite values, or (with ``check_energy``)
        an energy increase; the message names the step index.
    """
    if not nu > 0:
        raise ConfigError("nu must be positive")
    if not dt > 0:
        raise ConfigError("dt must be positive")
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ConfigError(f"t_end={t_end} is not a positive multiple of dt={dt}")

    mats = assemble_matrices(mesh)
    conv = BurgersConvection(mesh)
    mass_b = _to_banded(mats.mass)
    stiff_b = _to_banded(mats.stiffness)
    u0 = np.asarray(ic, dtype=np.float64)
    if u0.shape != (mesh.interior_dof_count,):
        raise ConfigError(
            f"initial condition must have {mesh.interior_dof_count} entries"
        )

    Y = np.empty((u0.size, n_steps + 1))
    Y[:, 0] = u0
    energy = 0.5 * u0 @ (mats.mass @ u0)

    for k in range(n_steps):
        if k == 0:
            lhs = mass_b / dt + nu * stiff_b + conv.banded_matrix(u0)
            rhs = mats.mass @ u0 / dt
        else:
            u_ext = 2.0 * Y[:, k] - Y[:, k - 1]
            lhs = 1.5 * mass_b / dt + nu * stiff_b + conv.banded_matrix(u_ext)
            rhs = mats.mass @ (4.0 * Y[:, k] - Y[:, k - 1]) / (2.0 * dt)
        try:
            u_new = solve_banded((1, 1), lhs, rhs)
        except (LinAlgError, ValueError) as exc:
            raise NumericalError(f"DNS linear solve failed: {exc}", step=k + 1) from exc
        if not np.all(np.isfinite(u_new)):
            raise NumericalError("non-finite DNS solution", step=k + 1)
        if check_energy:
            new_energy = 0.5 * u_new @ (mats.mass @ u_new)
            if new_energy > energy * (1.0 + 1e-12) + 1e-300:
                raise NumericalError(
                    f"discrete energy increased from {energy:.6e} to {new_energy:.6e}",
                    step=k + 1,
                )
            energy = new_energy
        Y[:, k + 1] = u_new

    return SnapshotSet(Y=Y, mass=mats.mass, stiffness=mats.stiffness, dt=dt, t0=0.0)
