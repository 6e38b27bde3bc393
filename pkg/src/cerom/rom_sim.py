"""Time integration of ROM coefficient ODEs and the ROM error metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closure import RomModel
from .exceptions import ConfigError, NumericalError, RomInstabilityError

BLOWUP_THRESHOLD = 1e8
METHODS = ("bdf2", "rk4")


@dataclass(frozen=True, eq=False)
class RomTrajectory:
    """ROM coefficients ``a_r(t_j)`` stored row-wise, shape ``(M, r)``."""

    coeffs: np.ndarray
    dt: float
    t0: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.coeffs.shape[0])


def _check_state(a, step):
    if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > BLOWUP_THRESHOLD:
        raise RomInstabilityError("ROM instability: coefficients exceeded 1e8", step=step)


def _bdf2(model: RomModel, a0, dt, n_steps, t0):
    # Linearized BDF2 matching the DNS scheme: the quadratic term is advected
    # by the extrapolated state, forcing is taken at the new time level, and
    # the first step is backward Euler.
    r = a0.size
    eye = np.eye(r)
    A, B = model.A_total, model.B_total
    out = np.empty((n_steps + 1, r))
    out[0] = a0
    for k in range(n_steps):
        t_new = t0 + (k + 1) * dt
        if k == 0:
            w = out[0]
            lhs = eye / dt - (A + np.einsum("imn,m->in", B, w))
            rhs = out[0] / dt
        else:
            w = 2.0 * out[k] - out[k - 1]
            lhs = 1.5 * eye / dt - (A + np.einsum("imn,m->in", B, w))
            rhs = (4.0 * out[k] - out[k - 1]) / (2.0 * dt)
        if model.has_forcing:
            rhs = rhs + model.forcing(t_new)
        try:
            out[k + 1] = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular ROM step system: {exc}", step=k + 1) from exc
        _check_state(out[k + 1], k + 1)
    return out


def _rk4(model: RomModel, a0, dt, n_steps, t0):
    out = np.empty((n_steps + 1, a0.size))
    out[0] = a0
    a = a0.copy()
    f = model.rhs
    for k in range(n_steps):
        t = t0 + k * dt
        k1 = f(t, a)
        k2 = f(t + 0.5 * dt, a + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, a + 0.5 * dt * k2)
        k4 = f(t + dt, a + dt * k3)
        a = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_state(a, k + 1)
        out[k + 1] = a
    return out


def integrate(
    model: RomModel, a0, dt: float, t_end: float, *, method: str = "bdf2", t0: float = 0.0
) -> RomTrajectory:
    """Integrate ``model`` from ``t0`` to ``t_end`` with a fixed step.

    Parameters
    ----------
    model : RomModel
    a0 : array_like of shape (r,)
    dt, t_end : float
        ``t_end - t0`` must be a positive multiple of ``dt``.
    method : {"bdf2", "rk4"}
        ``bdf2`` is the linearized scheme used by the DNS; ``rk4`` is the
        classical explicit four-stage method.

    Raises
    ------
    RomInstabilityError
        Any coefficient exceeds 1e8 in magnitude or becomes non-finite.
    """
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    if not dt > 0:
        raise ConfigError("dt must be positive")
    span = t_end - t0
    n_steps = int(round(span / dt))
    if n_steps < 1 or abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ConfigError(f"t_end - t0 = {span} is not a positive multiple of dt={dt}")
    a0 = np.asarray(a0, dtype=np.float64).copy()
    if a0.shape != (model.r,):
        raise ConfigError(f"a0 has shape {a0.shape}, expected ({model.r},)")
    if model.has_forcing:
        # both ends must be covered by the sampled forcing
        model.forcing(t0)
        model.forcing(t0 + n_steps * dt)
    step = _bdf2 if method == "bdf2" else _rk4
    return RomTrajectory(coeffs=step(model, a0, dt, n_steps, t0), dt=dt, t0=t0)


def rom_error(rom, proj_dns, M_r, dt: float, T: float) -> float:
    """Time-averaged ``M_r``-norm of ``rom - proj_dns``.

    ``sqrt(sum_j e_j^T M_r e_j dt / T)`` over all sampled rows.
    """
    a = rom.coeffs if isinstance(rom, RomTrajectory) else np.asarray(rom, dtype=np.float64)
    b = np.asarray(proj_dns, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    M_r = np.asarray(M_r, dtype=np.float64)
    if M_r.shape != (a.shape[1], a.shape[1]):
        raise ValueError("M_r does not match the trajectory dimension")
    if not (dt > 0 and T > 0):
        raise ValueError("dt and T must be positive")
    e = a - b
    quad = np.einsum("ji,ik,jk->j", e, M_r, e)
    return float(np.sqrt(max(quad.sum(), 0.0) * dt / T))
