"""Algebraic property checks run against a pipeline's basis and operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..closure import correction_targets, fit_ansatz, grom_operators, quadratic_term
from ..filters import FilterSpec, apply_filter, avg_ce_norm, ce_trajectory
from .experiments import Pipeline

ORTHO_TOL = 1e-10
TRILINEAR_TOL = 1e-12
RECOVERY_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _check(name, value, tol, fmt="{:.3e}"):
    return CheckResult(name, bool(value < tol), f"{fmt.format(value)} (< {tol:g})")


def run_checks(pipe: Pipeline, seed: int = 0) -> List[CheckResult]:
    """Property suite on the data held by ``pipe``.

    Operator checks that need the Burgers convection form are skipped when
    the pipeline has none.
    """
    rng = np.random.default_rng(seed)
    basis = pipe.basis
    d = basis.n_modes_
    out = [_check("POD M-orthonormality", basis.orthonormality_defect(), ORTHO_TOL)]

    lam = basis.all_eigenvalues_
    ok = bool(np.all(lam >= 0) and np.all(np.diff(lam) <= 0))
    out.append(CheckResult("eigenvalues sorted and non-negative", ok, f"{lam.size} values"))

    S = basis.reduced_stiffness_
    sym = float(np.max(np.abs(S - S.T)))
    spd = bool(np.all(np.linalg.eigvalsh(S) > 0))
    out.append(CheckResult("S_r symmetric positive definite", spd and sym == 0.0, f"min eig > 0: {spd}"))

    spec = FilterSpec("projection")
    blocks_d = basis.reduced_blocks(d)
    b, c = ce_trajectory(pipe.traj.coeffs, d, spec, blocks_d)
    T = pipe.horizon
    # relative to the filtered Laplacian: S_r grows with the mode count
    ce_full = avg_ce_norm(b - c, blocks_d.M_r, pipe.traj.dt, T)
    scale = avg_ce_norm(c, blocks_d.M_r, pipe.traj.dt, T)
    out.append(_check("projection CE vanishes at r=d (relative)", ce_full / max(scale, 1e-300), 1e-12))

    r = max(1, min(2, d - 1))
    blocks = basis.reduced_blocks(r)
    a_d = rng.standard_normal((20, d))
    once = apply_filter(a_d, r, spec, blocks)
    padded = np.hstack([once, np.zeros((20, d - r))])
    twice = apply_filter(padded, r, spec, blocks)
    out.append(_check("projection filter idempotence", float(np.max(np.abs(twice - once))), 1e-12))

    # synthetic recovery of known operators
    r_syn = 3
    A_true = rng.standard_normal((r_syn, r_syn))
    B_true = rng.standard_normal((r_syn, r_syn, r_syn))
    B_sym = 0.5 * (B_true + B_true.transpose(0, 2, 1))
    a = rng.standard_normal((500, r_syn))
    y = a @ A_true.T + quadratic_term(B_true, a)
    fitted = fit_ansatz(y, a)
    err = max(
        np.linalg.norm(fitted.A_tilde - A_true) / np.linalg.norm(A_true),
        np.linalg.norm(fitted.B_tilde - B_sym) / np.linalg.norm(B_sym),
    )
    out.append(_check("synthetic operator recovery", float(err), RECOVERY_TOL))

    if pipe.convection is None:
        out.append(CheckResult("trilinear identity", True, "skipped: no convection form"))
        out.append(CheckResult("least-squares residual <= zero model", True, "skipped: no convection form"))
        return out

    r_tri = min(3, d)
    ops = grom_operators(basis, r_tri, 0.0, pipe.convection)
    vecs = rng.standard_normal((100, r_tri))
    tri = np.einsum("imn,ki,km,kn->k", ops.B, vecs, vecs, vecs)
    out.append(_check("trilinear identity", float(np.max(np.abs(tri))), TRILINEAR_TOL))

    nu = pipe.config.raw.get("nu", 0.0)
    targets = correction_targets(pipe.traj, basis, r, spec, nu, pipe.convection)
    fit = fit_ansatz(targets.tau, targets.a_r)
    zero = float(np.linalg.norm(targets.tau))
    out.append(
        CheckResult(
            "least-squares residual <= zero model",
            fit.training_residual <= zero,
            f"{fit.training_residual:.3e} vs {zero:.3e}",
        )
    )
    return out
