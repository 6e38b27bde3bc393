from types import SimpleNamespace

import numpy as np
import pytest

from cerom import build_mesh, compute_pod, dns_solve, initial_condition, reduce_trajectory


def burgers_run(kind="smooth", nu=0.1, n_cells=2048, dt=1e-3, t_end=1.0, n_modes=None):
    mesh = build_mesh(n_cells)
    snaps = dns_solve(mesh, nu, dt, t_end, initial_condition(kind, nu, mesh))
    pod = compute_pod(snaps, n_modes=n_modes)
    return SimpleNamespace(
        mesh=mesh, nu=nu, snapshots=snaps, pod=pod, traj=reduce_trajectory(snaps, pod)
    )


@pytest.fixture(scope="session")
def smooth_run():
    """Smooth profile, nu = 0.1, full resolution."""
    return burgers_run(n_modes=7)


@pytest.fixture(scope="session")
def small_run():
    """Coarse smooth run for cheap structural checks."""
    return burgers_run(n_cells=64, dt=1e-2, t_end=0.5, n_modes=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record a criterion outcome; the lines are echoed in the terminal summary."""

    def record(label, passed, detail, diagnostics=()):
        _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        _ACCEPTANCE_LINES.extend(f"      {d}" for d in diagnostics)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
