"""Independent dense-quadrature reference computations.

Piecewise-linear fields are evaluated with ``np.interp`` on a fine grid and
integrated with a 5-point Gauss rule per element, a separate code path from
the package's vectorized 3-point element kernels.
"""

import numpy as np

_X5, _W5 = np.polynomial.legendre.leggauss(5)


def _points(n_cells):
    nodes = np.linspace(0.0, 1.0, n_cells + 1)
    h = 1.0 / n_cells
    left = nodes[:-1, None]
    x = left + 0.5 * h * (_X5[None, :] + 1.0)
    w = np.broadcast_to(0.5 * h * _W5, x.shape)
    return nodes, x.ravel(), w.ravel()


def _full(values):
    values = np.asarray(values, dtype=float)
    return np.concatenate([[0.0], values, [0.0]])


def evaluate(values, n_cells, x):
    """Value and derivative of the interior-nodal P1 field at points ``x``."""
    nodes = np.linspace(0.0, 1.0, n_cells + 1)
    full = _full(values)
    val = np.interp(x, nodes, full)
    cell = np.clip((x * n_cells).astype(int), 0, n_cells - 1)
    slope = np.diff(full)[cell] * n_cells
    return val, slope


def inner(f, g, n_cells):
    _, x, w = _points(n_cells)
    return np.sum(w * f(x) * g(x))


def hat(i, n_cells):
    e = np.zeros(n_cells - 1)
    e[i] = 1.0
    return e


def mass_stiffness(n_cells):
    """Dense M_h and S_h from the fine-grid quadrature."""
    n = n_cells - 1
    _, x, w = _points(n_cells)
    vals = np.empty((n, x.size))
    ders = np.empty((n, x.size))
    for i in range(n):
        vals[i], ders[i] = evaluate(hat(i, n_cells), n_cells, x)
    return (vals * w) @ vals.T, (ders * w) @ ders.T


def trilinear(test, advect, grad, n_cells):
    """``T[i, m, n] = int advect_m grad_n' test_i`` for nodal column sets."""
    _, x, w = _points(n_cells)
    tv = np.array([evaluate(c, n_cells, x)[0] for c in np.asarray(test).T])
    av = np.array([evaluate(c, n_cells, x)[0] for c in np.asarray(advect).T])
    gd = np.array([evaluate(c, n_cells, x)[1] for c in np.asarray(grad).T])
    return np.einsum("ip,mp,np,p->imn", tv, av, gd, w)


def convection_load(u, n_cells):
    """``(u u', phi_i)`` for one interior-nodal field ``u``."""
    _, x, w = _points(n_cells)
    val, der = evaluate(u, n_cells, x)
    out = np.empty(n_cells - 1)
    for i in range(n_cells - 1):
        phi, _ = evaluate(hat(i, n_cells), n_cells, x)
        out[i] = np.sum(w * val * der * phi)
    return out
