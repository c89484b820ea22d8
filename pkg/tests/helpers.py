"""Shared test utilities: independent oracles and convergence fits."""

import numpy as np

from adjoint_fp import GridFunction, hj_operator


def brute_force_jacobian(scheme, u, h=1e-5):
    """Central-difference Jacobian of the scheme operator, column by column.
    Independent of the sparse assembly path."""
    grid = u.grid
    n = grid.num_nodes
    jac = np.zeros((n, n))
    base = u.values.ravel()
    for j in range(n):
        plus = base.copy()
        minus = base.copy()
        plus[j] += h
        minus[j] -= h
        np_plus = hj_operator(scheme, GridFunction(grid, plus.reshape(grid.shape))).values.ravel()
        np_minus = hj_operator(scheme, GridFunction(grid, minus.reshape(grid.shape))).values.ravel()
        jac[:, j] = (np_plus - np_minus) / (2.0 * h)
    return jac


def observed_orders(errors):
    """log2 ratios of successive errors for grids refined by factors of 2."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


def relative(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)
