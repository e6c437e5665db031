"""Independent reference solvers used only by the tests."""

import numpy as np
from scipy.optimize import linprog


def lad_lp(X, y, w, lam=0.0):
    """Weighted, L1-penalized LAD (intercept unpenalized) as a linear program."""
    n, p = X.shape
    c = np.concatenate([[0.0], lam * np.ones(2 * p), w, w])
    A = np.hstack([np.ones((n, 1)), X, -X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] + [(0, None)] * (2 * p + 2 * n)
    r = linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    z = r.x
    return np.concatenate([[z[0]], z[1 : p + 1] - z[p + 1 : 2 * p + 1]]), r.fun


def hinge_lp(X, y, w):
    """Weighted hinge-loss minimization as a linear program; returns (theta, value)."""
    n, p = X.shape
    c = np.concatenate([np.zeros(p + 1), w])
    A = np.hstack([-y[:, None], -y[:, None] * X, -np.eye(n)])
    bounds = [(None, None)] * (p + 1) + [(0, None)] * n
    r = linprog(c, A_ub=A, b_ub=-np.ones(n), bounds=bounds, method="highs")
    return r.x[: p + 1], r.fun


def grid_argmin(f, lo, hi, num=20001):
    grid = np.linspace(lo, hi, num)
    vals = np.array([f(g) for g in grid])
    return grid[np.argmin(vals)]
