"""Exact bootstrap samplers: one weighted convex optimization per draw.

The solver is subgradient descent with ``lr / sqrt(t)`` steps and best-iterate
tracking, run for every learning rate of a grid; the lowest objective wins.
The Laplace penalty is handled by a soft-threshold (proximal) step so that
coefficients can reach exact zeros. Many draws are solved at once as a batch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, SampleBatch
from .losses import LossModel
from .weights import DirichletSpec, draw_dirichlet, full_bootstrap_weights, npl_concentration


@dataclass
class SolverConfig:
    max_epochs: int = 20_000
    lr_grid: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    early_stop_patience: int = 200
    early_stop_tol: float = 1e-6
    batch_mode: str = "full"
    minibatch: int = 32
    chunk: int = 250
    seed: int = 0

    def __post_init__(self):
        self.lr_grid = tuple(float(v) for v in self.lr_grid)
        if not self.lr_grid or min(self.lr_grid) <= 0:
            raise ValueError("lr_grid must be a nonempty list of positive rates")
        if self.batch_mode not in ("full", "stochastic"):
            raise ValueError(f"unknown batch_mode {self.batch_mode!r}")


@dataclass
class Solution:
    theta: np.ndarray
    objective: float
    lr: float
    iterations: int


@dataclass
class BatchSolution:
    theta: np.ndarray  # (B, d)
    objective: np.ndarray  # (B,)
    lr: np.ndarray  # (B,)
    iterations: int
    info: dict = field(default_factory=dict)


def _soft(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


class _Problem:
    """Weighted objectives for ``B`` draws, normalized by each draw's weight mass.

    Parameters are stored as ``(L, B, d)``: one copy per learning rate.
    """

    def __init__(self, model: LossModel, X, y, W, lam, prior_weight):
        self.model = model
        W = np.atleast_2d(np.asarray(W, dtype=float))
        self.B, n = W.shape
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim == 2:
            X = X[None]
            y = y[None]
        if X.shape[1] != n:
            raise ValueError(f"weights have {n} columns, data has {X.shape[1]} rows")
        if model.includes_intercept:
            X = np.concatenate([np.ones(X.shape[:2] + (1,)), X], axis=2)
        self.X, self.y = X, y
        self.d = X.shape[2]
        self.mass = W.sum(axis=1)
        if np.any(self.mass <= 0):
            raise ValueError("every weight vector needs positive mass")
        self.W = W / self.mass[:, None]
        lam = 0.0 if lam is None else lam
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (self.B,)) * prior_weight
        self.lam = lam / self.mass  # per-row threshold scale
        self.raw_lam = lam
        self.pen = model.coef_mask(self.d)
        self.gram = None
        if model.kind == "squared" and X.shape[0] == 1:
            Xs = X[0]
            self.gram = np.einsum("bn,ni,nj->bij", self.W, Xs, Xs)
            self.cross = self.W @ (Xs * y[0][:, None])
            self.yy = self.W @ (y[0] ** 2)

    def value_grad(self, theta, rows=None, idx=None):
        """Smooth-part (loss) value and subgradient for ``theta`` of shape (L, b, d)."""
        rows = slice(None) if rows is None else rows
        if self.gram is not None:
            A = self.gram[rows]
            At = np.einsum("bij,lbj->lbi", A, theta)
            c = self.cross[rows]
            value = np.einsum("lbi,lbi->lb", theta, At) - 2 * np.einsum("lbi,bi->lb", theta, c)
            value += self.yy[rows]
            return value, 2.0 * (At - c)
        Xr = self.X if self.X.shape[0] == 1 else self.X[rows]
        yr = self.y if self.y.shape[0] == 1 else self.y[rows]
        Wr = self.W[rows]
        if idx is not None:
            Xr, yr, Wr = Xr[:, idx], yr[:, idx], Wr[:, idx] * (Wr.shape[1] / len(idx))
        per_row = Xr.shape[0] > 1
        # per-row data: batch the matmuls over draws, (b, L, d) @ (b, d, n)
        if per_row:
            f = np.matmul(theta.transpose(1, 0, 2), Xr.transpose(0, 2, 1)).transpose(1, 0, 2)
        else:
            f = theta @ Xr[0].T
        value = (Wr * self.model.pointwise(f, yr)).sum(axis=-1)
        gf = Wr * self.model.pointwise_deriv(f, yr)
        if per_row:
            grad = np.matmul(gf.transpose(1, 0, 2), Xr).transpose(1, 0, 2)
        else:
            grad = gf @ Xr[0]
        return value, grad

    def penalty(self, theta, rows):
        lam = self.lam[rows]
        return lam * np.abs(theta[..., self.pen]).sum(axis=-1)


def solve_batch(
    model: LossModel,
    X,
    y,
    W,
    solver: SolverConfig,
    lam=None,
    prior_weight: float = 1.0,
    rng: np.random.Generator | None = None,
) -> BatchSolution:
    """Minimize ``sum_i W[b,i] l(theta; x_i) + lam * sum_j |theta_j|`` for each row ``b``.

    ``X``/``y`` are shared ``(n, p)``/``(n,)`` data or per-row ``(B, n, p)``/``(B, n)``.
    ``lam`` defaults to the model's prior strength and may be a per-row array.
    """
    if lam is None and model.prior is not None:
        lam = model.prior.lam
    prob = _Problem(model, X, y, W, lam, prior_weight)
    L, B, d = len(solver.lr_grid), prob.B, prob.d
    # steps are taken on the sum-scale objective; internally it is mass-normalized
    lr_eff = np.asarray(solver.lr_grid)[:, None] * prob.mass[None, :]
    alive = np.ones((L, B), dtype=bool)
    theta = np.zeros((L, B, d))
    best_val = np.full((L, B), np.inf)
    best_theta = np.zeros((L, B, d))
    last_improve = np.zeros((L, B), dtype=np.int64)
    active = np.arange(B)
    pen = prob.pen
    stochastic = solver.batch_mode == "stochastic"
    rng = np.random.default_rng(solver.seed) if rng is None else rng
    n = prob.W.shape[1]
    t = 0
    for t in range(1, solver.max_epochs + 1):
        idx = None
        if stochastic:
            idx = rng.choice(n, size=min(solver.minibatch, n), replace=False)
        th = theta[:, active]
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad = prob.value_grad(th, active, idx)
            value = value + prob.penalty(th, active)
        bv = best_val[:, active]
        better = value < bv
        margin = solver.early_stop_tol * np.maximum(np.abs(bv), 1e-12)
        improved = np.where(np.isfinite(bv), value < bv - np.where(np.isfinite(bv), margin, 0.0), better)
        if np.any(better):
            bv = np.where(better, value, bv)
            best_val[:, active] = bv
            best_theta[:, active] = np.where(better[..., None], th, best_theta[:, active])
        li = last_improve[:, active]
        li[improved] = t
        last_improve[:, active] = li
        step = (lr_eff[:, active] / np.sqrt(t))[..., None]
        th = th - step * grad
        th[..., pen] = _soft(th[..., pen], step * prob.lam[active][None, :, None])
        blown = ~np.isfinite(th).all(axis=-1) | ~np.isfinite(value)
        if np.any(blown):
            # a diverging learning rate is dropped from the grid for that draw
            al = alive[:, active]
            al[blown] = False
            alive[:, active] = al
            lr_eff[:, active] = np.where(al, lr_eff[:, active], 0.0)
            th[blown] = 0.0
            dead = ~al.any(axis=0)
            if np.any(dead):
                raise FloatingPointError(
                    f"non-finite iterate at iteration {t} for every lr in {solver.lr_grid}"
                    f" (draw {active[np.argmax(dead)]})"
                )
        theta[:, active] = th
        if t % solver.early_stop_patience == 0:
            stale = (t - last_improve[:, active]).min(axis=0) >= solver.early_stop_patience
            if np.any(stale):
                active = active[~stale]
                if active.size == 0:
                    break
    best_val = np.where(alive | np.isfinite(best_val), best_val, np.inf)
    pick = np.argmin(best_val, axis=0)
    cols = np.arange(B)
    theta_hat = best_theta[pick, cols]
    objective = best_val[pick, cols] * prob.mass
    if prior_weight and np.any(prob.raw_lam > 0):
        n_pen = int(pen.sum())
        const = np.where(prob.raw_lam > 0, n_pen * np.log(np.maximum(prob.raw_lam, 1e-300) / 2), 0.0)
        objective = objective - const
    return BatchSolution(
        theta_hat,
        objective,
        np.asarray(solver.lr_grid)[pick],
        t,
        {"best_by_lr": best_val * prob.mass[None, :]},
    )


def solve_weighted(data: Dataset, loss_model: LossModel, weights, solver: SolverConfig | None = None,
                   prior_weight: float = 1.0) -> Solution:
    """Approximate minimizer of the weighted objective for one weight vector."""
    solver = solver or SolverConfig()
    w = np.asarray(getattr(weights, "expanded", weights), dtype=float)
    if w.shape != (data.n,):
        raise ValueError(f"weights have shape {w.shape}, data has {data.n} rows")
    res = solve_batch(loss_model, data.X, data.y, w[None], solver, prior_weight=prior_weight)
    return Solution(res.theta[0], float(res.objective[0]), float(res.lr[0]), res.iterations)


def _chunks(N, size):
    for start in range(0, N, size):
        yield start, min(N, start + size)


def wlb_sample(data: Dataset, loss_model: LossModel, N: int, solver: SolverConfig | None = None,
               rng: np.random.Generator | None = None, weights=None) -> SampleBatch:
    """Weighted likelihood bootstrap: ``N`` draws with fresh ``n x Dir(1,...,1)`` weights.

    ``weights`` may supply an explicit ``(N, n)`` weight matrix instead.
    """
    solver = solver or SolverConfig()
    rng = np.random.default_rng(solver.seed) if rng is None else rng
    start = time.perf_counter()
    if weights is None:
        weights = full_bootstrap_weights(data.n, rng, size=N)
    weights = np.atleast_2d(weights)
    out = []
    for a, b in _chunks(N, solver.chunk):
        res = solve_batch(loss_model, data.X, data.y, weights[a:b], solver, rng=rng)
        out.append(res.theta)
    elapsed = time.perf_counter() - start
    return SampleBatch(np.vstack(out), "WLB", 0.0, elapsed, loss_model.includes_intercept)


def npl_sample(data: Dataset, pseudo_source, alpha: float, n_prime: int, N: int,
               loss_model: LossModel, solver: SolverConfig | None = None,
               rng: np.random.Generator | None = None) -> SampleBatch:
    """Posterior bootstrap with prior pseudo-samples redrawn for every draw.

    ``pseudo_source(rng, n_prime)`` returns a ``Dataset`` from the centering
    measure. Weights are ``(n + n') x Dir(1,...,1, alpha/n',...,alpha/n')``;
    ``alpha == 0`` drops the pseudo samples (Bayesian bootstrap).
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    solver = solver or SolverConfig()
    rng = np.random.default_rng(solver.seed) if rng is None else rng
    model = loss_model.with_prior(None)
    start = time.perf_counter()
    n = data.n
    out = []
    for a, b in _chunks(N, solver.chunk):
        B = b - a
        if alpha == 0:
            W = full_bootstrap_weights(n, rng, size=B)
            res = solve_batch(model, data.X, data.y, W, solver, prior_weight=0.0, rng=rng)
        else:
            Xs = np.empty((B, n + n_prime, data.p))
            ys = np.empty((B, n + n_prime))
            for k in range(B):
                pseudo = pseudo_source(rng, n_prime)
                Xs[k, :n], ys[k, :n] = data.X, data.y
                Xs[k, n:], ys[k, n:] = pseudo.X, pseudo.y
            spec = DirichletSpec(npl_concentration(n, n_prime, alpha, n_prime), float(n + n_prime))
            W = draw_dirichlet(spec, rng, size=B)
            res = solve_batch(model, Xs, ys, W, solver, prior_weight=0.0, rng=rng)
        out.append(res.theta)
    elapsed = time.perf_counter() - start
    return SampleBatch(np.vstack(out), "WLB", 0.0, elapsed, model.includes_intercept,
                       meta={"scheme": "npl", "alpha": alpha, "n_prime": n_prime})
