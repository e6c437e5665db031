"""Simulation designs: Bayesian SVM, LAD Models 1-2, LASSO path design.

Also computes the population target, the minimizer of the expected loss under
the data-generating law, by Monte Carlo plus subgradient descent.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .losses import LossModel

LAD_MODELS = ("M1", "M2")
LAD_SIGMA = 9.67
# Model 1 mixture 0.9 N(0,1) + 0.1 N(0,225)
M1_VARIANCE = 0.9 * 1.0 + 0.1 * 225.0
# Laplace(1) variance
M2_VARIANCE = 2.0


def equicorrelation(p: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def toeplitz_cov(p: int, base: float = 0.5) -> np.ndarray:
    idx = np.arange(p)
    return base ** np.abs(idx[:, None] - idx[None, :])


def mvn(rng: np.random.Generator, n: int, cov: np.ndarray, mean=None) -> np.ndarray:
    """Rows ``mean + L z`` with ``L`` the lower Cholesky factor of ``cov``."""
    p = cov.shape[0]
    L = np.linalg.cholesky(cov)
    z = rng.standard_normal((n, p))
    out = z @ L.T
    if mean is not None:
        out += mean
    return out


@dataclass
class SvmDesign:
    n: int = 50
    p: int = 10
    rho: float = 0.6
    n_test: int = 100
    signal: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    @property
    def cov(self) -> np.ndarray:
        return equicorrelation(self.p, self.rho)

    def draw(self, rng: np.random.Generator, n: int):
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        X = mvn(rng, n, self.cov) + self.signal * y[:, None]
        return X, y


@dataclass
class LadDesign:
    n: int = 100
    p: int = 8
    model: str = "M2"
    seed: int = 0
    intercept: float = 1.0
    sigma: float = LAD_SIGMA
    active: tuple = (1.5, 2.0, 3.0)

    def __post_init__(self):
        if self.model not in LAD_MODELS:
            raise ValueError(f"unknown LAD model {self.model!r}")
        if self.p < len(self.active):
            raise ValueError("p must cover the active coefficients")

    @property
    def theta_star(self) -> np.ndarray:
        theta = np.zeros(self.p)
        theta[: len(self.active)] = self.active
        return theta

    @property
    def truth(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.theta_star])

    @property
    def active_mask(self) -> np.ndarray:
        """Over the full parameter vector ``(beta, theta)``."""
        return np.concatenate([[False], self.theta_star != 0])

    @property
    def cov(self) -> np.ndarray:
        return toeplitz_cov(self.p)

    def noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.model == "M1":
            scale = np.where(rng.random(n) < 0.9, 1.0, 15.0)
            v = scale * rng.standard_normal(n)
            return v / np.sqrt(M1_VARIANCE)
        v = rng.laplace(0.0, 1.0, n)
        return v / np.sqrt(M2_VARIANCE)

    def draw(self, rng: np.random.Generator, n: int):
        X = mvn(rng, n, self.cov)
        y = self.intercept + X @ self.theta_star + self.sigma * self.noise(rng, n)
        return X, y


@dataclass
class LassoDesign:
    n: int = 1000
    p: int = 50
    rho: float = 0.6
    active: tuple = (1.0, 2.0, -2.0, 3.0)
    seed: int = 0

    @property
    def theta_star(self) -> np.ndarray:
        theta = np.zeros(self.p)
        theta[: len(self.active)] = self.active
        return theta

    @property
    def cov(self) -> np.ndarray:
        return equicorrelation(self.p, self.rho)

    def draw(self, rng: np.random.Generator, n: int):
        X = mvn(rng, n, self.cov)
        y = X @ self.theta_star + rng.standard_normal(n)
        return X, y


def _meta(design, kind):
    return {"design": kind, **asdict(design)}


def gen_svm(design: SvmDesign, rng: np.random.Generator | None = None):
    """Training set of size ``n`` and a test set of size ``n_test`` from the same law."""
    rng = np.random.default_rng(design.seed) if rng is None else rng
    X, y = design.draw(rng, design.n)
    Xt, yt = design.draw(rng, design.n_test)
    meta = _meta(design, "svm")
    return Dataset(X, y, meta), Dataset(Xt, yt, {**meta, "split": "test"})


def gen_lad(design: LadDesign, rng: np.random.Generator | None = None) -> Dataset:
    rng = np.random.default_rng(design.seed) if rng is None else rng
    X, y = design.draw(rng, design.n)
    return Dataset(X, y, _meta(design, "lad"))


def gen_lasso(design: LassoDesign, rng: np.random.Generator | None = None) -> Dataset:
    """Centered ``(X, y)`` so the squared-loss model needs no intercept."""
    rng = np.random.default_rng(design.seed) if rng is None else rng
    X, y = design.draw(rng, design.n)
    X = X - X.mean(axis=0)
    y = y - y.mean()
    return Dataset(X, y, _meta(design, "lasso"))


def svm_pseudo_sampler(data: Dataset):
    """Draws from the NPL centering measure: ``x`` resampled from the observed
    covariates, ``y`` independent Bernoulli(0.5) on ``{-1, +1}``."""

    def sample(rng: np.random.Generator, n_prime: int) -> Dataset:
        idx = rng.integers(0, data.n, n_prime)
        y = np.where(rng.random(n_prime) < 0.5, 1.0, -1.0)
        return Dataset(data.X[idx], y, {"pseudo": True})

    return sample


@dataclass
class TargetSpec:
    n_samples: int = 1_000_000
    iterations: int = 3000
    lr: float = 0.5
    tol: float = 1e-4
    seed: int = 12345
    extra: dict = field(default_factory=dict)


@dataclass
class TargetResult:
    theta0: np.ndarray
    converged: bool
    objective: float
    iterations: int


def population_target(loss_model: LossModel, design, spec: TargetSpec | None = None) -> TargetResult:
    """Minimize the Monte Carlo average loss over ``spec.n_samples`` fresh draws.

    Uses full-batch subgradient descent with ``lr / sqrt(t)`` steps and keeps
    the best iterate. ``converged`` is False when the best objective was still
    moving by more than ``tol`` (relative) over the final fifth of the run.
    """
    spec = spec or TargetSpec()
    rng = np.random.default_rng(spec.seed)
    X, y = design.draw(rng, spec.n_samples)
    model = loss_model.with_prior(None)
    d = model.dim(X.shape[1])
    theta = np.zeros((1, d))
    w = np.full(X.shape[0], 1.0 / X.shape[0])
    best = np.inf
    best_theta = theta[0].copy()
    history = []
    for t in range(1, spec.iterations + 1):
        value, grad = model.weighted_value_grad(theta, X, y, w, prior_weight=0.0)
        if value[0] < best:
            best = float(value[0])
            best_theta = theta[0].copy()
        history.append(best)
        theta = theta - spec.lr / np.sqrt(t) * grad
    tail = history[-max(2, spec.iterations // 5)]
    converged = abs(tail - best) <= spec.tol * max(abs(best), 1e-12)
    return TargetResult(best_theta, bool(converged), best, spec.iterations)
