"""Per-observation losses, Laplace log-prior and Gibbs posterior log-density.

All three losses depend on the parameter only through the linear predictor
``f = beta + x . theta`` (``f = x . theta`` without intercept), so the batched
routines work on predictor matrices of shape ``(B, n)`` for ``B`` parameter
vectors at once. Parameter vectors store the intercept first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("hinge", "lad", "squared")


@dataclass(frozen=True)
class LaplacePrior:
    """Independent ``Laplace(0, 1/lam)`` on each coefficient: ``(lam/2) exp(-lam |t|)``."""

    lam: float = 0.0
    penalize_intercept: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")


@dataclass(frozen=True)
class Parameter:
    intercept: float | None
    coefs: np.ndarray

    def as_vector(self) -> np.ndarray:
        coefs = np.asarray(self.coefs, dtype=float)
        if self.intercept is None:
            return coefs.copy()
        return np.concatenate([[float(self.intercept)], coefs])

    @classmethod
    def from_vector(cls, vec, includes_intercept: bool = True) -> "Parameter":
        vec = np.asarray(vec, dtype=float)
        if includes_intercept:
            return cls(float(vec[0]), vec[1:].copy())
        return cls(None, vec.copy())


@dataclass(frozen=True)
class LossModel:
    kind: str
    includes_intercept: bool = True
    prior: LaplacePrior | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")

    @classmethod
    def hinge(cls, prior=None):
        return cls("hinge", True, prior)

    @classmethod
    def lad(cls, prior=None):
        return cls("lad", True, prior)

    @classmethod
    def squared(cls, prior=None):
        # centered design, no intercept
        return cls("squared", False, prior)

    def dim(self, p: int) -> int:
        return p + int(self.includes_intercept)

    def with_prior(self, prior: LaplacePrior | None) -> "LossModel":
        return LossModel(self.kind, self.includes_intercept, prior)

    # -- batched core ---------------------------------------------------
    def predictor(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        if self.includes_intercept:
            return theta[:, :1] + theta[:, 1:] @ X.T
        return theta @ X.T

    def pointwise(self, f: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.kind == "hinge":
            return np.maximum(0.0, 1.0 - y * f)
        if self.kind == "lad":
            return np.abs(y - f)
        r = y - f
        return r * r

    def pointwise_deriv(self, f: np.ndarray, y: np.ndarray) -> np.ndarray:
        """A subgradient of the loss in ``f`` (0 at the hinge kink, sign(0)=0)."""
        if self.kind == "hinge":
            return np.where(y * f < 1.0, -y, 0.0)
        if self.kind == "lad":
            return -np.sign(y - f)
        return -2.0 * (y - f)

    def chain(self, g_f: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Map ``(B, n)`` predictor gradients to ``(B, d)`` parameter gradients."""
        g_coef = g_f @ X
        if self.includes_intercept:
            return np.concatenate([g_f.sum(axis=1, keepdims=True), g_coef], axis=1)
        return g_coef

    def coef_mask(self, d: int) -> np.ndarray:
        """Which parameter entries the prior penalizes."""
        mask = np.ones(d, dtype=bool)
        if self.includes_intercept and not (self.prior and self.prior.penalize_intercept):
            mask[0] = False
        return mask

    def log_prior_batch(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        if self.prior is None or self.prior.lam == 0:
            return np.zeros(theta.shape[0])
        lam = self.prior.lam
        coefs = theta[:, self.coef_mask(theta.shape[1])]
        return coefs.shape[1] * np.log(lam / 2.0) - lam * np.abs(coefs).sum(axis=1)

    def log_prior_grad_batch(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        g = np.zeros_like(theta)
        if self.prior is None or self.prior.lam == 0:
            return g
        mask = self.coef_mask(theta.shape[1])
        g[:, mask] = -self.prior.lam * np.sign(theta[:, mask])
        return g

    def weighted_value_grad(self, theta, X, y, weights, prior_weight=1.0):
        """Objective ``sum_i w_i l_i - prior_weight * log pi`` and its subgradient.

        ``theta`` is ``(B, d)``, ``weights`` is ``(n,)`` or ``(B, n)``.
        Returns ``(values (B,), grads (B, d))``.
        """
        theta = np.atleast_2d(theta)
        f = self.predictor(theta, X)
        values = (weights * self.pointwise(f, y)).sum(axis=1)
        grads = self.chain(weights * self.pointwise_deriv(f, y), X)
        if prior_weight and self.prior is not None and self.prior.lam > 0:
            values = values - prior_weight * self.log_prior_batch(theta)
            grads = grads - prior_weight * self.log_prior_grad_batch(theta)
        return values, grads


def _check_label(model: LossModel, y):
    if model.kind == "hinge" and not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("hinge loss needs labels in {-1, +1}")


def _vec(param) -> np.ndarray:
    if isinstance(param, Parameter):
        return param.as_vector()
    return np.asarray(param, dtype=float)


def _X(data):
    return data.X, data.y


def loss(model: LossModel, param, x, y) -> float:
    """Loss of a single observation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = float(y)
    _check_label(model, y)
    theta = _vec(param)
    if theta.shape != (model.dim(x.size),):
        raise ValueError(f"parameter has shape {theta.shape}, expected ({model.dim(x.size)},)")
    f = model.predictor(theta, x[None, :])
    return float(model.pointwise(f, y)[0, 0])


def loss_subgrad(model: LossModel, param, x, y) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = float(y)
    _check_label(model, y)
    theta = _vec(param)
    f = model.predictor(theta, x[None, :])
    return model.chain(model.pointwise_deriv(f, y), x[None, :])[0]


def log_prior(prior: LaplacePrior, param, includes_intercept: bool = True) -> float:
    if isinstance(param, Parameter):
        includes_intercept = param.intercept is not None
    model = LossModel("lad", includes_intercept, prior)
    return float(model.log_prior_batch(_vec(param))[0])


def log_prior_subgrad(prior: LaplacePrior, param, includes_intercept: bool = True) -> np.ndarray:
    if isinstance(param, Parameter):
        includes_intercept = param.intercept is not None
    model = LossModel("lad", includes_intercept, prior)
    return model.log_prior_grad_batch(_vec(param))[0]


def gibbs_log_density_batch(model: LossModel, theta, X, y, alpha: float = 1.0) -> np.ndarray:
    f = model.predictor(theta, X)
    return model.log_prior_batch(theta) - alpha * model.pointwise(f, y).sum(axis=1)


def gibbs_log_density(model: LossModel, param, data, alpha: float = 1.0) -> float:
    """Unnormalized ``log pi(theta) - alpha * sum_i l(theta; x_i)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    X, y = _X(data)
    _check_label(model, y)
    return float(gibbs_log_density_batch(model, _vec(param), X, y, alpha)[0])


def weighted_objective(model: LossModel, param, data, weights, prior_weight: float = 1.0) -> float:
    """``sum_i w_i l(theta; x_i) - prior_weight * log pi(theta)``.

    ``weights`` is an expanded per-observation vector or a ``WeightVector``.
    """
    X, y = _X(data)
    w = getattr(weights, "expanded", weights)
    w = np.asarray(w, dtype=float)
    if w.shape != (X.shape[0],):
        raise ValueError(f"weights have shape {w.shape}, data has {X.shape[0]} rows")
    values, _ = model.weighted_value_grad(_vec(param), X, y, w, prior_weight)
    return float(values[0])
