"""Posterior summaries: credible intervals, predictive scores, 2-D densities, BIC."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import rankdata

from .data import Dataset, SampleBatch
from .losses import LossModel

DF_THRESHOLD = 1e-6


def _draws(batch) -> np.ndarray:
    return batch.draws if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def credible_interval(draws, level: float = 0.90):
    """Equal-tailed empirical interval per column."""
    a = (1.0 - level) / 2.0
    lo, hi = np.percentile(_draws(draws), [100 * a, 100 * (1 - a)], axis=0)
    return lo, hi


@dataclass
class IntervalReport:
    """Per-coordinate coverage, interval length and absolute bias, plus group means.

    ``active`` marks coordinates with a nonzero target; only coordinates in
    ``included`` enter the group averages.
    """

    coverage: np.ndarray
    length: np.ndarray
    bias: np.ndarray
    active: np.ndarray
    included: np.ndarray
    level: float = 0.90

    def _group(self, values, active: bool) -> float:
        sel = self.included & (self.active == active)
        return float(values[sel].mean()) if sel.any() else float("nan")

    def summary(self) -> dict:
        out = {}
        for name, values in (("coverage", self.coverage), ("length", self.length), ("bias", self.bias)):
            out[f"{name}+"] = self._group(values, True)
            out[f"{name}-"] = self._group(values, False)
        return out

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "coverage": self.coverage.tolist(),
            "length": self.length.tolist(),
            "bias": self.bias.tolist(),
            "active": self.active.tolist(),
            "included": self.included.tolist(),
            "summary": self.summary(),
        }


def interval_report(batch, theta0, active_mask, level: float = 0.90, included=None) -> IntervalReport:
    """Compare posterior draws with the target ``theta0``.

    ``included`` defaults to every coordinate except the intercept of a
    ``SampleBatch`` that has one.
    """
    draws = _draws(batch)
    theta0 = np.asarray(getattr(theta0, "as_vector", lambda: theta0)(), dtype=float)
    d = draws.shape[1]
    if theta0.shape != (d,):
        raise ValueError(f"theta0 has shape {theta0.shape}, draws have {d} columns")
    active = np.asarray(active_mask, dtype=bool)
    if included is None:
        included = np.ones(d, dtype=bool)
        if isinstance(batch, SampleBatch) and batch.has_intercept:
            included[0] = False
    lo, hi = credible_interval(draws, level)
    coverage = ((lo <= theta0) & (theta0 <= hi)).astype(float)
    return IntervalReport(coverage, hi - lo, np.abs(draws.mean(axis=0) - theta0), active,
                          np.asarray(included, dtype=bool), level)


@dataclass
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    pr_auc: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney form of the ROC area, ties counted one half."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(labels) > 0
    n_pos, n_neg = pos.sum(), (~pos).sum()
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision: recall-weighted precision over distinct score thresholds."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(labels) > 0
    if not pos.any():
        return float("nan")
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], pos[order]
    tp = np.cumsum(p)
    # evaluate only at the last index of each tied score block
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = tp[last]
    precision = tp / (last + 1)
    recall = tp / pos.sum()
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def vote_share(batch, X) -> np.ndarray:
    """Fraction of draws whose linear rule ``beta + x . theta`` is positive, per row of ``X``."""
    draws = _draws(batch)
    f = draws[:, :1] + draws[:, 1:] @ np.asarray(X, dtype=float).T
    return (f > 0).mean(axis=0)


def classification_report(batch, test: Dataset, score: str = "vote") -> ClassificationReport:
    """Majority-vote labels (ties go to +1) and AUCs from a continuous score.

    ``score`` is ``"vote"`` (share of draws voting +1) or ``"margin"``
    (margin of the posterior-mean rule).
    """
    draws = _draws(batch)
    y = test.y
    share = vote_share(draws, test.X)
    pred = np.where(share >= 0.5, 1.0, -1.0)
    if score == "vote":
        s = share
    elif score == "margin":
        m = draws.mean(axis=0)
        s = m[0] + test.X @ m[1:]
    else:
        raise ValueError(f"unknown score {score!r}")
    tp = np.sum((pred > 0) & (y > 0))
    fp = np.sum((pred > 0) & (y < 0))
    fn = np.sum((pred < 0) & (y > 0))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    flags = []
    if np.all(y > 0) or np.all(y < 0):
        flags.append("single-class test set: AUCs undefined")
    return ClassificationReport(float(np.mean(pred == y)), float(precision), float(recall), float(f1),
                                roc_auc(s, y), pr_auc(s, y), flags)


@dataclass
class KdeGrid:
    xs: np.ndarray
    ys: np.ndarray
    density: np.ndarray  # (len(ys), len(xs))
    bandwidth: tuple
    coords: tuple
    flags: list = field(default_factory=list)

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.density, self.xs, axis=1), self.ys))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "density"])
            for j, yv in enumerate(self.ys):
                for i, xv in enumerate(self.xs):
                    writer.writerow([repr(float(xv)), repr(float(yv)), repr(float(self.density[j, i]))])


def kde_2d(batch, coord_i: int, coord_j: int, grid=(100, 100), extent=None) -> KdeGrid:
    """Product Gaussian kernel density of two coordinates on a regular grid.

    Per-axis bandwidth by Scott's rule, ``h = sd * N**(-1/6)``. A zero-variance
    axis falls back to a unit bandwidth and is flagged.
    """
    draws = _draws(batch)
    N = draws.shape[0]
    if N < 30:
        raise ValueError("need at least 30 draws for a density estimate")
    pts = draws[:, [coord_i, coord_j]]
    flags = []
    h = pts.std(axis=0, ddof=1) * N ** (-1.0 / 6.0)
    for a in range(2):
        if not h[a] > 0:
            flags.append(f"zero variance on coordinate {(coord_i, coord_j)[a]}; unit bandwidth used")
            h[a] = 1.0
    if extent is None:
        lo = pts.min(axis=0) - 3 * h
        hi = pts.max(axis=0) + 3 * h
    else:
        lo = np.array([extent[0], extent[2]], dtype=float)
        hi = np.array([extent[1], extent[3]], dtype=float)
    nx, ny = (grid, grid) if np.isscalar(grid) else grid
    xs = np.linspace(lo[0], hi[0], nx)
    ys = np.linspace(lo[1], hi[1], ny)
    # separable kernel: density = Ky^T Kx / N
    kx = np.exp(-0.5 * ((xs[None, :] - pts[:, :1]) / h[0]) ** 2) / (np.sqrt(2 * np.pi) * h[0])
    ky = np.exp(-0.5 * ((ys[None, :] - pts[:, 1:]) / h[1]) ** 2) / (np.sqrt(2 * np.pi) * h[1])
    density = ky.T @ kx / N
    return KdeGrid(xs, ys, density, (float(h[0]), float(h[1])), (coord_i, coord_j), flags)


def lambda_grid(start: float = -6.0, stop: float = 1.0, num: int = 20) -> np.ndarray:
    return np.exp(np.linspace(start, stop, num))


@dataclass
class BicResult:
    lam: float
    lams: np.ndarray
    bic: np.ndarray
    df: np.ndarray
    thetas: np.ndarray


def bic_select_lambda(data: Dataset, loss_model: LossModel, lams=None, solver=None) -> BicResult:
    """Pick the penalty strength minimizing ``n log(mean |r|) + df log n``.

    For squared loss the mean squared residual replaces the mean absolute one.
    Ties go to the smallest ``lambda``.
    """
    from .exact import SolverConfig, solve_batch

    lams = lambda_grid() if lams is None else np.asarray(lams, dtype=float)
    solver = solver or SolverConfig()
    n = data.n
    W = np.ones((lams.size, n))
    res = solve_batch(loss_model, data.X, data.y, W, solver, lam=lams)
    thetas = res.theta
    f = loss_model.with_prior(None).predictor(thetas, data.X)
    r = data.y[None, :] - f
    spread = np.mean(np.abs(r), axis=1) if loss_model.kind != "squared" else np.mean(r * r, axis=1)
    mask = loss_model.coef_mask(thetas.shape[1])
    df = np.sum(np.abs(thetas[:, mask]) > DF_THRESHOLD, axis=1)
    with np.errstate(divide="ignore"):
        bic = n * np.log(spread) + df * np.log(n)
    if not np.any(np.isfinite(bic)):
        raise ValueError("every fit on the lambda grid is degenerate")
    bic = np.where(np.isfinite(bic), bic, np.inf)
    best = int(np.flatnonzero(bic == bic.min())[0])
    return BicResult(float(lams[best]), lams, bic, df, thetas)


def write_report_rows(path, rows) -> None:
    """Flat ``(method, setting, metric, value)`` CSV."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "setting", "metric", "value"])
        for r in rows:
            writer.writerow([r["method"], r["setting"], r["metric"], repr(float(r["value"]))])


def report_rows(method: str, setting: str, report) -> list[dict]:
    values = report.summary() if isinstance(report, IntervalReport) else {
        k: v for k, v in report.to_dict().items() if k != "flags"}
    return [{"method": method, "setting": setting, "metric": k, "value": v} for k, v in values.items()]


def write_json(path, report) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2))
