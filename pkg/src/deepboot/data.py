"""Datasets and posterior sample batches, with their CSV formats."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

METHODS = ("DBS", "WLB", "MCMC")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(f"bad shapes X={self.X.shape} y={self.y.shape}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("data contain non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], dict(self.meta))

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]), dict(self.meta))

    def to_csv(self, path) -> None:
        """One JSON provenance line, then a header row, then ``y,x1..xp`` rows."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(json.dumps(self.meta, sort_keys=True, default=_jsonable) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["y", *(f"x{j + 1}" for j in range(self.p))])
            for yi, xi in zip(self.y, self.X):
                writer.writerow([repr(float(yi)), *(repr(float(v)) for v in xi)])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with Path(path).open() as fh:
            meta = json.loads(fh.readline())
            rows = list(csv.reader(fh))
        body = np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))
        return cls(body[:, 1:], body[:, 0], meta)


@dataclass
class SampleBatch:
    """``N`` posterior draws stored as rows ``(beta, theta_1..theta_p)``.

    Models without an intercept store ``theta`` only. Times are in seconds;
    ``train_seconds`` is zero for methods without a training stage.
    """

    draws: np.ndarray
    method: str
    train_seconds: float = 0.0
    sample_seconds: float = 0.0
    has_intercept: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.draws.shape[0] < 1:
            raise ValueError("a batch needs at least one draw")
        if not np.all(np.isfinite(self.draws)):
            raise ValueError("non-finite posterior draw")

    @property
    def N(self) -> int:
        return self.draws.shape[0]

    @property
    def total_seconds(self) -> float:
        return self.train_seconds + self.sample_seconds

    def column_names(self) -> list[str]:
        d = self.draws.shape[1]
        if self.has_intercept:
            return ["beta", *(f"theta{j}" for j in range(1, d))]
        return [f"theta{j}" for j in range(1, d + 1)]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", *self.column_names()])
            for row in self.draws:
                writer.writerow([self.method, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "SampleBatch":
        with Path(path).open() as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        method = body[0][0]
        draws = np.array([r[1:] for r in body], dtype=float)
        return cls(draws, method, has_intercept=header[1] == "beta")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return str(obj)
