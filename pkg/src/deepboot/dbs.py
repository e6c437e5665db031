"""Training and sampling for the deep bootstrap sampler.

A generator network ``G`` is trained so that ``G(w)`` minimizes the
``w``-weighted loss for every bootstrap weight vector ``w``. Afterwards each
posterior draw costs one forward pass. Two weight schemes are supported:
subgroup Gibbs weights (loss plus Laplace log-prior) and the nonparametric
learning scheme where pseudo samples from the prior's centering measure are
appended to the data and carry the prior.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, SampleBatch
from .losses import LossModel
from .ndnet import (
    GeneratorNetwork,
    RmspropState,
    backward_batch,
    forward_batch,
    load_checkpoint,
    rmsprop_step,
    save_checkpoint,
)
from .weights import gibbs_weights, make_groups, npl_group_map, npl_weights

SCHEMES = ("gibbs", "npl")


@dataclass
class DbsConfig:
    epochs: int = 4000
    mc_draws: int = 100
    subgroups: int = 100
    pseudo_subgroups: int = 10
    alpha: float = 1.0
    n_prime: int | None = None
    base_lr: float = 3e-4
    lr_decay_exponent: float = 0.3
    hidden_widths: list = field(default_factory=lambda: [128, 128, 128])
    activation: str = "relu"
    decay: float = 0.99
    epsilon: float = 1e-8
    shuffle_groups: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "mc_draws", "subgroups", "pseudo_subgroups"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.hidden_widths = [int(v) for v in self.hidden_widths]


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch, draw, value):
        super().__init__(f"non-finite objective {value} at epoch {epoch}, draw {draw}")
        self.epoch = epoch
        self.draw = draw


@dataclass
class TrainedSampler:
    """A trained generator together with everything needed to draw from it."""

    net: GeneratorNetwork
    scheme: str
    loss_model: LossModel
    cfg: DbsConfig
    n: int
    S: int
    S_prime: int = 0
    n_prime: int = 0
    group_map: np.ndarray | None = None
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    train_seconds: float = 0.0
    state: RmspropState | None = None
    pseudo: Dataset | None = None

    def draw_weights(self, rng: np.random.Generator, size: int):
        """Weight vectors from the training distribution, shape ``(size, input_dim)``."""
        if self.scheme == "gibbs":
            return gibbs_weights(self.n, self.S, rng, size=size, group_map=self.group_map)
        return npl_weights(self.n, self.n_prime, self.S, self.S_prime, self.cfg.alpha, rng,
                           size=size, group_map=self.group_map)

    def save(self, path) -> None:
        extra = {
            "scheme": self.scheme,
            "loss": self.loss_model.kind,
            "lam": self.loss_model.prior.lam if self.loss_model.prior else None,
            "n": self.n,
            "S": self.S,
            "S_prime": self.S_prime,
            "n_prime": self.n_prime,
            "group_map": None if self.group_map is None else self.group_map.tolist(),
            "train_seconds": self.train_seconds,
            "config": asdict(self.cfg),
        }
        save_checkpoint(path, self.net, self.state, extra)

    @classmethod
    def load(cls, path) -> "TrainedSampler":
        from .losses import LaplacePrior

        net, state, extra = load_checkpoint(path)
        lam = extra.get("lam")
        model = LossModel(extra["loss"], extra["loss"] != "squared",
                          None if lam is None else LaplacePrior(lam))
        gm = extra.get("group_map")
        return cls(
            net=net,
            scheme=extra["scheme"],
            loss_model=model,
            cfg=DbsConfig(**extra["config"]),
            n=extra["n"],
            S=extra["S"],
            S_prime=extra["S_prime"],
            n_prime=extra["n_prime"],
            group_map=None if gm is None else np.asarray(gm, dtype=np.int64),
            train_seconds=extra.get("train_seconds", 0.0),
            state=state,
        )


def _fit(sampler: TrainedSampler, X, y, model: LossModel, rng, prior_weight, callback=None):
    cfg = sampler.cfg
    net = sampler.net
    state = RmspropState.for_params(net.param_count, decay=cfg.decay, epsilon=cfg.epsilon,
                                    base_lr=cfg.base_lr, lr_decay_exponent=cfg.lr_decay_exponent)
    K = cfg.mc_draws
    trace = np.empty(cfg.epochs)
    for epoch in range(1, cfg.epochs + 1):
        wv = sampler.draw_weights(rng, K)
        out, cache = forward_batch(net, wv.compact, return_cache=True)
        values, g_out = model.weighted_value_grad(out, X, y, wv.expanded, prior_weight)
        if not np.all(np.isfinite(values)):
            k = int(np.argmax(~np.isfinite(values)))
            raise TrainingDiverged(epoch, k, values[k])
        trace[epoch - 1] = values.mean()
        grad = backward_batch(net, wv.compact, g_out / K, cache)
        net.params, state = rmsprop_step(state, net.params, grad)
        if callback is not None:
            callback(epoch, trace[epoch - 1])
    sampler.trace = trace
    sampler.state = state
    return sampler


def _new_net(cfg: DbsConfig, input_dim: int, output_dim: int, rng) -> GeneratorNetwork:
    net = GeneratorNetwork(input_dim, list(cfg.hidden_widths), output_dim, cfg.activation)
    return net.initialize(rng)


def effective_subgroups(n: int, S: int) -> int:
    """Subgroup count actually used: at most one subgroup per observation."""
    return min(int(S), int(n))


def train_gibbs(data: Dataset, loss_model: LossModel, cfg: DbsConfig | None = None,
                rng: np.random.Generator | None = None, callback=None) -> TrainedSampler:
    """Fit ``G`` to the subgroup-weighted loss plus ``-log prior``, averaged over ``K`` draws."""
    cfg = cfg or DbsConfig()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    start = time.perf_counter()
    S = effective_subgroups(data.n, cfg.subgroups)
    group_map = make_groups(data.n, S, rng if cfg.shuffle_groups else None)
    net = _new_net(cfg, S, loss_model.dim(data.p), rng)
    sampler = TrainedSampler(net, "gibbs", loss_model, cfg, data.n, S, group_map=group_map)
    _fit(sampler, data.X, data.y, loss_model, rng, prior_weight=1.0, callback=callback)
    sampler.train_seconds = time.perf_counter() - start
    return sampler


def train_npl(data: Dataset, pseudo: Dataset, loss_model: LossModel, cfg: DbsConfig | None = None,
              rng: np.random.Generator | None = None, callback=None) -> TrainedSampler:
    """Fit ``G`` on observed plus pseudo samples under joint Dirichlet weights.

    ``pseudo`` is drawn once, before training. No log-prior term is used.
    """
    cfg = cfg or DbsConfig()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    start = time.perf_counter()
    n_prime = pseudo.n
    if cfg.n_prime is not None and cfg.n_prime != n_prime:
        raise ValueError(f"config asks for n_prime={cfg.n_prime}, got {n_prime} pseudo samples")
    S = effective_subgroups(data.n, cfg.subgroups)
    S_prime = effective_subgroups(n_prime, cfg.pseudo_subgroups)
    group_map = npl_group_map(data.n, n_prime, S, S_prime, rng if cfg.shuffle_groups else None)
    model = loss_model.with_prior(None)
    net = _new_net(cfg, S + S_prime, model.dim(data.p), rng)
    sampler = TrainedSampler(net, "npl", model, cfg, data.n, S, S_prime, n_prime,
                             group_map=group_map, pseudo=pseudo)
    both = data.concat(pseudo)
    _fit(sampler, both.X, both.y, model, rng, prior_weight=0.0, callback=callback)
    sampler.train_seconds = time.perf_counter() - start
    return sampler


def sample(sampler: TrainedSampler, N: int, rng: np.random.Generator | None = None,
           chunk: int = 10_000) -> SampleBatch:
    """``N`` iid draws ``G(w)`` with fresh weights from the training distribution."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    start = time.perf_counter()
    out = []
    for a in range(0, N, chunk):
        wv = sampler.draw_weights(rng, min(chunk, N - a))
        out.append(forward_batch(sampler.net, wv.compact))
    elapsed = time.perf_counter() - start
    return SampleBatch(np.vstack(out), "DBS", sampler.train_seconds, elapsed,
                       sampler.loss_model.includes_intercept, meta={"scheme": sampler.scheme})


def smoothed(trace: np.ndarray, window: int = 100) -> np.ndarray:
    """Trailing moving average used for the convergence heuristic."""
    trace = np.asarray(trace, dtype=float)
    if trace.size < window:
        return trace.copy()
    c = np.cumsum(np.concatenate([[0.0], trace]))
    return (c[window:] - c[:-window]) / window


def has_stabilized(trace: np.ndarray, tail: int = 500, window: int = 100, frac: float = 0.01) -> bool:
    """True when the smoothed trace's drift over the last ``tail`` epochs is below
    ``frac`` of its total initial drop."""
    s = smoothed(trace, window)
    if s.size <= tail:
        return False
    drop = s[0] - s.min()
    if drop <= 0:
        return True
    slope = np.polyfit(np.arange(tail), s[-tail:], 1)[0]
    return abs(slope * tail) < frac * drop


def write_trace(path, trace: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "objective"])
        for i, v in enumerate(trace, start=1):
            writer.writerow([i, repr(float(v))])
