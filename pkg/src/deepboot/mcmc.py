"""Random-walk Metropolis-Hastings for Gibbs posteriors, plus chain diagnostics."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, SampleBatch
from .losses import LossModel, gibbs_log_density_batch


@dataclass
class McmcConfig:
    iterations: int = 1_000_000
    burn_in: int = 10_000
    proposal_sd: float | None = None  # None: 0.1 when p <= 10, else 0.01
    chains: int = 4
    init: list | None = None  # None: penalized optimum from the exact solver
    stall_window: int = 10_000
    block: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.proposal_sd is not None and not self.proposal_sd > 0:
            raise ValueError("proposal_sd must be positive")
        if self.chains < 1:
            raise ValueError("need at least one chain")

    def sd_for(self, p: int) -> float:
        if self.proposal_sd is not None:
            return float(self.proposal_sd)
        return 0.1 if p <= 10 else 0.01


@dataclass
class ChainSummary:
    acceptance_rate: float
    ess_per_coordinate: np.ndarray
    split_rhat: np.ndarray
    seconds: float
    retained: int
    flags: list = field(default_factory=list)

    @property
    def min_ess(self) -> float:
        return float(np.min(self.ess_per_coordinate))

    @property
    def seconds_per_10k_ess(self) -> float:
        """Wall-clock cost of 10 000 effective samples, using the smallest ESS."""
        return self.seconds * 1e4 / self.min_ess

    def to_json(self, path) -> None:
        doc = {
            "acceptance_rate": self.acceptance_rate,
            "ess": [float(v) for v in self.ess_per_coordinate],
            "split_rhat": [None if not np.isfinite(v) else float(v) for v in self.split_rhat],
            "seconds": self.seconds,
            "seconds_per_10k_ess": self.seconds_per_10k_ess,
            "retained": self.retained,
            "flags": self.flags,
        }
        Path(path).write_text(json.dumps(doc, indent=2))


class StalledChain(RuntimeError):
    pass


def accept_prob(delta: float | np.ndarray):
    """``min(1, exp(delta))`` computed without overflow."""
    return np.exp(np.minimum(0.0, delta))


def metropolis(log_density, propose, init, n_steps: int, rng: np.random.Generator, burn_in: int = 0):
    """Generic single-chain Metropolis sampler with a symmetric proposal.

    ``propose(rng, x)`` returns a candidate; ``log_density(x)`` may be
    unnormalized. Returns ``(retained states, acceptance rate)``.
    """
    x = init
    lx = log_density(x)
    if not np.isfinite(lx):
        raise ValueError("log-density is not finite at the initial state")
    out = []
    accepted = 0
    log_u = np.log(rng.random(n_steps))
    for t in range(n_steps):
        cand = propose(rng, x)
        lc = log_density(cand)
        if log_u[t] < lc - lx:
            x, lx = cand, lc
            accepted += 1
        if t >= burn_in:
            out.append(x)
    return out, accepted / n_steps


def _initial_point(data: Dataset, loss_model: LossModel, cfg: McmcConfig):
    if cfg.init is not None:
        return np.asarray(cfg.init, dtype=float)
    from .exact import SolverConfig, solve_weighted

    sol = solve_weighted(data, loss_model, np.ones(data.n), SolverConfig(seed=cfg.seed))
    return sol.theta


def mh_run(data: Dataset, loss_model: LossModel, alpha: float = 1.0, cfg: McmcConfig | None = None,
           rng: np.random.Generator | None = None, keep_chains: bool = False):
    """Sample ``exp(log prior - alpha * sum loss)`` with Gaussian random-walk proposals.

    All chains start at the same point and advance in lockstep, which keeps
    the per-step Python overhead shared. Returns ``(SampleBatch, ChainSummary)``
    and, with ``keep_chains``, the ``(chains, retained, d)`` array as well.
    """
    cfg = cfg or McmcConfig()
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    start = time.perf_counter()
    X, y = data.X, data.y
    theta0 = _initial_point(data, loss_model, cfg)
    C, d = cfg.chains, theta0.size
    sd = cfg.sd_for(data.p)
    cur = np.tile(theta0, (C, 1))
    lcur = gibbs_log_density_batch(loss_model, cur, X, y, alpha)
    if not np.all(np.isfinite(lcur)):
        raise ValueError("Gibbs log-density is not finite at the initial point")
    keep = cfg.iterations - cfg.burn_in
    chains = np.empty((C, keep, d))
    accepted = np.zeros(C, dtype=np.int64)
    post_accepted = np.zeros(C, dtype=np.int64)
    t = 0
    while t < cfg.iterations:
        m = min(cfg.block, cfg.iterations - t)
        steps = sd * rng.standard_normal((m, C, d))
        log_u = np.log(rng.random((m, C)))
        for s in range(m):
            cand = cur + steps[s]
            lc = gibbs_log_density_batch(loss_model, cand, X, y, alpha)
            acc = log_u[s] < lc - lcur
            cur = np.where(acc[:, None], cand, cur)
            lcur = np.where(acc, lc, lcur)
            accepted += acc
            i = t + s - cfg.burn_in
            if i >= 0:
                chains[:, i] = cur
                post_accepted += acc
                if i + 1 == cfg.stall_window and np.any(post_accepted == 0):
                    raise StalledChain(
                        f"no proposal accepted in the first {cfg.stall_window} retained steps;"
                        f" reduce proposal_sd (currently {sd})"
                    )
        t += m
    elapsed = time.perf_counter() - start
    ess = np.zeros(d)
    flags = []
    for j in range(d):
        for c in range(C):
            e, degenerate = effective_sample_size(chains[c, :, j], return_flag=True)
            ess[j] += e
            if degenerate:
                flags.append(f"constant chain {c} coordinate {j}")
    if C >= 2 and keep >= 4:
        rhat, rflags = split_rhat(chains, return_flags=True)
        flags += [f"zero within-chain variance coordinate {j}" for j in np.flatnonzero(rflags)]
    else:
        rhat = np.full(d, np.nan)
    summary = ChainSummary(float(accepted.sum() / (C * cfg.iterations)), ess, rhat, elapsed,
                           C * keep, flags)
    batch = SampleBatch(chains.reshape(C * keep, d), "MCMC", 0.0, elapsed,
                        loss_model.includes_intercept, meta={"proposal_sd": sd})
    if keep_chains:
        return batch, summary, chains
    return batch, summary


def _autocorr(x: np.ndarray, lags: np.ndarray, var: float) -> np.ndarray:
    n = x.size
    return np.array([x[: n - k] @ x[k:] for k in lags]) / (n * var)


def effective_sample_size(chain, max_lag: int = 10_000, return_flag: bool = False):
    """``N / (1 + 2 sum rho_k)`` with Geyer's initial positive sequence truncation.

    Autocorrelations are direct sums, computed a block of lags at a time until
    the first negative pair sum. The result is capped at ``N``. A constant
    chain has ESS 1 and is flagged.
    """
    x = np.asarray(chain, dtype=float)
    N = x.size
    if N < 10:
        raise ValueError("chain needs at least 10 draws")
    x = x - x.mean()
    var = x @ x / N
    if var <= 0 or not np.isfinite(var):
        return (1.0, True) if return_flag else 1.0
    max_lag = min(N - 1, max_lag)
    tau = -1.0  # -rho_0 + 2 * sum of pair sums
    k = 0
    block = 64
    done = False
    while not done and k + 1 <= max_lag:
        lags = np.arange(k, min(k + block, max_lag + 1))
        if lags.size % 2:
            lags = lags[:-1]
            if lags.size == 0:
                break
        rho = _autocorr(x, lags, var)
        pairs = rho[0::2] + rho[1::2]
        neg = np.flatnonzero(pairs < 0)
        if neg.size:
            pairs = pairs[: neg[0]]
            done = True
        tau += 2.0 * pairs.sum()
        k = lags[-1] + 1
        block *= 2
    ess = min(float(N), N / max(tau, 1e-12))
    return (ess, False) if return_flag else ess


def split_rhat(chains, return_flags: bool = False):
    """Split-chain potential scale reduction per coordinate.

    ``chains`` has shape ``(C, N)`` or ``(C, N, d)`` with ``C >= 2``. Each
    chain is cut in half; coordinates with zero within-chain variance give NaN
    and are flagged.
    """
    a = np.asarray(chains, dtype=float)
    if a.ndim < 2 or a.shape[0] < 2:
        raise ValueError("split R-hat needs at least two chains")
    if a.ndim == 2:
        a = a[..., None]
    C, N, d = a.shape
    if N < 4:
        raise ValueError("chains need at least 4 retained draws")
    half = N // 2
    parts = np.concatenate([a[:, :half], a[:, N - half:]], axis=0)
    n = half
    means = parts.mean(axis=1)
    W = parts.var(axis=1, ddof=1).mean(axis=0)
    B = n * means.var(axis=0, ddof=1)
    flags = W <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        var_plus = (n - 1) / n * W + B / n
        rhat = np.where(flags, np.nan, np.sqrt(var_plus / np.where(flags, 1.0, W)))
    if return_flags:
        return rhat, flags
    return rhat


def write_chain_csv(path, chains: np.ndarray, has_intercept: bool = True, burn_in: int = 0) -> None:
    """Rows ``(chain, iteration, beta, theta1..)``; iterations count from the start of the run."""
    C, N, d = chains.shape
    names = ["beta", *(f"theta{j}" for j in range(1, d))] if has_intercept else [
        f"theta{j}" for j in range(1, d + 1)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "iteration", *names])
        for c in range(C):
            for i in range(N):
                writer.writerow([c, burn_in + i + 1, *(repr(float(v)) for v in chains[c, i])])
