"""Bootstrap weight draws: scaled Dirichlet vectors and subgroup expansion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DirichletSpec:
    concentration: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        conc = np.atleast_1d(np.asarray(self.concentration, dtype=float))
        if conc.ndim != 1 or conc.size == 0:
            raise ValueError("concentration must be a non-empty vector")
        if np.any(~(conc > 0)):
            raise ValueError("all Dirichlet concentrations must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "concentration", conc)


@dataclass(frozen=True)
class WeightVector:
    """Subgroup weights and their per-observation expansion.

    ``compact`` has shape ``(m,)`` or ``(K, m)``; ``expanded`` has shape
    ``(n_total,)`` or ``(K, n_total)`` and equals ``compact[..., group_map]``.
    """

    compact: np.ndarray
    expanded: np.ndarray
    group_map: np.ndarray

    def __post_init__(self):
        for arr in (self.compact, self.expanded, self.group_map):
            arr.setflags(write=False)


def draw_dirichlet(spec: DirichletSpec, rng: np.random.Generator, size: int | None = None):
    """``scale * g / sum(g)`` with ``g_i ~ Gamma(concentration_i, 1)``.

    numpy's gamma sampler is Marsaglia-Tsang, with the ``U**(1/shape)`` boost
    for shapes below one.
    """
    conc = spec.concentration
    shape = conc.shape if size is None else (size, conc.size)
    g = rng.standard_gamma(np.broadcast_to(conc, shape))
    total = g.sum(axis=-1, keepdims=True)
    return spec.scale * g / total


def make_groups(n: int, S: int, rng: np.random.Generator | None = None, offset: int = 0):
    """Assign ``n`` observations to ``S`` contiguous blocks.

    Blocks have ``n // S`` members and the last block absorbs the remainder.
    With ``rng`` the block structure is laid over a random permutation of the
    observation indices.
    """
    if S < 1:
        raise ValueError("need at least one subgroup")
    if S > n:
        raise ValueError(f"cannot split {n} observations into {S} subgroups")
    size = n // S
    blocks = np.minimum(np.arange(n) // size, S - 1)
    groups = np.empty(n, dtype=np.int64)
    order = np.arange(n) if rng is None else rng.permutation(n)
    groups[order] = blocks
    return groups + offset


def expand(compact: np.ndarray, group_map: np.ndarray) -> np.ndarray:
    return np.asarray(compact)[..., group_map]


def gibbs_weights(
    n: int,
    S: int,
    rng: np.random.Generator,
    size: int | None = None,
    group_map: np.ndarray | None = None,
) -> WeightVector:
    """``S x Dir(1, ..., 1)`` subgroup weights replicated over ``n`` observations."""
    if group_map is None:
        group_map = make_groups(n, S)
    elif group_map.shape != (n,) or group_map.max() >= S:
        raise ValueError("group_map does not match (n, S)")
    compact = draw_dirichlet(DirichletSpec(np.ones(S), scale=float(S)), rng, size)
    return WeightVector(compact, expand(compact, group_map), np.asarray(group_map))


def npl_concentration(S: int, S_prime: int, alpha: float, n_prime: int) -> np.ndarray:
    return np.concatenate([np.ones(S), np.full(S_prime, alpha / n_prime)])


def npl_group_map(n: int, n_prime: int, S: int, S_prime: int, rng=None) -> np.ndarray:
    observed = make_groups(n, S, rng)
    pseudo = make_groups(n_prime, S_prime, rng, offset=S)
    return np.concatenate([observed, pseudo])


def npl_weights(
    n: int,
    n_prime: int,
    S: int,
    S_prime: int,
    alpha: float,
    rng: np.random.Generator,
    size: int | None = None,
    group_map: np.ndarray | None = None,
) -> WeightVector:
    """Joint observed + pseudo-sample weights.

    The compact vector is ``(S + S') x Dir(1, ..., 1, alpha/n', ..., alpha/n')``.
    ``alpha == 0`` is the Bayesian-bootstrap limit: the pseudo block is
    identically zero and the observed block carries the full scale.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if group_map is None:
        group_map = npl_group_map(n, n_prime, S, S_prime)
    scale = float(S + S_prime)
    if alpha == 0:
        observed = draw_dirichlet(DirichletSpec(np.ones(S), scale), rng, size)
        pseudo = np.zeros(observed.shape[:-1] + (S_prime,))
        compact = np.concatenate([observed, pseudo], axis=-1)
    else:
        spec = DirichletSpec(npl_concentration(S, S_prime, alpha, n_prime), scale)
        compact = draw_dirichlet(spec, rng, size)
    return WeightVector(compact, expand(compact, group_map), np.asarray(group_map))


def full_bootstrap_weights(n: int, rng: np.random.Generator, size: int | None = None):
    """Per-observation ``n x Dir(1, ..., 1)`` weights (no subgrouping)."""
    return draw_dirichlet(DirichletSpec(np.ones(n), float(n)), rng, size)


def dump_csv(path, compact: np.ndarray) -> None:
    """Write compact weight draws, one row per draw."""
    compact = np.atleast_2d(compact)
    header = ",".join(f"w{j + 1}" for j in range(compact.shape[1]))
    np.savetxt(path, compact, delimiter=",", header=header, comments="", fmt="%.17g")
