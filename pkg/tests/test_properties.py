"""Randomized invariants over weights, losses, summaries and seeding."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from deepboot.data import Dataset
from deepboot.exact import SolverConfig, solve_batch
from deepboot.experiments import replication_seed
from deepboot.losses import LaplacePrior, LossModel
from deepboot.metrics import credible_interval, interval_report, pr_auc, roc_auc
from deepboot.ndnet import GeneratorNetwork, forward_batch
from deepboot.weights import gibbs_weights, make_groups, npl_weights

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@FAST
@given(n=st.integers(1, 200), S=st.integers(1, 200), seed=st.integers(0, 2**31))
def test_gibbs_weights_sum_to_n(n, S, seed):
    S = min(S, n)
    wv = gibbs_weights(n, S, np.random.default_rng(seed), size=3)
    assert wv.expanded.shape == (3, n)
    assert np.all(wv.expanded >= 0)
    assert np.allclose(wv.compact.sum(axis=1), S)
    assert np.array_equal(wv.expanded, wv.compact[:, wv.group_map])


@FAST
@given(n=st.integers(1, 120), S=st.integers(1, 120), seed=st.integers(0, 2**31))
def test_groups_partition_rows(n, S, seed):
    S = min(S, n)
    gm = make_groups(n, S, np.random.default_rng(seed))
    counts = np.bincount(gm, minlength=S)
    assert counts.sum() == n
    assert np.all(counts[:-1] == n // S) and counts[-1] == n - (S - 1) * (n // S)


@FAST
@given(n=st.integers(2, 80), n_prime=st.integers(1, 80), alpha=st.floats(0.01, 50),
       seed=st.integers(0, 2**31))
def test_npl_weights_total(n, n_prime, alpha, seed):
    S, Sp = min(10, n), min(5, n_prime)
    wv = npl_weights(n, n_prime, S, Sp, alpha, np.random.default_rng(seed), size=2)
    assert wv.expanded.shape == (2, n + n_prime)
    assert np.all(np.isfinite(wv.expanded)) and np.all(wv.expanded >= 0)
    assert np.allclose(wv.compact.sum(axis=1), S + Sp)
    assert np.array_equal(wv.expanded, wv.compact[:, wv.group_map])


@FAST
@given(theta=arrays(float, (4, 3), elements=finite), seed=st.integers(0, 2**31),
       kind=st.sampled_from(["lad", "hinge", "squared"]))
def test_losses_nonnegative_and_additive(theta, seed, kind):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((6, 2))
    y = np.sign(rng.standard_normal(6)) if kind == "hinge" else rng.standard_normal(6)
    model = LossModel(kind, True, None)
    w1, w2 = rng.random((2, 4, 6))
    v1, g1 = model.weighted_value_grad(theta, X, y, w1, 0.0)
    v2, g2 = model.weighted_value_grad(theta, X, y, w2, 0.0)
    v12, g12 = model.weighted_value_grad(theta, X, y, w1 + w2, 0.0)
    assert np.all(v1 >= 0)
    assert np.allclose(v12, v1 + v2, rtol=1e-9, atol=1e-6)
    assert np.allclose(g12, g1 + g2, rtol=1e-9, atol=1e-6)


@FAST
@given(theta=arrays(float, (3, 4), elements=finite), lam=st.floats(0.01, 10))
def test_prior_term_is_the_l1_norm(theta, lam):
    rng = np.random.default_rng(0)
    X, y = rng.standard_normal((5, 3)), rng.standard_normal(5)
    w = np.ones((3, 5))
    plain, _ = LossModel.lad().weighted_value_grad(theta, X, y, w, 0.0)
    pen, _ = LossModel.lad(LaplacePrior(lam)).weighted_value_grad(theta, X, y, w, 1.0)
    extra = pen - plain
    assert np.allclose(extra - extra[0], lam * (np.abs(theta[:, 1:]).sum(axis=1)
                                                 - np.abs(theta[0, 1:]).sum()), atol=1e-6)


@FAST
@given(draws=arrays(float, st.tuples(st.integers(2, 60), st.integers(1, 4)), elements=finite),
       shift=finite, scale=st.floats(0.1, 10))
def test_interval_affine_equivariance(draws, shift, scale):
    lo, hi = credible_interval(draws)
    lo2, hi2 = credible_interval(scale * draws + shift)
    assert np.allclose(lo2, scale * lo + shift, atol=1e-6)
    assert np.allclose(hi2, scale * hi + shift, atol=1e-6)
    assert np.all(hi >= lo)


@FAST
@given(draws=arrays(float, st.tuples(st.integers(2, 40), st.just(3)), elements=finite),
       theta0=arrays(float, 3, elements=finite))
def test_report_quantities_are_bounded(draws, theta0):
    rep = interval_report(draws, theta0, theta0 != 0, included=[True] * 3)
    assert set(np.unique(rep.coverage)) <= {0.0, 1.0}
    assert np.all(rep.length >= 0) and np.all(rep.bias >= 0)


@FAST
@given(scores=arrays(float, 30, elements=st.floats(-5, 5)),
       labels=arrays(bool, 30))
def test_auc_ranges_and_symmetry(scores, labels):
    y = np.where(labels, 1.0, -1.0)
    if labels.all() or not labels.any():
        return
    a = roc_auc(scores, y)
    assert 0 <= a <= 1
    assert np.isclose(roc_auc(-scores, y), 1 - a)
    assert np.isclose(roc_auc(scores, -y), 1 - a)
    assert 0 < pr_auc(scores, y) <= 1


@FAST
@given(perm_seed=st.integers(0, 2**31), seed=st.integers(0, 2**31))
def test_solver_ignores_row_order(perm_seed, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.standard_normal((12, 2)), rng.standard_normal(12)
    W = rng.random((2, 12))
    perm = np.random.default_rng(perm_seed).permutation(12)
    cfg = SolverConfig(max_epochs=300)
    a = solve_batch(LossModel.lad(), X, y, W, cfg)
    b = solve_batch(LossModel.lad(), X[perm], y[perm], W[:, perm], cfg)
    assert np.allclose(a.objective, b.objective, rtol=1e-6, atol=1e-8)


@FAST
@given(master=st.integers(0, 2**32 - 1), rep=st.integers(0, 10_000))
def test_stream_seeds_are_distinct_and_stable(master, rep):
    seeds = [replication_seed(master, rep, m) for m in ("data", "DBS", "WLB", "MCMC", "aux")]
    assert len(set(seeds)) == 5
    assert seeds == [replication_seed(master, rep, m) for m in ("data", "DBS", "WLB", "MCMC", "aux")]


@FAST
@given(seed=st.integers(0, 2**31), rows=st.integers(1, 20))
def test_forward_rows_are_independent(seed, rows):
    rng = np.random.default_rng(seed)
    net = GeneratorNetwork(4, [5, 3], 2).initialize(rng)
    W = rng.random((rows, 4))
    full = forward_batch(net, W)
    assert np.allclose(full[-1], forward_batch(net, W[-1:])[0])


def test_dataset_rejects_nonfinite():
    try:
        Dataset(np.array([[np.nan]]), np.zeros(1))
    except ValueError:
        return
    raise AssertionError("non-finite design accepted")
