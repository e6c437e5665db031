import numpy as np
import pytest

from deepboot.data import Dataset
from deepboot.datagen import LadDesign, gen_lad
from deepboot.dbs import (
    DbsConfig,
    TrainedSampler,
    TrainingDiverged,
    effective_subgroups,
    has_stabilized,
    sample,
    smoothed,
    train_gibbs,
    train_npl,
    write_trace,
)
from deepboot.exact import SolverConfig, npl_sample, solve_weighted
from deepboot.losses import LossModel

SMALL = dict(hidden_widths=[16, 16], mc_draws=20)


def test_single_datum_collapses_to_minimizer():
    data = Dataset(np.ones((1, 1)), np.zeros(1))
    model = LossModel("squared", False, None)
    cfg = DbsConfig(epochs=1500, base_lr=3e-3, **SMALL)
    s = train_gibbs(data, model, cfg, np.random.default_rng(0))
    draws = sample(s, 1000, np.random.default_rng(1)).draws
    assert s.S == 1
    assert np.mean(np.abs(draws)) < 0.05


def test_training_is_reproducible():
    data = gen_lad(LadDesign(n=40, p=3, seed=2))
    cfg = DbsConfig(epochs=30, **SMALL)
    a = train_gibbs(data, LossModel.lad(), cfg, np.random.default_rng(3))
    b = train_gibbs(data, LossModel.lad(), cfg, np.random.default_rng(3))
    assert np.array_equal(a.net.params, b.net.params)
    assert np.array_equal(a.trace, b.trace)


def test_subgroups_capped_at_n():
    assert effective_subgroups(40, 100) == 40
    assert effective_subgroups(500, 100) == 100
    data = gen_lad(LadDesign(n=40, p=3, seed=4))
    s = train_gibbs(data, LossModel.lad(), DbsConfig(epochs=2, **SMALL), np.random.default_rng(5))
    assert s.net.input_dim == 40


def test_objective_decreases():
    data = gen_lad(LadDesign(n=100, p=3, seed=6))
    s = train_gibbs(data, LossModel.lad(), DbsConfig(epochs=600, base_lr=3e-3, **SMALL),
                    np.random.default_rng(7))
    best = solve_weighted(data, LossModel.lad(), np.ones(100)).objective
    sm = smoothed(s.trace, 50)
    assert sm[-1] < sm[0] - 0.8 * (sm[0] - best)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    data = Dataset(np.ones((3, 1)), np.full(3, 1e200))
    with pytest.raises(TrainingDiverged) as info:
        train_gibbs(data, LossModel("squared", True, None), DbsConfig(epochs=5, **SMALL),
                    np.random.default_rng(8))
    assert info.value.epoch == 1


def test_sampling_is_cheap_compared_to_training():
    data = gen_lad(LadDesign(n=100, p=3, seed=9))
    s = train_gibbs(data, LossModel.lad(), DbsConfig(epochs=300, **SMALL), np.random.default_rng(10))
    batch = sample(s, 10_000, np.random.default_rng(11))
    assert batch.draws.shape == (10_000, 4)
    assert batch.method == "DBS" and batch.has_intercept
    assert batch.sample_seconds < s.train_seconds


def test_checkpoint_round_trip(tmp_path):
    data = gen_lad(LadDesign(n=30, p=3, seed=12))
    s = train_gibbs(data, LossModel.lad(), DbsConfig(epochs=10, **SMALL), np.random.default_rng(13))
    s.save(tmp_path / "ck.json")
    t = TrainedSampler.load(tmp_path / "ck.json")
    a = sample(s, 50, np.random.default_rng(14)).draws
    b = sample(t, 50, np.random.default_rng(14)).draws
    assert np.array_equal(a, b)
    assert t.scheme == "gibbs" and t.cfg == s.cfg


def test_zero_concentration_matches_bayesian_bootstrap():
    data = gen_lad(LadDesign(n=60, p=3, seed=15))
    model = LossModel.lad()
    pseudo = gen_lad(LadDesign(n=10, p=3, seed=16))
    cfg = DbsConfig(epochs=2500, alpha=0.0, subgroups=60, base_lr=3e-3, hidden_widths=[32, 32],
                    mc_draws=50)
    s = train_npl(data, pseudo, model, cfg, np.random.default_rng(17))
    dbs = sample(s, 2000, np.random.default_rng(18)).draws
    ref = npl_sample(data, None, 0.0, 0, 300, model, SolverConfig(max_epochs=3000),
                     np.random.default_rng(19)).draws
    se = np.sqrt(ref.var(axis=0) / len(ref) + dbs.var(axis=0) / len(dbs))
    assert np.all(np.abs(dbs.mean(axis=0) - ref.mean(axis=0)) < 3 * se + 0.02)


class TestStabilization:
    def test_converged_trace(self):
        t = np.arange(3000)
        trace = 1 + 5 * np.exp(-t / 200) + 0.01 * np.random.default_rng(20).standard_normal(3000)
        assert has_stabilized(trace)

    def test_still_falling(self):
        assert not has_stabilized(np.linspace(10, 1, 3000))

    def test_too_short(self):
        assert not has_stabilized(np.ones(300))

    def test_moving_average(self):
        assert np.allclose(smoothed(np.arange(5.0), 2), [0.5, 1.5, 2.5, 3.5])


def test_trace_file(tmp_path):
    write_trace(tmp_path / "t.csv", np.array([3.0, 2.5]))
    assert (tmp_path / "t.csv").read_text().splitlines() == ["epoch,objective", "1,3.0", "2,2.5"]


def test_config_validation():
    with pytest.raises(ValueError):
        DbsConfig(epochs=0)
    with pytest.raises(ValueError):
        DbsConfig(alpha=-1)
