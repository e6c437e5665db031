import numpy as np
import pytest
from scipy import stats

from deepboot.data import Dataset
from deepboot.datagen import (
    LadDesign,
    LassoDesign,
    SvmDesign,
    TargetSpec,
    equicorrelation,
    gen_lad,
    gen_lasso,
    gen_svm,
    population_target,
    toeplitz_cov,
)
from deepboot.losses import LossModel


class TestSvm:
    def test_independent_noise(self):
        d = SvmDesign(n=10_000, p=5, rho=0.0, seed=0)
        train, test = gen_svm(d)
        z = train.X - train.y[:, None]
        c = np.corrcoef(z.T)
        assert np.max(np.abs(c[np.triu_indices(5, 1)])) < 0.05
        assert test.n == 100

    def test_equicorrelation(self):
        train, _ = gen_svm(SvmDesign(n=10_000, p=10, rho=0.6, seed=1))
        c = np.corrcoef((train.X - train.y[:, None]).T)
        assert np.all(np.abs(c[np.triu_indices(10, 1)] - 0.6) < 0.05)

    def test_balance(self):
        train, _ = gen_svm(SvmDesign(n=10_000, seed=2))
        assert abs(train.y.mean()) < 0.05
        assert set(np.unique(train.y)) == {-1.0, 1.0}

    def test_rho_range(self):
        with pytest.raises(ValueError):
            SvmDesign(rho=1.0)


class TestLad:
    def test_model1_unit_variance(self):
        d = LadDesign(model="M1")
        eps = d.noise(np.random.default_rng(3), 1_000_000)
        assert 0.98 <= eps.var() <= 1.02

    def test_model2_kurtosis(self):
        eps = LadDesign(model="M2").noise(np.random.default_rng(4), 1_000_000)
        assert eps.var() == pytest.approx(1.0, abs=0.01)
        assert stats.kurtosis(eps, fisher=False) == pytest.approx(6.0, abs=0.2)

    def test_truth_and_mask(self):
        d = LadDesign(p=8)
        assert d.truth.tolist() == [1.0, 1.5, 2.0, 3.0, 0, 0, 0, 0, 0]
        assert d.active_mask.tolist() == [False, True, True, True] + [False] * 5

    def test_inactive_columns_carry_no_signal(self):
        data = gen_lad(LadDesign(n=20_000, p=8, seed=5))
        resid = data.y - 1.0 - data.X[:, :3] @ [1.5, 2.0, 3.0]
        coef = np.linalg.lstsq(data.X[:, 3:], resid - resid.mean(), rcond=None)[0]
        assert np.max(np.abs(coef)) < 0.2

    def test_bad_model(self):
        with pytest.raises(ValueError):
            LadDesign(model="M3")


class TestCovariances:
    @pytest.mark.parametrize("p", [2, 8, 50, 500])
    def test_cholesky(self, p):
        np.linalg.cholesky(equicorrelation(p, 0.6))
        np.linalg.cholesky(toeplitz_cov(p))

    def test_moments(self):
        data = gen_lad(LadDesign(n=10_000, p=4, seed=6))
        se = 1 / np.sqrt(10_000)
        assert np.all(np.abs(data.X.mean(axis=0)) < 3 * se * 1.2)
        assert np.all(np.abs(data.X.var(axis=0) - 1) < 3 * np.sqrt(2) * se * 1.2)


def test_lasso_is_centered():
    data = gen_lasso(LassoDesign(n=500, p=10, seed=7))
    assert np.allclose(data.X.mean(axis=0), 0) and abs(data.y.mean()) < 1e-12


def test_generators_are_seeded(tmp_path):
    a = gen_lad(LadDesign(n=30, p=3, seed=8))
    b = gen_lad(LadDesign(n=30, p=3, seed=8))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    a.to_csv(tmp_path / "d.csv")
    c = Dataset.from_csv(tmp_path / "d.csv")
    assert np.array_equal(c.X, a.X) and c.meta["seed"] == 8 and c.meta["design"] == "lad"


class TestPopulationTarget:
    def test_lad_recovers_truth(self):
        d = LadDesign(model="M2")
        res = population_target(LossModel.lad(), d, TargetSpec(n_samples=200_000, iterations=400, lr=5.0))
        assert np.max(np.abs(res.theta0 - d.truth)) < 0.05

    def test_svm_exchangeable_coordinates(self):
        d = SvmDesign(p=4, rho=0.6)
        res = population_target(LossModel.hinge(), d, TargetSpec(n_samples=100_000, iterations=300))
        theta = res.theta0[1:]
        assert np.ptp(theta) < 0.05
        assert abs(res.theta0[0]) < 0.05
