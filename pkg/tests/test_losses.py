import numpy as np
import pytest
from scipy.integrate import trapezoid

from deepboot.data import Dataset
from deepboot.losses import (
    LaplacePrior,
    LossModel,
    Parameter,
    gibbs_log_density,
    log_prior,
    log_prior_subgrad,
    loss,
    loss_subgrad,
    weighted_objective,
)
from deepboot.weights import gibbs_weights

HINGE, LAD, SQ = LossModel.hinge(), LossModel.lad(), LossModel.squared()


class TestLoss:
    def test_hinge_at_zero_parameter(self):
        assert loss(HINGE, Parameter(0.0, np.zeros(3)), [1.0, -2.0, 5.0], -1) == 1.0

    def test_hinge_beyond_margin(self):
        assert loss(HINGE, Parameter(1.0, np.array([0.5])), [2.0], 1) == 0.0

    def test_hinge_rejects_labels(self):
        with pytest.raises(ValueError):
            loss(HINGE, Parameter(0.0, np.zeros(1)), [1.0], 0.5)

    def test_lad_zero_residual(self):
        assert loss(LAD, Parameter(1.0, np.array([2.0, -1.0])), [1.0, 1.0], 2.0) == 0.0

    def test_squared_has_no_intercept(self):
        assert loss(SQ, np.array([2.0]), [3.0], 1.0) == 25.0

    def test_shape_check(self):
        with pytest.raises(ValueError):
            loss(LAD, np.zeros(2), [1.0, 2.0], 0.0)


class TestSubgradient:
    def test_hinge_kink_is_zero(self):
        g = loss_subgrad(HINGE, Parameter(0.0, np.array([1.0])), [1.0], 1)
        assert np.array_equal(g, [0.0, 0.0])

    def test_hinge_active(self):
        g = loss_subgrad(HINGE, Parameter(0.0, np.array([0.1])), [2.0], -1)
        assert np.array_equal(g, [1.0, 2.0])

    def test_lad_positive_residual(self):
        g = loss_subgrad(LAD, Parameter(0.0, np.array([0.0])), [3.0], 1.0)
        assert g[0] == -1.0 and g[1] == -3.0

    def test_lad_zero_residual_sign(self):
        g = loss_subgrad(LAD, Parameter(1.0, np.array([0.0])), [3.0], 1.0)
        assert np.array_equal(g, [0.0, 0.0])

    @pytest.mark.parametrize("model", [HINGE, LAD, SQ])
    def test_finite_differences_away_from_kinks(self, model):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.standard_normal(4)
            y = float(rng.choice([-1.0, 1.0])) if model is HINGE else float(rng.standard_normal())
            theta = rng.standard_normal(model.dim(4))
            g = loss_subgrad(model, theta, x, y)
            h = 1e-7
            fd = np.array([(loss(model, theta + h * e, x, y) - loss(model, theta - h * e, x, y)) / (2 * h)
                           for e in np.eye(theta.size)])
            assert np.allclose(g, fd, atol=1e-6)


class TestPrior:
    def test_flat(self):
        assert log_prior(LaplacePrior(0.0), Parameter(1.0, np.array([5.0, -3.0]))) == 0.0

    def test_unit_normalizer_at_two(self):
        assert log_prior(LaplacePrior(2.0), Parameter(9.0, np.zeros(3))) == 0.0

    def test_direct_substitution(self):
        val = log_prior(LaplacePrior(1.0), Parameter(None, np.array([1.0, -1.0])))
        assert val == pytest.approx(2 * np.log(0.5) - 2)

    def test_intercept_unpenalized(self):
        g = log_prior_subgrad(LaplacePrior(3.0), Parameter(4.0, np.array([2.0, -1.0, 0.0])))
        assert np.array_equal(g, [0.0, -3.0, 3.0, 0.0])

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            LaplacePrior(-0.1)


class TestGibbsDensity:
    def test_single_zero_residual(self):
        data = Dataset(np.array([[2.0]]), np.array([5.0]))
        assert gibbs_log_density(LAD, Parameter(1.0, np.array([2.0])), data, 1.0) == 0.0

    def test_linear_in_alpha(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.standard_normal((20, 3)), rng.standard_normal(20))
        model = LossModel.lad(LaplacePrior(0.5))
        theta = rng.standard_normal(4)
        a = gibbs_log_density(model, theta, data, 1.0)
        b = gibbs_log_density(model, theta, data, 2.0)
        c = gibbs_log_density(model, theta, data, 3.0)
        assert (c - b) == pytest.approx(b - a)

    def test_rejects_nonpositive_alpha(self):
        data = Dataset(np.zeros((2, 1)), np.zeros(2))
        with pytest.raises(ValueError):
            gibbs_log_density(LAD, np.zeros(2), data, 0.0)

    def test_grid_normalization_is_finite(self):
        data = Dataset(np.zeros((20, 0)), np.random.default_rng(2).standard_normal(20))
        grid = np.linspace(-5, 5, 2001)
        logd = np.array([gibbs_log_density(LAD, np.array([b]), data) for b in grid])
        z = trapezoid(np.exp(logd - logd.max()), grid)
        assert np.isfinite(z) and z > 0
        # the density is unimodal at the sample median
        assert abs(grid[np.argmax(logd)] - np.median(data.y)) < 0.5


class TestWeightedObjective:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.data = Dataset(rng.standard_normal((12, 2)), rng.standard_normal(12))
        self.theta = rng.standard_normal(3)

    def test_unit_weights_is_empirical_risk(self):
        risk = sum(loss(LAD, self.theta, x, y) for x, y in zip(self.data.X, self.data.y))
        assert weighted_objective(LAD, self.theta, self.data, np.ones(12)) == pytest.approx(risk)

    def test_penalized_lad(self):
        lam = 0.7
        model = LossModel.lad(LaplacePrior(lam))
        risk = np.abs(self.data.y - self.theta[0] - self.data.X @ self.theta[1:]).sum()
        expected = risk + lam * np.abs(self.theta[1:]).sum() - 2 * np.log(lam / 2)
        assert weighted_objective(model, self.theta, self.data, np.ones(12)) == pytest.approx(expected)

    def test_doubling_weights_doubles_data_term(self):
        model = LossModel.lad(LaplacePrior(1.0))
        w = np.random.default_rng(4).random(12)
        one = weighted_objective(model, self.theta, self.data, w)
        two = weighted_objective(model, self.theta, self.data, 2 * w)
        prior = -log_prior(LaplacePrior(1.0), self.theta)
        assert two - prior == pytest.approx(2 * (one - prior))

    def test_accepts_weight_vector(self):
        wv = gibbs_weights(12, 4, np.random.default_rng(5))
        a = weighted_objective(LAD, self.theta, self.data, wv)
        b = weighted_objective(LAD, self.theta, self.data, wv.expanded)
        assert a == b

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            weighted_objective(LAD, self.theta, self.data, np.ones(11))
