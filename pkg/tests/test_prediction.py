"""Tests for the shrinkage predictor."""
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from src.sae.dataset import AreaDataset
from src.sae.errors import NonPositiveTotalVariance
from src.sae.estimation import fit_mecor
from src.sae.prediction import predict_dataset, predict_theta, residual_v, shrinkage_terms
from src.sae.types import AreaObservation, ErrorCov, ModelParams


class TestPredictTheta:
    """Tests for the single-area predictor."""

    def test_hand_computed(self):
        """e_hat and M1 follow the conditional-mean formulas."""
        obs = AreaObservation(area_id="a", y=5.0, w=[2.0], psi=ErrorCov.scalar(0.2, 0.1, 0.5))
        params = ModelParams(beta0=1.0, beta1=[1.5], sigma2_b=0.3)
        v = 5.0 - 1.0 - 1.5 * 2.0
        numerator = 0.5 - 1.5 * 0.1
        total = 0.3 + 0.5 + 1.5 ** 2 * 0.2 - 2 * 1.5 * 0.1
        record = predict_theta(obs, params)
        assert residual_v(obs, params) == pytest.approx(v)
        assert record.shrink_coef == pytest.approx(numerator / total, rel=1e-14)
        assert record.e_hat == pytest.approx(numerator / total * v, rel=1e-14)
        assert record.theta_hat == pytest.approx(5.0 - numerator / total * v, rel=1e-14)
        assert record.m1 == pytest.approx(0.5 - numerator ** 2 / total, rel=1e-14)

    def test_large_sigma2_b_keeps_direct(self):
        """A huge random-effect variance leaves Y_i almost untouched."""
        obs = AreaObservation(area_id="a", y=5.0, w=[2.0], psi=ErrorCov.scalar(0.2, 0.1, 0.5))
        record = predict_theta(obs, ModelParams(beta0=1.0, beta1=[1.5], sigma2_b=1e9))
        assert abs(record.theta_hat - 5.0) < 1e-6
        assert record.m1 == pytest.approx(0.5, abs=1e-6)

    def test_zero_total_variance(self):
        """Zero total variance with a nonzero numerator cannot be predicted."""
        obs = AreaObservation(area_id="a", y=5.0, w=[2.0], psi=ErrorCov.scalar(0.0, 0.5, 1.0))
        with pytest.raises(NonPositiveTotalVariance):
            predict_theta(obs, ModelParams(beta0=1.0, beta1=[1.0], sigma2_b=0.0))

    def test_no_error_no_random_effect(self):
        """Psi = 0 and sigma2_b = 0: the direct estimate is exact."""
        obs = AreaObservation(area_id="a", y=5.0, w=[2.0], psi=ErrorCov.scalar(0.0, 0.0, 0.0))
        record = predict_theta(obs, ModelParams(beta0=1.0, beta1=[1.5], sigma2_b=0.0))
        assert record.e_hat == 0.0
        assert record.theta_hat == 5.0
        assert record.m1 == 0.0

    def test_zero_numerator(self):
        """psi_ee = beta1'Psi_ue: v_i says nothing about e_i."""
        obs = AreaObservation(area_id="a", y=5.0, w=[2.0], psi=ErrorCov.scalar(0.5, 0.25, 0.5))
        record = predict_theta(obs, ModelParams(beta0=1.0, beta1=[2.0], sigma2_b=0.2))
        assert record.e_hat == 0.0
        assert record.theta_hat == 5.0
        assert record.m1 == 0.5

    def test_classic_shrinkage_half(self):
        obs = AreaObservation(area_id="a", y=4.0, w=[1.0], psi=ErrorCov.scalar(0.0, 0.0, 1.0))
        record = predict_theta(obs, ModelParams(beta0=1.0, beta1=[1.0], sigma2_b=1.0))
        assert record.e_hat == pytest.approx(1.0)
        assert record.theta_hat == pytest.approx(3.0)
        assert record.m1 == pytest.approx(0.5)


class TestPredictDataset:
    """Tests for the vectorized predictor."""

    def test_matches_single_area(self, dataset):
        params = fit_mecor(dataset).params
        records = predict_dataset(dataset, params)
        for i in (0, 7, dataset.n - 1):
            single = predict_theta(dataset.observation(i), params)
            assert records[i].area_id == single.area_id
            assert records[i].theta_hat == pytest.approx(single.theta_hat, rel=1e-13)
            assert records[i].m1 == pytest.approx(single.m1, rel=1e-13)

    def test_convex_combination(self, dataset):
        """theta_hat = (1 - c) Y + c (beta0 + beta1'W) with c the shrinkage coefficient."""
        params = fit_mecor(dataset).params
        for record, i in zip(predict_dataset(dataset, params), range(dataset.n)):
            synthetic = params.beta0 + dataset.w[i] @ params.beta1
            expected = (1 - record.shrink_coef) * dataset.y[i] + record.shrink_coef * synthetic
            assert record.theta_hat == pytest.approx(expected, abs=1e-12)

    def test_m1_below_sampling_variance(self, dataset):
        """Conditioning on v_i never increases the error variance."""
        params = fit_mecor(dataset).params
        terms = shrinkage_terms(dataset, params)
        assert np.all(terms.m1 <= dataset.psi_ee + 1e-15)

    def test_mean_residual_zero(self, dataset):
        """The moment equations force the residuals to average zero."""
        params = fit_mecor(dataset).params
        assert abs(shrinkage_terms(dataset, params).v.mean()) < 1e-10

    def test_fay_herriot_special_case(self):
        """Without measurement error the coefficient is psi_ee / (sigma2_b + psi_ee)."""
        ds = AreaDataset(
            area_ids=("a", "b", "c"),
            y=[1.0, 2.0, 4.0],
            w=[[0.0], [1.0], [2.0]],
            psi_uu=np.zeros((3, 1, 1)),
            psi_ue=np.zeros((3, 1)),
            psi_ee=[0.5, 1.0, 2.0],
        )
        params = ModelParams(beta0=0.5, beta1=[1.5], sigma2_b=1.0)
        coef = [r.shrink_coef for r in predict_dataset(ds, params)]
        np.testing.assert_allclose(coef, [0.5 / 1.5, 1.0 / 2.0, 2.0 / 3.0], rtol=1e-14)


class TestPredictorProperties:
    """Closed-form and Monte Carlo checks of the predictor."""

    def test_uncorrelated_errors_weighted_form(self, uncorrelated_dataset):
        """With Psi_ue = 0, theta_hat = gamma Y + (1 - gamma)(beta0 + beta1'W)."""
        ds = uncorrelated_dataset
        rng = np.random.default_rng(11)
        for _ in range(5):
            params = ModelParams(beta0=rng.normal(), beta1=[rng.uniform(0.5, 3.0)], sigma2_b=rng.uniform(0.05, 2.0))
            beta1 = params.beta1[0]
            quad = beta1 ** 2 * ds.psi_uu[:, 0, 0]
            gamma = (params.sigma2_b + quad) / (params.sigma2_b + ds.psi_ee + quad)
            synthetic = params.beta0 + beta1 * ds.w[:, 0]
            expected = gamma * ds.y + (1 - gamma) * synthetic
            theta_hat = [r.theta_hat for r in predict_dataset(ds, params)]
            np.testing.assert_allclose(theta_hat, expected, rtol=1e-12, atol=1e-12)

    def test_empirical_mse_matches_m1(self):
        """At the true parameters the MSE of theta_hat over many draws is M1."""
        rng = np.random.default_rng(2024)
        draws = 100_000
        beta0, beta1, sigma2_b, x = 1.0, 2.0, 0.36, 4.0
        psi = ErrorCov.scalar(0.25, 0.8 * np.sqrt(0.25 * 0.75), 0.75)
        params = ModelParams(beta0=beta0, beta1=[beta1], sigma2_b=sigma2_b)

        errors = rng.multivariate_normal(np.zeros(2), psi.to_matrix(), size=draws)
        b = rng.normal(0.0, np.sqrt(sigma2_b), size=draws)
        theta = beta0 + beta1 * x + b
        ds = AreaDataset(
            area_ids=tuple(str(i) for i in range(draws)),
            y=theta + errors[:, 1],
            w=(x + errors[:, 0])[:, None],
            psi_uu=np.broadcast_to(psi.psi_uu, (draws, 1, 1)),
            psi_ue=np.broadcast_to(psi.psi_ue, (draws, 1)),
            psi_ee=np.full(draws, psi.psi_ee),
        )
        terms = shrinkage_terms(ds, params)
        mse = np.mean((ds.y - terms.e_hat - theta) ** 2)
        assert mse == pytest.approx(terms.m1[0], rel=0.02)
