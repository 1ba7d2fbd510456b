"""Tests for moment estimation of beta and ML estimation of sigma2_b."""
import os
import sys

import numpy as np
import pytest
from scipy import stats

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from src.sae.dataset import AreaDataset
from src.sae.errors import NonPositiveTotalVariance, SingularMomentMatrix, TooFewAreas
from src.sae.estimation import (
    compute_moments,
    delta_variances,
    estimate_beta,
    estimate_sigma2_b_ml,
    fit_mecor,
    maximize_on_interval,
    moment_matrix,
    profile_loglik,
    residuals,
    sigma2_b_yl,
)
from tests.conftest import make_dataset


def _homoscedastic(n=60, seed=3, noise=1.0, psi_ee=0.25):
    """Error-free covariate, psi_ee constant: closed-form ML sigma2_b."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 10.0, size=n)
    y = 1.0 + 2.0 * w + rng.normal(0.0, noise, size=n)
    return AreaDataset(
        area_ids=tuple(str(i) for i in range(n)),
        y=y,
        w=w[:, None],
        psi_uu=np.zeros((n, 1, 1)),
        psi_ue=np.zeros((n, 1)),
        psi_ee=np.full(n, psi_ee),
    )


class TestMoments:
    """Tests for the measurement-error corrected moment system."""

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_explicit_formula(self, seed):
        """5-area random datasets agree with the loop-based moment equations."""
        ds = make_dataset(n=5, p=2, seed=seed, psi_uu=0.05, psi_ee=0.3)
        n = ds.n
        zeta1 = sum(ds.w[i] * ds.y[i] - ds.psi_ue[i] for i in range(n)) / n
        zeta2 = sum(ds.y) / n
        zeta3 = sum(ds.w) / n
        zeta4 = sum(np.outer(ds.w[i], ds.w[i]) - ds.psi_uu[i] for i in range(n)) / n
        matrix = np.block([[np.ones((1, 1)), zeta3[None, :]], [zeta3[:, None], zeta4]])
        expected = np.linalg.inv(matrix) @ np.concatenate(([zeta2], zeta1))

        beta0, beta1 = estimate_beta(compute_moments(ds))
        np.testing.assert_allclose(np.concatenate(([beta0], beta1)), expected, rtol=1e-12, atol=1e-12)

    def test_singular_when_no_covariate_variation(self):
        """Constant W with no measurement error leaves nothing to regress on."""
        n = 6
        ds = AreaDataset(
            area_ids=tuple(str(i) for i in range(n)),
            y=np.arange(n, dtype=float),
            w=np.ones((n, 1)),
            psi_uu=np.zeros((n, 1, 1)),
            psi_ue=np.zeros((n, 1)),
            psi_ee=np.full(n, 0.5),
        )
        with pytest.raises(SingularMomentMatrix):
            estimate_beta(compute_moments(ds))

    def test_too_few_areas(self):
        ds = make_dataset(n=40).subset([0, 1])
        with pytest.raises(TooFewAreas):
            compute_moments(ds)

    def test_recovers_truth_on_large_sample(self):
        """Moment estimates are consistent under measurement error."""
        ds = make_dataset(n=4000, seed=11, rho=0.6)
        beta0, beta1 = estimate_beta(compute_moments(ds))
        assert abs(beta0 - 1.0) < 0.15
        assert abs(beta1[0] - 2.0) < 0.03


class TestSigma2b:
    """Tests for the sigma2_b estimators."""

    def test_homoscedastic_closed_form(self):
        """With equal deltas the ML estimate is mean(v^2) - delta."""
        ds = _homoscedastic()
        fit = fit_mecor(ds)
        v = residuals(ds, fit.params.beta0, fit.params.beta1)
        expected = max(0.0, float(np.mean(v ** 2)) - 0.25)
        assert expected > 0.1
        assert fit.params.sigma2_b == pytest.approx(expected, abs=1e-8)

    def test_boundary_is_exact_zero(self):
        """Residual spread below the sampling variance gives exactly 0."""
        ds = _homoscedastic(noise=0.1, psi_ee=1.0)
        assert fit_mecor(ds).params.sigma2_b == 0.0

    def test_yl_moment_estimator_not_truncated(self):
        ds = _homoscedastic(noise=0.1, psi_ee=1.0)
        fit = fit_mecor(ds)
        raw = sigma2_b_yl(ds, fit.params.beta0, fit.params.beta1)
        assert raw < 0
        assert fit.sigma2_b_yl == raw

    def test_yl_moment_estimator_formula(self, dataset):
        beta0, beta1 = estimate_beta(compute_moments(dataset))
        v = residuals(dataset, beta0, beta1)
        expected = np.sum(v ** 2 - delta_variances(dataset, beta1)) / (dataset.n - 2)
        assert sigma2_b_yl(dataset, beta0, beta1) == pytest.approx(expected, rel=1e-12)

    def test_delta_variance_formula(self, dataset):
        beta1 = np.array([1.7])
        expected = dataset.psi_ee + 1.7 ** 2 * dataset.psi_uu[:, 0, 0] - 2 * 1.7 * dataset.psi_ue[:, 0]
        np.testing.assert_allclose(delta_variances(dataset, beta1), expected, rtol=1e-13)

    def test_profile_loglik_matches_normal_density(self, dataset):
        beta0, beta1 = 1.0, np.array([2.0])
        v = residuals(dataset, beta0, beta1)
        total = 0.3 + delta_variances(dataset, beta1)
        expected = stats.norm.logpdf(v, scale=np.sqrt(total)).sum()
        assert profile_loglik(0.3, dataset, beta0, beta1) == pytest.approx(expected, rel=1e-12)

    def test_profile_loglik_rejects_zero_variance(self):
        ds = _homoscedastic(psi_ee=0.0)
        with pytest.raises(NonPositiveTotalVariance):
            profile_loglik(0.0, ds, 1.0, np.array([2.0]))

    def test_ml_is_maximizer(self, dataset):
        """Neighbouring values do not improve the profile likelihood."""
        fit = fit_mecor(dataset)
        b0, b1, s = fit.params.beta0, fit.params.beta1, fit.params.sigma2_b
        best = profile_loglik(s, dataset, b0, b1)
        for other in (s * 0.9, s * 1.1, s + 0.01):
            assert profile_loglik(other, dataset, b0, b1) <= best + 1e-12
        assert estimate_sigma2_b_ml(dataset, b0, b1) == pytest.approx(s, abs=1e-12)


class TestMaximizeOnInterval:
    """Tests for the bounded scalar search."""

    def test_interior_maximum(self):
        result = maximize_on_interval(lambda s: -(s - 0.3) ** 2, 1.0, score=lambda s: -2 * (s - 0.3))
        assert result.value == pytest.approx(0.3, abs=1e-9)

    def test_maximum_at_lower_end(self):
        result = maximize_on_interval(lambda s: -s, 1.0)
        assert result.value == 0.0

    def test_maximum_at_upper_end(self):
        result = maximize_on_interval(lambda s: s, 2.5)
        assert result.value == 2.5


class TestFitMecor:
    """Tests for the full fit."""

    def test_scale_equivariance(self, dataset):
        """Scaling Y by c scales beta by c and sigma2_b by c^2."""
        c = 3.0
        scaled = AreaDataset(
            area_ids=dataset.area_ids,
            y=c * dataset.y,
            w=dataset.w,
            psi_uu=dataset.psi_uu,
            psi_ue=c * dataset.psi_ue,
            psi_ee=c ** 2 * dataset.psi_ee,
        )
        base, other = fit_mecor(dataset).params, fit_mecor(scaled).params
        assert other.beta0 == pytest.approx(c * base.beta0, rel=1e-9)
        np.testing.assert_allclose(other.beta1, c * base.beta1, rtol=1e-9)
        assert other.sigma2_b == pytest.approx(c ** 2 * base.sigma2_b, rel=1e-6, abs=1e-10)

    def test_noiseless_data_clamps_deltas(self):
        """Psi = 0 everywhere is handled by flooring the residual variances."""
        n = 30
        rng = np.random.default_rng(5)
        w = rng.uniform(0.0, 5.0, size=n)
        ds = AreaDataset(
            area_ids=tuple(str(i) for i in range(n)),
            y=1.0 + 2.0 * w + rng.normal(0.0, 0.6, size=n),
            w=w[:, None],
            psi_uu=np.zeros((n, 1, 1)),
            psi_ue=np.zeros((n, 1)),
            psi_ee=np.zeros(n),
        )
        fit = fit_mecor(ds)
        assert fit.diagnostics["delta_clamped"] == n
        assert np.isfinite(fit.params.sigma2_b) and fit.params.sigma2_b > 0

    def test_diagnostics(self, dataset):
        fit = fit_mecor(dataset)
        assert fit.n_areas == dataset.n
        assert fit.diagnostics["moment_condition_number"] >= 1.0
        assert fit.diagnostics["search_upper"] >= 1.0
        assert fit.params.sigma2_b >= 0.0

    def test_condition_number_of_moment_matrix(self, dataset):
        fit = fit_mecor(dataset)
        expected = np.linalg.cond(moment_matrix(compute_moments(dataset)))
        assert fit.diagnostics["moment_condition_number"] == pytest.approx(expected, rel=1e-12)

    def test_exact_line_without_errors(self):
        """y = 1 + 2w with Psi = 0: (beta0, beta1, sigma2_b) = (1, 2, 0)."""
        n = 12
        w = np.linspace(0.5, 6.0, n)
        ds = AreaDataset(
            area_ids=tuple(f"{i:02d}" for i in range(n)),
            y=1.0 + 2.0 * w,
            w=w[:, None],
            psi_uu=np.zeros((n, 1, 1)),
            psi_ue=np.zeros((n, 1)),
            psi_ee=np.zeros(n),
        )
        params = fit_mecor(ds).params
        assert params.beta0 == pytest.approx(1.0, abs=1e-8)
        assert params.beta1[0] == pytest.approx(2.0, abs=1e-8)
        assert params.sigma2_b == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_area_order_does_not_matter(self, dataset, seed):
        perm = np.random.default_rng(seed).permutation(dataset.n)
        base, shuffled = fit_mecor(dataset).params, fit_mecor(dataset.subset(perm)).params
        np.testing.assert_allclose(shuffled.to_vector(), base.to_vector(), rtol=1e-7, atol=1e-10)
