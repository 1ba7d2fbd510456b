"""Tests for area types and dataset validation."""
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from src.sae.dataset import AreaDataset, validate_dataset
from src.sae.errors import DimensionMismatch, NonFiniteValue, NonPSDCovariance, SchemaError, TooFewAreas
from src.sae.types import AreaObservation, ErrorCov, FitResult, Method, ModelParams


def _obs(area_id, y=1.0, w=(1.0,), psi=None):
    p = len(w)
    if psi is None:
        psi = ErrorCov.from_matrix(np.eye(p + 1))
    return AreaObservation(area_id=area_id, y=y, w=list(w), psi=psi)


class TestErrorCov:
    """Tests for the partitioned error covariance."""

    def test_matrix_round_trip(self):
        """Assembling and re-partitioning gives back the same blocks."""
        matrix = np.array([[0.5, 0.1, 0.2], [0.1, 0.4, 0.05], [0.2, 0.05, 0.9]])
        cov = ErrorCov.from_matrix(matrix)
        assert cov.p == 2
        np.testing.assert_array_equal(cov.to_matrix(), matrix)
        np.testing.assert_array_equal(cov.psi_ue, [0.2, 0.05])
        assert cov.psi_ee == 0.9

    def test_scalar_shortcut(self):
        """Scalar constructor builds a p=1 covariance."""
        cov = ErrorCov.scalar(0.25, 0.1, 0.75)
        np.testing.assert_array_equal(cov.to_matrix(), [[0.25, 0.1], [0.1, 0.75]])

    def test_arrays_read_only(self):
        """Value objects cannot be mutated through their arrays."""
        cov = ErrorCov.scalar(0.25, 0.1, 0.75)
        with pytest.raises(ValueError):
            cov.psi_uu[0, 0] = 1.0


class TestModelParams:
    """Tests for the parameter vector."""

    def test_vector_round_trip(self):
        params = ModelParams(beta0=1.0, beta1=[2.0, -0.5], sigma2_b=0.36)
        vector = params.to_vector()
        np.testing.assert_array_equal(vector, [1.0, 2.0, -0.5, 0.36])
        back = ModelParams.from_vector(vector)
        assert back.beta0 == 1.0
        np.testing.assert_array_equal(back.beta1, [2.0, -0.5])
        assert back.sigma2_b == 0.36

    def test_names(self):
        assert ModelParams.names(1) == ["beta0", "beta1", "sigma2_b"]
        assert ModelParams.names(2) == ["beta0", "beta1_1", "beta1_2", "sigma2_b"]

    def test_fit_result_json_keys(self):
        """FitResult serializes with the documented keys and null for NaN."""
        fit = FitResult(
            params=ModelParams(beta0=1.0, beta1=[2.0], sigma2_b=0.3),
            sigma2_b_yl=float("nan"),
            loglik=-10.0,
            n_areas=5,
            method=Method.FH,
        )
        data = fit.to_dict()
        assert list(data) == ["method", "beta0", "beta1", "sigma2_b", "sigma2_b_yl_raw", "loglik", "n", "diagnostics"]
        assert data["sigma2_b_yl_raw"] is None
        assert FitResult.from_dict(data).params.sigma2_b == 0.3


class TestValidateDataset:
    """Tests for validate_dataset."""

    def test_identity_covariances(self):
        """3 areas with identity Psi are valid."""
        ds = validate_dataset([_obs("a"), _obs("b", y=2.0), _obs("c", y=3.0)])
        assert ds.n == 3
        assert ds.p == 1

    def test_negative_sampling_variance(self):
        """psi_ee = -0.1 is rejected."""
        bad = _obs("b", psi=ErrorCov.scalar(1.0, 0.0, -0.1))
        with pytest.raises(NonPSDCovariance):
            validate_dataset([_obs("a"), bad])

    def test_mixed_dimension(self):
        """p=1 and p=2 areas cannot be mixed."""
        with pytest.raises(DimensionMismatch):
            validate_dataset([_obs("a"), _obs("b", w=(1.0, 2.0))])

    def test_indefinite_covariance(self):
        """Correlation above one is not PSD."""
        bad = _obs("b", psi=ErrorCov.scalar(1.0, 1.5, 1.0))
        with pytest.raises(NonPSDCovariance):
            validate_dataset([_obs("a"), bad])

    def test_borderline_psd_accepted(self):
        """Eigenvalues a hair below zero are within tolerance."""
        edge = _obs("b", psi=ErrorCov.scalar(1.0, 1.0 + 1e-12, 1.0))
        assert validate_dataset([_obs("a"), edge]).n == 2

    def test_non_finite(self):
        with pytest.raises(NonFiniteValue):
            validate_dataset([_obs("a"), _obs("b", y=float("nan"))])

    def test_duplicate_ids(self):
        with pytest.raises(SchemaError):
            validate_dataset([_obs("a"), _obs("a", y=2.0)])

    def test_empty(self):
        with pytest.raises(TooFewAreas):
            validate_dataset([])

    def test_idempotent(self, dataset):
        """Validating a validated dataset returns the same content."""
        once = validate_dataset(dataset)
        twice = validate_dataset(once)
        assert twice.area_ids == once.area_ids
        np.testing.assert_array_equal(twice.full_covariances(), once.full_covariances())


class TestAreaDataset:
    """Tests for dataset transformations."""

    def test_observation_round_trip(self, dataset):
        rebuilt = AreaDataset.from_observations(list(dataset.observations()))
        np.testing.assert_array_equal(rebuilt.y, dataset.y)
        np.testing.assert_array_equal(rebuilt.psi_uu, dataset.psi_uu)

    def test_drop(self, dataset):
        dropped = dataset.drop(3)
        assert dropped.n == dataset.n - 1
        assert dataset.area_ids[3] not in dropped.area_ids

    def test_zeroed_views(self, dataset):
        assert not dataset.with_psi_ue_zeroed().psi_ue.any()
        naive = dataset.without_measurement_error()
        assert not naive.psi_uu.any() and not naive.psi_ue.any()
        np.testing.assert_array_equal(naive.psi_ee, dataset.psi_ee)
