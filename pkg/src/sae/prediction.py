"""Predictor of theta_i = Y_i - E[e_i | v_i] and its leading MSPE term."""
from dataclasses import dataclass

import numpy as np

from .dataset import AreaDataset
from .errors import NonPositiveTotalVariance
from .estimation import TOTAL_VARIANCE_FLOOR, delta_variances, residuals
from .types import AreaObservation, ModelParams, PredictionRecord


def residual_v(obs: AreaObservation, params: ModelParams) -> float:
    """v_i = Y_i - beta0 - beta1'W_i."""
    return float(obs.y - params.beta0 - obs.w @ params.beta1)


@dataclass
class ShrinkageTerms:
    """Column-wise predictor components for a whole dataset."""
    v: np.ndarray
    coef: np.ndarray
    e_hat: np.ndarray
    m1: np.ndarray


def shrinkage_terms(ds: AreaDataset, params: ModelParams) -> ShrinkageTerms:
    """Vectorized e_hat and M1 for every area at the given parameters.

    An area whose total variance and numerator both vanish (no random effect
    and no error at all) carries no information in v_i: its coefficient is 0
    and M1 = psi_ee.
    """
    v = residuals(ds, params.beta0, params.beta1)
    numerator = ds.psi_ee - ds.psi_ue @ params.beta1
    total = params.sigma2_b + delta_variances(ds, params.beta1)
    degenerate = (np.abs(total) <= TOTAL_VARIANCE_FLOOR) & (np.abs(numerator) <= TOTAL_VARIANCE_FLOOR)
    bad = (total <= TOTAL_VARIANCE_FLOOR) & ~degenerate
    if bad.any():
        index = int(np.argmax(bad))
        raise NonPositiveTotalVariance(
            f"total variance {total[index]:.3g} is not positive in area {ds.area_ids[index]}",
            area_id=ds.area_ids[index],
        )
    safe_total = np.where(degenerate, 1.0, total)
    coef = np.where(degenerate, 0.0, numerator / safe_total)
    m1 = np.where(degenerate, ds.psi_ee, ds.psi_ee - numerator ** 2 / safe_total)
    return ShrinkageTerms(v=v, coef=coef, e_hat=coef * v, m1=m1)


def predict_dataset(ds: AreaDataset, params: ModelParams) -> list[PredictionRecord]:
    """Predict every area of a dataset."""
    terms = shrinkage_terms(ds, params)
    return [
        PredictionRecord(
            area_id=area_id,
            y=float(ds.y[i]),
            v=float(terms.v[i]),
            e_hat=float(terms.e_hat[i]),
            theta_hat=float(ds.y[i] - terms.e_hat[i]),
            m1=float(terms.m1[i]),
            shrink_coef=float(terms.coef[i]),
        )
        for i, area_id in enumerate(ds.area_ids)
    ]


def predict_theta(obs: AreaObservation, params: ModelParams) -> PredictionRecord:
    """Predict one area.

    e_hat = (psi_ee - beta1'Psi_ue) / (sigma2_b + sigma2_delta) * v and
    M1 = psi_ee - (psi_ee - beta1'Psi_ue)^2 / (sigma2_b + sigma2_delta).
    """
    return predict_dataset(AreaDataset.from_observations([obs]), params)[0]
