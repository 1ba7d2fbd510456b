"""Comparator procedures: naive Fay-Herriot (FH) and Ybarra-Lohr (YL).

FH ignores the measurement error in W_i; YL accounts for it but assumes the
measurement and sampling errors are uncorrelated. Both share the predictor and
scalar optimizer of the correlated-error model so the three methods differ only
in what they assume about Psi_i.
"""
from dataclasses import dataclass

import numpy as np
from loguru import logger

from .dataset import AreaDataset
from .errors import NonPositiveTotalVariance, SingularMomentMatrix, TooFewAreas
from .estimation import (
    MOMENT_CONDITION_LIMIT,
    clamp_deltas,
    compute_moments,
    delta_variances,
    estimate_beta,
    maximize_on_interval,
    profile_loglik,
    search_upper_bound,
    sigma2_b_yl,
)
from .prediction import predict_dataset, shrinkage_terms
from .types import FitResult, Method, ModelParams, MspeRecord, PredictionRecord

logger = logger.bind(module="sae.baselines")


@dataclass
class BaselineResult:
    """Fit, predictions and (when the method provides one) MSPE estimates."""
    fit: FitResult
    predictions: list[PredictionRecord]
    mspe: list[MspeRecord] | None = None


# ============== Fay-Herriot ==============

def _design(ds: AreaDataset) -> np.ndarray:
    return np.column_stack([np.ones(ds.n), ds.w])


def _gls(x: np.ndarray, y: np.ndarray, total: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """GLS coefficients and (X'V^-1 X)^-1 for V = diag(total)."""
    weights = 1.0 / total
    info = x.T @ (x * weights[:, None])
    condition = np.linalg.cond(info)
    if not np.isfinite(condition) or condition > MOMENT_CONDITION_LIMIT:
        raise SingularMomentMatrix(
            "GLS information matrix is singular",
            condition_number=float(condition) if np.isfinite(condition) else None,
        )
    info_inv = np.linalg.inv(info)
    return info_inv @ (x.T @ (weights * y)), info_inv


def _fh_profile(sigma2_v: float, x: np.ndarray, y: np.ndarray, psi_ee: np.ndarray) -> float:
    total = sigma2_v + psi_ee
    if np.any(total <= 0.0):
        raise NonPositiveTotalVariance("sigma2_v + psi_ee is not positive", sigma2_v=float(sigma2_v))
    coef, _ = _gls(x, y, total)
    r = y - x @ coef
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * total)) - 0.5 * np.sum(r ** 2 / total))


def _fh_score(sigma2_v: float, x: np.ndarray, y: np.ndarray, psi_ee: np.ndarray) -> float:
    # Envelope theorem: beta(s) solves the beta score, so only the s-derivative remains
    total = sigma2_v + psi_ee
    coef, _ = _gls(x, y, total)
    r = y - x @ coef
    return float(0.5 * np.sum(r ** 2 / total ** 2 - 1.0 / total))


def fh_mspe(ds: AreaDataset, params: ModelParams) -> list[MspeRecord]:
    """Prasad-Rao estimator g1 + g2 + 2 g3 with the ML variance of sigma2_v.

    g1 goes into m1_hat and g2 + 2 g3 into m2_jk so FH shares the MSPE
    record layout with the jackknife estimator.
    """
    x = _design(ds)
    total = params.sigma2_b + ds.psi_ee
    _, info_inv = _gls(x, ds.y, total)
    gamma = params.sigma2_b / total
    g1 = gamma * ds.psi_ee
    g2 = (1.0 - gamma) ** 2 * np.einsum("ij,jk,ik->i", x, info_inv, x)
    var_sigma2 = 2.0 / np.sum(total ** -2.0)
    g3 = ds.psi_ee ** 2 / total ** 3 * var_sigma2
    mspe = g1 + g2 + 2.0 * g3
    theta_hat = gamma * ds.y + (1.0 - gamma) * (x @ params.to_vector()[:-1])
    return [
        MspeRecord(
            area_id=area_id,
            theta_hat=float(theta_hat[i]),
            m1_hat=float(g1[i]),
            m2_jk=float(g2[i] + 2.0 * g3[i]),
            bias_jk=0.0,
            mspe=float(mspe[i]),
            mspe_lb=float(mspe[i]),
            lb_applied=False,
        )
        for i, area_id in enumerate(ds.area_ids)
    ]


def fit_fh(ds: AreaDataset) -> BaselineResult:
    """Fay-Herriot EBLUP treating W_i as the true covariate.

    sigma2_v maximizes the profile likelihood with beta(sigma2_v) the GLS
    estimate; the predictor is gamma_i Y_i + (1 - gamma_i) x_i'beta.
    """
    if ds.n < ds.p + 2:
        raise TooFewAreas(f"need at least {ds.p + 2} areas, got {ds.n}", n=ds.n, p=ds.p)
    naive = ds.without_measurement_error()
    x = _design(naive)
    y, psi_ee = naive.y, naive.psi_ee

    ols, *_ = np.linalg.lstsq(x, y, rcond=None)
    upper = search_upper_bound(y - x @ ols)
    best = maximize_on_interval(
        lambda s: _fh_profile(s, x, y, psi_ee),
        upper,
        score=lambda s: _fh_score(s, x, y, psi_ee),
    )
    coef, info_inv = _gls(x, y, best.value + psi_ee)
    params = ModelParams(beta0=coef[0], beta1=coef[1:], sigma2_b=best.value)

    logger.debug(f"FH fit n={ds.n}: beta={coef.tolist()}, sigma2_v={best.value:.6g}")
    fit = FitResult(
        params=params,
        sigma2_b_yl=float("nan"),
        loglik=best.objective,
        n_areas=ds.n,
        method=Method.FH,
        diagnostics={
            "gls_condition_number": float(np.linalg.cond(info_inv)),
            "optimizer_evaluations": float(best.evaluations),
            "search_upper": upper,
        },
    )
    return BaselineResult(
        fit=fit,
        predictions=predict_dataset(naive, params),
        mspe=fh_mspe(naive, params),
    )


# ============== Ybarra-Lohr ==============

def fit_yl(ds: AreaDataset) -> BaselineResult:
    """Measurement-error model with Psi_ue forced to zero.

    beta comes from the moment equations with Psi_ue = 0 in zeta1;
    sigma2_b is the moment estimator truncated at 0.
    """
    zeroed = ds.with_psi_ue_zeroed()
    beta0, beta1 = estimate_beta(compute_moments(zeroed))
    raw = sigma2_b_yl(zeroed, beta0, beta1)
    params = ModelParams(beta0=beta0, beta1=beta1, sigma2_b=max(0.0, raw))
    if raw < 0:
        logger.debug(f"YL moment estimator {raw:.4g} truncated at 0")

    deltas, n_clamped = clamp_deltas(delta_variances(zeroed, beta1), zeroed.psi_ee)
    try:
        loglik = profile_loglik(params.sigma2_b, zeroed, beta0, beta1, deltas=deltas)
    except NonPositiveTotalVariance:
        loglik = float("nan")

    fit = FitResult(
        params=params,
        sigma2_b_yl=raw,
        loglik=loglik,
        n_areas=ds.n,
        method=Method.YL,
        diagnostics={"delta_clamped": float(n_clamped)},
    )
    return BaselineResult(fit=fit, predictions=predict_dataset(zeroed, params))


def direct_predictions(ds: AreaDataset) -> list[PredictionRecord]:
    """Direct estimator theta_hat_i = Y_i with MSPE psi_ee,i."""
    return [
        PredictionRecord(
            area_id=area_id,
            y=float(ds.y[i]),
            v=0.0,
            e_hat=0.0,
            theta_hat=float(ds.y[i]),
            m1=float(ds.psi_ee[i]),
            shrink_coef=0.0,
        )
        for i, area_id in enumerate(ds.area_ids)
    ]


def theta_hat_vector(ds: AreaDataset, params: ModelParams) -> np.ndarray:
    """theta_hat for every area without building records."""
    return ds.y - shrinkage_terms(ds, params).e_hat
