"""Delete-one-area jackknife for the MSPE of the predictor and the covariance of omega-hat.

For area i the estimated MSPE is M1_i(omega-hat) + M2_i - b_i where
- M2_i is the spread of e_hat_i over the delete-one parameter estimates
- b_i is the jackknife bias of the plug-in M1_i
Sums run over refits ordered by area_id so results do not depend on input order.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from loguru import logger

from .dataset import AreaDataset
from .errors import JackknifeDegenerate, SaeError, TooFewAreas
from .estimation import fit_mecor
from .prediction import shrinkage_terms
from .types import FitResult, JackknifeCovariance, JackknifeSet, JkScale, ModelParams, MspeRecord

logger = logger.bind(module="sae.mspe")

MAX_FAILURE_RATE = 0.05


def _sum_scale(n_areas: int, n_success: int, scale: JkScale) -> float:
    """Factor applied to jackknife sums of squares.

    Failed deletions are dropped and the sum is rescaled by n/m; the classic
    scale adds the usual (n-1)/n.
    """
    factor = n_areas / n_success
    if scale == JkScale.CLASSIC:
        factor *= (n_areas - 1) / n_areas
    return factor


def jackknife_refits(
    ds: AreaDataset,
    threads: int = 1,
    max_failure_rate: float = MAX_FAILURE_RATE,
    full_fit: FitResult | None = None,
) -> JackknifeSet:
    """Refit the model n times, each time with one area omitted.

    Args:
        ds: Validated dataset
        threads: Worker threads for the refits; output does not depend on it
        max_failure_rate: Largest tolerated share of failed deletions
        full_fit: Fit on the full dataset, computed when omitted

    Returns:
        JackknifeSet with refits ordered by area_id
    """
    if ds.n < ds.p + 3:
        raise TooFewAreas(f"jackknife needs at least {ds.p + 3} areas, got {ds.n}", n=ds.n, p=ds.p)
    full = full_fit or fit_mecor(ds)
    order = sorted(range(ds.n), key=lambda i: ds.area_ids[i])

    def refit(index: int) -> ModelParams | None:
        try:
            return fit_mecor(ds.drop(index)).params
        except SaeError as e:
            logger.warning(f"Jackknife deletion of area {ds.area_ids[index]} failed: {e.code}: {e}")
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(refit, order))
    else:
        results = [refit(index) for index in order]

    jk = JackknifeSet(omega_full=full.params)
    for index, params in zip(order, results):
        if params is None:
            jk.failed_deletions.append(ds.area_ids[index])
        else:
            jk.omega_deleted.append(params)
            jk.deleted_ids.append(ds.area_ids[index])

    if len(jk.failed_deletions) > max_failure_rate * ds.n:
        raise JackknifeDegenerate(
            f"{len(jk.failed_deletions)} of {ds.n} deletions failed",
            failed_deletions=jk.failed_deletions,
        )
    logger.info(f"Jackknife: {jk.n_success} refits, {len(jk.failed_deletions)} failed")
    return jk


def apply_lower_bound(
    mspe: np.ndarray,
    m1_hat: np.ndarray,
    m2_jk: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Replace nonpositive MSPE estimates by M1 + M2.

    Returns:
        (lower-bounded MSPE, mask of areas where the bound was applied)
    """
    mspe = np.asarray(mspe, dtype=float)
    applied = mspe <= 0.0
    bounded = np.where(applied, np.asarray(m1_hat) + np.asarray(m2_jk), mspe)
    return bounded, applied


def mspe_estimate(
    ds: AreaDataset,
    jk: JackknifeSet,
    scale: JkScale = JkScale.PLAIN,
) -> list[MspeRecord]:
    """Jackknife MSPE estimate for every area of the dataset."""
    if jk.n_success == 0:
        raise JackknifeDegenerate("no successful jackknife deletions")

    full = shrinkage_terms(ds, jk.omega_full)
    e_deleted = np.empty((jk.n_success, ds.n))
    m1_deleted = np.empty((jk.n_success, ds.n))
    for k, params in enumerate(jk.omega_deleted):
        terms = shrinkage_terms(ds, params)
        e_deleted[k] = terms.e_hat
        m1_deleted[k] = terms.m1

    factor = _sum_scale(jk.n_areas, jk.n_success, scale)
    m2 = factor * ((e_deleted - e_deleted.mean(axis=0)) ** 2).sum(axis=0)
    bias = m1_deleted.mean(axis=0) - full.m1
    mspe = full.m1 + m2 - bias
    mspe_lb, applied = apply_lower_bound(mspe, full.m1, m2)

    if applied.any():
        logger.warning(f"Lower bound applied to {int(applied.sum())} nonpositive MSPE estimates")

    records = [
        MspeRecord(
            area_id=area_id,
            theta_hat=float(ds.y[i] - full.e_hat[i]),
            m1_hat=float(full.m1[i]),
            m2_jk=float(m2[i]),
            bias_jk=float(bias[i]),
            mspe=float(mspe[i]),
            mspe_lb=float(mspe_lb[i]),
            lb_applied=bool(applied[i]),
        )
        for i, area_id in enumerate(ds.area_ids)
    ]
    nonpositive = nonpositive_areas(records)
    if nonpositive:
        logger.warning(f"{len(nonpositive)} MSPE estimates remain nonpositive after the lower bound: {nonpositive[:10]}")
    return records


def nonpositive_areas(records: list[MspeRecord]) -> list[str]:
    """Areas whose lower-bounded MSPE is still <= 0 (M1 + M2 <= 0)."""
    return [r.area_id for r in records if not r.mspe_lb > 0.0]


def jackknife_covariance(jk: JackknifeSet, scale: JkScale = JkScale.PLAIN) -> JackknifeCovariance:
    """Sum of outer products of the centered delete-one estimates of omega."""
    if jk.n_success < 2:
        raise JackknifeDegenerate(
            f"jackknife covariance needs at least 2 successful deletions, got {jk.n_success}"
        )
    omegas = np.stack([params.to_vector() for params in jk.omega_deleted])
    centered = omegas - omegas.mean(axis=0)
    matrix = _sum_scale(jk.n_areas, jk.n_success, scale) * (centered.T @ centered)
    return JackknifeCovariance(
        matrix=matrix,
        names=ModelParams.names(jk.omega_full.p),
        n_success=jk.n_success,
        n_failed=len(jk.failed_deletions),
    )
