"""Parameter estimation for the correlated-error area-level model.

The regression coefficients come from a method-of-moments system corrected
for the known error covariances; the random-effect variance maximizes the
normal likelihood of the residuals v_i with beta held at its moment estimate.
"""
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy.optimize import brentq, minimize_scalar

from .dataset import AreaDataset
from .errors import NonPositiveTotalVariance, NumericalError, SingularMomentMatrix, TooFewAreas
from .types import FitResult, Method, ModelParams, MomentStats

logger = logger.bind(module="sae.estimation")

MOMENT_CONDITION_LIMIT = 1e12
TOTAL_VARIANCE_FLOOR = 1e-12
DELTA_CLAMP_FACTOR = 1e-8
OPTIMIZER_XATOL = 1e-9


# ============== Moment System ==============

def compute_moments(ds: AreaDataset) -> MomentStats:
    """Sample moments of (Y, W) with the error covariances subtracted."""
    if ds.n < ds.p + 2:
        raise TooFewAreas(f"need at least {ds.p + 2} areas, got {ds.n}", n=ds.n, p=ds.p)
    n = ds.n
    zeta1 = (ds.w * ds.y[:, None]).sum(axis=0) / n - ds.psi_ue.mean(axis=0)
    zeta2 = float(ds.y.mean())
    zeta3 = ds.w.mean(axis=0)
    zeta4 = ds.w.T @ ds.w / n - ds.psi_uu.mean(axis=0)
    zeta4 = 0.5 * (zeta4 + zeta4.T)
    return MomentStats(zeta1=zeta1, zeta2=zeta2, zeta3=zeta3, zeta4=zeta4)


def moment_matrix(moments: MomentStats) -> np.ndarray:
    """The (p+1)x(p+1) matrix [[1, zeta3'], [zeta3, zeta4]]."""
    p = moments.zeta3.shape[0]
    matrix = np.empty((p + 1, p + 1))
    matrix[0, 0] = 1.0
    matrix[0, 1:] = moments.zeta3
    matrix[1:, 0] = moments.zeta3
    matrix[1:, 1:] = moments.zeta4
    return matrix


def solve_moments(moments: MomentStats) -> tuple[float, np.ndarray, float]:
    """(beta0, beta1, condition number of the moment matrix)."""
    matrix = moment_matrix(moments)
    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > MOMENT_CONDITION_LIMIT:
        raise SingularMomentMatrix(
            "moment matrix is singular: no covariate variation left after "
            "measurement error correction",
            condition_number=condition if np.isfinite(condition) else None,
        )
    rhs = np.concatenate(([moments.zeta2], moments.zeta1))
    solution = np.linalg.solve(matrix, rhs)
    return float(solution[0]), solution[1:], condition


def estimate_beta(moments: MomentStats) -> tuple[float, np.ndarray]:
    """Solve the moment equations for (beta0, beta1)."""
    beta0, beta1, _ = solve_moments(moments)
    return beta0, beta1


# ============== Residual Variances ==============

def residuals(ds: AreaDataset, beta0: float, beta1: np.ndarray) -> np.ndarray:
    """v_i = Y_i - beta0 - beta1'W_i for every area."""
    return ds.y - beta0 - ds.w @ np.asarray(beta1, dtype=float)


def delta_variances(ds: AreaDataset, beta1: np.ndarray) -> np.ndarray:
    """Var(e_i - beta1'u_i) = psi_ee + beta1'Psi_uu beta1 - 2 beta1'Psi_ue."""
    beta1 = np.asarray(beta1, dtype=float)
    quad = np.einsum("j,njk,k->n", beta1, ds.psi_uu, beta1)
    return ds.psi_ee + quad - 2.0 * (ds.psi_ue @ beta1)


def clamp_deltas(deltas: np.ndarray, psi_ee: np.ndarray) -> tuple[np.ndarray, int]:
    """Floor the residual error variances at a small multiple of the typical psi_ee."""
    median = float(np.median(psi_ee))
    floor = DELTA_CLAMP_FACTOR * median if median > 0 else DELTA_CLAMP_FACTOR
    clamped = deltas < floor
    count = int(clamped.sum())
    if count:
        logger.warning(f"Clamped {count} residual error variances to {floor:.3g}")
    return np.where(clamped, floor, deltas), count


def sigma2_b_yl(ds: AreaDataset, beta0: float, beta1: np.ndarray) -> float:
    """Moment estimator of sigma2_b; may be negative and is not truncated."""
    p = np.asarray(beta1).shape[0]
    if ds.n <= p + 1:
        raise TooFewAreas(f"need more than {p + 1} areas, got {ds.n}", n=ds.n, p=p)
    v = residuals(ds, beta0, beta1)
    terms = v ** 2 - delta_variances(ds, beta1)
    return float(terms.sum() / (ds.n - p - 1))


# ============== Profile Likelihood ==============

def _loglik(sigma2_b: float, v: np.ndarray, deltas: np.ndarray) -> float:
    total = sigma2_b + deltas
    if np.any(total <= TOTAL_VARIANCE_FLOOR):
        raise NonPositiveTotalVariance(
            "sigma2_b + residual error variance is not positive",
            sigma2_b=float(sigma2_b),
            min_total=float(total.min()),
        )
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * total)) - 0.5 * np.sum(v ** 2 / total))


def _score(sigma2_b: float, v: np.ndarray, deltas: np.ndarray) -> float:
    total = sigma2_b + deltas
    return float(0.5 * np.sum(v ** 2 / total ** 2 - 1.0 / total))


def profile_loglik(
    sigma2_b: float,
    ds: AreaDataset,
    beta0: float,
    beta1: np.ndarray,
    deltas: np.ndarray | None = None,
) -> float:
    """Log-likelihood of sigma2_b with beta fixed.

    Args:
        sigma2_b: Random-effect variance (>= 0)
        ds: Area dataset
        beta0, beta1: Regression coefficients held fixed
        deltas: Residual error variances; computed from ds and beta1 when omitted
    """
    if deltas is None:
        deltas = delta_variances(ds, beta1)
    return _loglik(sigma2_b, residuals(ds, beta0, beta1), deltas)


@dataclass
class ScalarMaximum:
    """Result of a bounded one-dimensional maximization."""
    value: float
    objective: float
    evaluations: int


def search_upper_bound(v: np.ndarray) -> float:
    variance = float(np.var(v, ddof=1)) if v.shape[0] > 1 else 0.0
    return max(1.0, 10.0 * variance)


def _polish_root(score: Callable[[float], float], x: float, upper: float) -> float:
    step = max(1e-6, 1e-3 * x)
    lo, hi = max(0.0, x - step), min(upper, x + step)
    try:
        if not score(lo) > 0.0 > score(hi):
            return x
    except NumericalError:
        return x
    return float(brentq(score, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200))


def maximize_on_interval(
    objective: Callable[[float], float],
    upper: float,
    score: Callable[[float], float] | None = None,
) -> ScalarMaximum:
    """Maximize a smooth objective on [0, upper].

    Bounded golden-section/parabolic search, optionally refined on the score,
    followed by an explicit comparison with both endpoints so a boundary
    maximum is returned exactly.
    """
    result = minimize_scalar(
        lambda s: -objective(s),
        bounds=(0.0, upper),
        method="bounded",
        options={"xatol": OPTIMIZER_XATOL, "maxiter": 500},
    )
    best = float(result.x)
    if score is not None:
        best = _polish_root(score, best, upper)

    chosen: ScalarMaximum | None = None
    for candidate in (0.0, best, upper):
        try:
            value = objective(candidate)
        except NonPositiveTotalVariance:
            continue
        if chosen is None or value > chosen.objective:
            chosen = ScalarMaximum(value=candidate, objective=value, evaluations=int(result.nfev))
    if chosen is None:
        raise NonPositiveTotalVariance("objective undefined on the whole search interval")
    return chosen


def _maximize_sigma2_b(v: np.ndarray, deltas: np.ndarray) -> tuple[ScalarMaximum, float]:
    upper = search_upper_bound(v)
    best = maximize_on_interval(
        lambda s: _loglik(s, v, deltas),
        upper,
        score=lambda s: _score(s, v, deltas),
    )
    return best, upper


def estimate_sigma2_b_ml(ds: AreaDataset, beta0: float, beta1: np.ndarray) -> float:
    """Maximizer of the profile likelihood over [0, max(1, 10 var(v))]."""
    deltas, _ = clamp_deltas(delta_variances(ds, beta1), ds.psi_ee)
    best, _ = _maximize_sigma2_b(residuals(ds, beta0, beta1), deltas)
    return best.value


# ============== Full Fit ==============

def fit_mecor(ds: AreaDataset) -> FitResult:
    """Moment estimator of beta followed by the ML estimator of sigma2_b."""
    moments = compute_moments(ds)
    beta0, beta1, condition = solve_moments(moments)

    v = residuals(ds, beta0, beta1)
    deltas, n_clamped = clamp_deltas(delta_variances(ds, beta1), ds.psi_ee)
    yl_value = sigma2_b_yl(ds, beta0, beta1)
    best, upper = _maximize_sigma2_b(v, deltas)

    logger.debug(
        f"ME-Cor fit n={ds.n}: beta0={beta0:.6g}, beta1={beta1.tolist()}, "
        f"sigma2_b={best.value:.6g} (cond={condition:.3g}, nfev={best.evaluations})"
    )
    return FitResult(
        params=ModelParams(beta0=beta0, beta1=beta1, sigma2_b=best.value),
        sigma2_b_yl=yl_value,
        loglik=best.objective,
        n_areas=ds.n,
        method=Method.MECOR,
        diagnostics={
            "moment_condition_number": condition,
            "optimizer_evaluations": float(best.evaluations),
            "delta_clamped": float(n_clamped),
            "search_upper": upper,
        },
    )
