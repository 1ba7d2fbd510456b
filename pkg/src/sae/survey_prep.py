"""Unit-level survey records to area-level observations.

Each area is treated as a simple random sample. Area means are log-transformed
and the delta-method covariance of the log means is smoothed by pooling the
within-area covariances across areas, so that Psi_i = Psi_pooled / n_i.
Variable order everywhere is (w, y): covariate first, response last.
"""
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from loguru import logger

from .errors import (
    EmptyArea,
    InsufficientDegreesOfFreedom,
    NonPositiveMean,
    SingletonArea,
    TooFewAreas,
)
from .types import ErrorCov, PreparedArea, UnitRecord

logger = logger.bind(module="sae.survey_prep")


@dataclass
class AreaSummary:
    """Sample size and simple means (W~_i, Y~_i) of one area."""
    area_id: str
    n_i: int
    w_mean: float
    y_mean: float


@dataclass
class PrepResult:
    """Prepared areas with the pooled covariance and its diagnostics."""
    areas: list[PreparedArea]
    pooled_psi: np.ndarray
    cor_ue: float
    var_ratio: float
    singleton_areas: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pooled_psi": self.pooled_psi.tolist(),
            "cor_ue": self.cor_ue,
            "var_ratio": self.var_ratio,
            "n_areas": len(self.areas),
            "singleton_areas": self.singleton_areas,
        }


def group_units(units: Iterable[UnitRecord]) -> dict[str, np.ndarray]:
    """(n_i, 2) arrays of (w_raw, y_raw) keyed by area_id, in sorted id order."""
    grouped: dict[str, list[tuple[float, float]]] = {}
    for unit in units:
        grouped.setdefault(unit.area_id, []).append((unit.w_raw, unit.y_raw))
    return {
        area_id: np.array(grouped[area_id], dtype=float).reshape(-1, 2)
        for area_id in sorted(grouped)
    }


def area_means(area_id: str, values: np.ndarray) -> AreaSummary:
    """Simple means of one area's unit values."""
    values = np.asarray(values, dtype=float).reshape(-1, 2)
    if values.shape[0] == 0:
        raise EmptyArea(f"area {area_id} has no units", area_id=area_id)
    w_mean, y_mean = values.mean(axis=0)
    return AreaSummary(area_id=area_id, n_i=values.shape[0], w_mean=float(w_mean), y_mean=float(y_mean))


def within_area_cov(area_id: str, values: np.ndarray) -> np.ndarray:
    """2x2 sample covariance of (w, y) with divisor n_i - 1."""
    values = np.asarray(values, dtype=float).reshape(-1, 2)
    if values.shape[0] == 0:
        raise EmptyArea(f"area {area_id} has no units", area_id=area_id)
    if values.shape[0] < 2:
        raise SingletonArea(f"area {area_id} has a single unit", area_id=area_id)
    return np.cov(values, rowvar=False, ddof=1)


def delta_transform(sigma: np.ndarray, w_mean: float, y_mean: float, area_id: str = "") -> np.ndarray:
    """D Sigma D with D = diag(1/W~, 1/Y~): covariance on the log scale."""
    if w_mean <= 0 or y_mean <= 0:
        raise NonPositiveMean(
            f"area {area_id} has nonpositive mean (w={w_mean:.6g}, y={y_mean:.6g}); "
            "the log transform needs positive values",
            area_id=area_id,
        )
    d = np.array([1.0 / w_mean, 1.0 / y_mean])
    out = np.asarray(sigma, dtype=float) * np.outer(d, d)
    return 0.5 * (out + out.T)


def pool_psi(psi_tilde: Sequence[np.ndarray], n_i: Sequence[int]) -> np.ndarray:
    """Degrees-of-freedom weighted pool sum (n_i - 1) Psi~_i / (sum n_i - D).

    Entries of psi_tilde for areas with n_i = 1 get weight 0 and may be None.
    """
    n_i = np.asarray(n_i, dtype=int)
    dof = int(n_i.sum() - n_i.shape[0])
    if dof <= 0:
        raise InsufficientDegreesOfFreedom(
            "pooling needs at least one area with two or more units",
            total_units=int(n_i.sum()),
            n_areas=int(n_i.shape[0]),
        )
    pooled = np.zeros((2, 2))
    for psi, n in zip(psi_tilde, n_i):
        if n > 1:
            pooled += (n - 1) * np.asarray(psi, dtype=float)
    return pooled / dof


def prepare(units: Iterable[UnitRecord]) -> PrepResult:
    """Full pipeline: means, delta-method covariances, pooling and the log transform."""
    grouped = group_units(units)
    if len(grouped) < 2:
        raise TooFewAreas(f"need at least 2 areas, got {len(grouped)}", n=len(grouped))

    summaries: list[AreaSummary] = []
    psi_tilde: list[np.ndarray | None] = []
    singletons: list[str] = []
    for area_id, values in grouped.items():
        if (values <= 0).any():
            raise NonPositiveMean(f"area {area_id} has nonpositive unit values", area_id=area_id)
        summary = area_means(area_id, values)
        summaries.append(summary)
        try:
            sigma = within_area_cov(area_id, values)
        except SingletonArea:
            singletons.append(area_id)
            psi_tilde.append(None)
            continue
        psi_tilde.append(delta_transform(sigma, summary.w_mean, summary.y_mean, area_id))

    if singletons:
        logger.warning(f"{len(singletons)} singleton areas excluded from pooling: {singletons}")

    pooled = pool_psi(psi_tilde, [s.n_i for s in summaries])
    denom = float(np.sqrt(pooled[0, 0] * pooled[1, 1]))
    cor_ue = float(pooled[0, 1] / denom) if denom > 0 else float("nan")
    var_ratio = float(pooled[0, 0] / pooled[1, 1]) if pooled[1, 1] > 0 else float("nan")

    areas = [
        PreparedArea(
            area_id=s.area_id,
            n_i=s.n_i,
            y=float(np.log(s.y_mean)),
            w=float(np.log(s.w_mean)),
            psi=ErrorCov.from_matrix(pooled / s.n_i),
        )
        for s in summaries
    ]
    logger.info(
        f"Prepared {len(areas)} areas from {sum(s.n_i for s in summaries)} units "
        f"(cor_ue={cor_ue:.4g}, var_ratio={var_ratio:.4g})"
    )
    return PrepResult(
        areas=areas,
        pooled_psi=pooled,
        cor_ue=cor_ue,
        var_ratio=var_ratio,
        singleton_areas=singletons,
    )
