"""Validated area-level datasets.

An AreaDataset stacks the per-area observations into arrays so that the
estimators can work on whole columns at once. Instances are immutable; every
transformation returns a new dataset.
"""
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger

from .errors import DimensionMismatch, NonFiniteValue, NonPSDCovariance, SchemaError, TooFewAreas
from .types import AreaObservation, ErrorCov

logger = logger.bind(module="sae.dataset")

PSD_TOLERANCE = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class AreaDataset:
    """Column-stacked area observations with a fixed covariate dimension p."""
    area_ids: tuple[str, ...]
    y: np.ndarray          # (n,)
    w: np.ndarray          # (n, p)
    psi_uu: np.ndarray     # (n, p, p)
    psi_ue: np.ndarray     # (n, p)
    psi_ee: np.ndarray     # (n,)

    def __post_init__(self):
        object.__setattr__(self, "area_ids", tuple(str(a) for a in self.area_ids))
        for name in ("y", "w", "psi_uu", "psi_ue", "psi_ee"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.w.shape[1]

    @classmethod
    def from_observations(cls, observations: Sequence[AreaObservation]) -> "AreaDataset":
        """Stack observations, checking that p agrees everywhere."""
        if not observations:
            raise TooFewAreas("dataset is empty", n=0)
        p = observations[0].p
        for obs in observations:
            if obs.p != p or obs.psi.p != p or obs.psi.psi_uu.shape != (p, p):
                raise DimensionMismatch(
                    f"area {obs.area_id} has covariate dimension {obs.p} "
                    f"(covariance p={obs.psi.p}), expected {p}",
                    area_id=obs.area_id,
                )
        return cls(
            area_ids=tuple(obs.area_id for obs in observations),
            y=np.array([obs.y for obs in observations]),
            w=np.stack([obs.w for obs in observations]),
            psi_uu=np.stack([obs.psi.psi_uu for obs in observations]),
            psi_ue=np.stack([obs.psi.psi_ue for obs in observations]),
            psi_ee=np.array([obs.psi.psi_ee for obs in observations]),
        )

    def observation(self, index: int) -> AreaObservation:
        return AreaObservation(
            area_id=self.area_ids[index],
            y=self.y[index],
            w=self.w[index],
            psi=ErrorCov(
                psi_uu=self.psi_uu[index],
                psi_ue=self.psi_ue[index],
                psi_ee=self.psi_ee[index],
            ),
        )

    def observations(self) -> Iterator[AreaObservation]:
        for index in range(self.n):
            yield self.observation(index)

    def subset(self, indices: Sequence[int] | np.ndarray) -> "AreaDataset":
        indices = np.asarray(indices, dtype=int)
        return AreaDataset(
            area_ids=tuple(self.area_ids[i] for i in indices),
            y=self.y[indices],
            w=self.w[indices],
            psi_uu=self.psi_uu[indices],
            psi_ue=self.psi_ue[indices],
            psi_ee=self.psi_ee[indices],
        )

    def drop(self, index: int) -> "AreaDataset":
        """Dataset with area `index` omitted."""
        keep = np.delete(np.arange(self.n), index)
        return self.subset(keep)

    def with_psi_ue_zeroed(self) -> "AreaDataset":
        """Same data with the measurement/sampling error covariance set to zero."""
        return AreaDataset(
            area_ids=self.area_ids,
            y=self.y,
            w=self.w,
            psi_uu=self.psi_uu,
            psi_ue=np.zeros_like(self.psi_ue),
            psi_ee=self.psi_ee,
        )

    def without_measurement_error(self) -> "AreaDataset":
        """Same data treating W_i as error free (Fay-Herriot view)."""
        return AreaDataset(
            area_ids=self.area_ids,
            y=self.y,
            w=self.w,
            psi_uu=np.zeros_like(self.psi_uu),
            psi_ue=np.zeros_like(self.psi_ue),
            psi_ee=self.psi_ee,
        )

    def full_covariances(self) -> np.ndarray:
        """(n, p+1, p+1) stack of assembled Psi_i."""
        n, p = self.n, self.p
        full = np.empty((n, p + 1, p + 1))
        full[:, :p, :p] = self.psi_uu
        full[:, :p, p] = self.psi_ue
        full[:, p, :p] = self.psi_ue
        full[:, p, p] = self.psi_ee
        return full


def _check_finite(ds: AreaDataset) -> None:
    for name in ("y", "w", "psi_uu", "psi_ue", "psi_ee"):
        values = getattr(ds, name)
        bad = ~np.isfinite(values.reshape(ds.n, -1)).all(axis=1)
        if bad.any():
            area_id = ds.area_ids[int(np.argmax(bad))]
            raise NonFiniteValue(f"non-finite {name} in area {area_id}", area_id=area_id, field=name)


def _check_psd(ds: AreaDataset) -> None:
    full = ds.full_covariances()
    scale = 1.0 + np.abs(full).reshape(ds.n, -1).max(axis=1)
    asym = np.abs(ds.psi_uu - np.swapaxes(ds.psi_uu, 1, 2)).reshape(ds.n, -1).max(axis=1, initial=0.0)
    diag_uu = np.diagonal(ds.psi_uu, axis1=1, axis2=2)
    eigen = np.linalg.eigvalsh(full)
    trace = np.abs(np.trace(full, axis1=1, axis2=2))

    for i, area_id in enumerate(ds.area_ids):
        if asym[i] > PSD_TOLERANCE * scale[i]:
            raise NonPSDCovariance(f"psi_uu of area {area_id} is not symmetric", area_id=area_id)
        if ds.psi_ee[i] < 0 or (diag_uu[i] < 0).any():
            raise NonPSDCovariance(f"negative variance in area {area_id}", area_id=area_id)
        if eigen[i].min() < -PSD_TOLERANCE * trace[i]:
            raise NonPSDCovariance(
                f"covariance of area {area_id} is not positive semi-definite "
                f"(min eigenvalue {eigen[i].min():.3g})",
                area_id=area_id,
            )


def validate_dataset(data: Sequence[AreaObservation] | AreaDataset) -> AreaDataset:
    """Check the dataset invariants and return the stacked dataset.

    Accepts either raw observations or an already stacked dataset, so calling
    it twice is harmless.
    """
    ds = data if isinstance(data, AreaDataset) else AreaDataset.from_observations(list(data))
    if ds.n == 0:
        raise TooFewAreas("dataset is empty", n=0)
    if ds.w.ndim != 2 or ds.psi_uu.shape != (ds.n, ds.p, ds.p) or ds.psi_ue.shape != (ds.n, ds.p):
        raise DimensionMismatch("array shapes disagree with n and p", n=ds.n, p=ds.p)
    if len(set(ds.area_ids)) != ds.n:
        raise SchemaError("area_id values must be unique")
    _check_finite(ds)
    _check_psd(ds)
    logger.debug(f"Validated dataset: n={ds.n}, p={ds.p}")
    return ds
