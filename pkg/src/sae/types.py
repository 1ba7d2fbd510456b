"""Core type definitions for the area-level measurement error model.

This module defines:
- Enums for methods, simulation distributions, Psi patterns and jackknife scaling
- Value objects for areas and their error covariance (ErrorCov, AreaObservation)
- Parameter, fit, prediction and MSPE records shared by every other module
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


# ============== Enums ==============

class Method(str, Enum):
    """Estimation and prediction procedure."""
    MECOR = "mecor"     # Correlated measurement/sampling error model
    YL = "yl"           # Measurement error, errors assumed uncorrelated
    FH = "fh"           # Naive Fay-Herriot, measurement error ignored
    DIRECT = "direct"   # Direct estimator Y_i


class Distribution(str, Enum):
    """Distribution family of the simulated random terms."""
    NORMAL = "normal"
    T5 = "t5"


class PsiPattern(str, Enum):
    """Error covariance layout across simulated areas."""
    UNEQUAL = "unequal"   # Quarter blocks with Psi_1..Psi_4
    EQUAL = "equal"       # Psi_1 everywhere


class JkScale(str, Enum):
    """Scaling of jackknife sums of squares."""
    PLAIN = "plain"       # Unscaled sums
    CLASSIC = "classic"   # Conventional (n-1)/n factor

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            key = value.strip().lower()
            if key == "paper":
                return cls.PLAIN
            for member in cls:
                if member.value == key:
                    return member
        return None


def _json_float(value: float) -> float | None:
    """NaN/inf are not valid JSON; emit null instead."""
    value = float(value)
    return value if math.isfinite(value) else None


def _readonly(array: Any, ndim: int) -> np.ndarray:
    out = np.array(array, dtype=float, ndmin=ndim)
    out.setflags(write=False)
    return out


# ============== Area Types ==============

@dataclass(frozen=True, eq=False)
class ErrorCov:
    """Partitioned covariance of (u_i', e_i)' for one area.

    The full (p+1)x(p+1) matrix is [[psi_uu, psi_ue], [psi_ue', psi_ee]]:
    measurement error block first, sampling variance last.
    """
    psi_uu: np.ndarray
    psi_ue: np.ndarray
    psi_ee: float

    def __post_init__(self):
        object.__setattr__(self, "psi_uu", _readonly(self.psi_uu, 2))
        object.__setattr__(self, "psi_ue", _readonly(self.psi_ue, 1))
        object.__setattr__(self, "psi_ee", float(self.psi_ee))

    @property
    def p(self) -> int:
        return self.psi_ue.shape[0]

    def to_matrix(self) -> np.ndarray:
        """Assemble the full (p+1)x(p+1) covariance matrix."""
        p = self.p
        full = np.empty((p + 1, p + 1))
        full[:p, :p] = self.psi_uu
        full[:p, p] = self.psi_ue
        full[p, :p] = self.psi_ue
        full[p, p] = self.psi_ee
        return full

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "ErrorCov":
        """Re-partition a full covariance matrix."""
        matrix = np.asarray(matrix, dtype=float)
        p = matrix.shape[0] - 1
        return cls(
            psi_uu=matrix[:p, :p].copy(),
            psi_ue=matrix[:p, p].copy(),
            psi_ee=matrix[p, p],
        )

    @classmethod
    def scalar(cls, psi_uu: float, psi_ue: float, psi_ee: float) -> "ErrorCov":
        """Shortcut for a single covariate."""
        return cls(psi_uu=[[psi_uu]], psi_ue=[psi_ue], psi_ee=psi_ee)

    def to_dict(self) -> dict[str, Any]:
        return {
            "psi_uu": self.psi_uu.tolist(),
            "psi_ue": self.psi_ue.tolist(),
            "psi_ee": self.psi_ee,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ErrorCov":
        return cls(
            psi_uu=data["psi_uu"],
            psi_ue=data["psi_ue"],
            psi_ee=data["psi_ee"],
        )


@dataclass(frozen=True, eq=False)
class AreaObservation:
    """Direct estimates (Y_i, W_i) of one area with their known error covariance."""
    area_id: str
    y: float
    w: np.ndarray
    psi: ErrorCov

    def __post_init__(self):
        object.__setattr__(self, "area_id", str(self.area_id))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "w", _readonly(self.w, 1))

    @property
    def p(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Fixed parameters omega = (beta0, beta1', sigma2_b)'."""
    beta0: float
    beta1: np.ndarray
    sigma2_b: float

    def __post_init__(self):
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "beta1", _readonly(self.beta1, 1))
        object.__setattr__(self, "sigma2_b", float(self.sigma2_b))

    @property
    def p(self) -> int:
        return self.beta1.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.beta0], self.beta1, [self.sigma2_b]))

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "ModelParams":
        vector = np.asarray(vector, dtype=float)
        return cls(beta0=vector[0], beta1=vector[1:-1], sigma2_b=vector[-1])

    @staticmethod
    def names(p: int) -> list[str]:
        """Component names in to_vector() order."""
        slopes = ["beta1"] if p == 1 else [f"beta1_{j + 1}" for j in range(p)]
        return ["beta0", *slopes, "sigma2_b"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta0": self.beta0,
            "beta1": self.beta1.tolist(),
            "sigma2_b": self.sigma2_b,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelParams":
        return cls(
            beta0=data["beta0"],
            beta1=data["beta1"],
            sigma2_b=data["sigma2_b"],
        )


@dataclass(frozen=True, eq=False)
class LatentTruth:
    """Unobserved quantities of one simulated area."""
    x: np.ndarray
    b: float
    theta: float

    @classmethod
    def build(cls, params: ModelParams, x: np.ndarray, b: float) -> "LatentTruth":
        x = _readonly(x, 1)
        theta = params.beta0 + float(x @ params.beta1) + float(b)
        return cls(x=x, b=float(b), theta=theta)


# ============== Estimation Types ==============

@dataclass(frozen=True, eq=False)
class MomentStats:
    """Measurement-error corrected sample moments zeta_1..zeta_4."""
    zeta1: np.ndarray
    zeta2: float
    zeta3: np.ndarray
    zeta4: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "zeta1": self.zeta1.tolist(),
            "zeta2": self.zeta2,
            "zeta3": self.zeta3.tolist(),
            "zeta4": self.zeta4.tolist(),
        }


@dataclass
class FitResult:
    """Fitted parameters of one procedure on one dataset."""
    params: ModelParams
    sigma2_b_yl: float          # Moment estimator, untruncated
    loglik: float               # Profile log-likelihood at the optimum
    n_areas: int
    method: Method = Method.MECOR
    diagnostics: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "beta0": self.params.beta0,
            "beta1": self.params.beta1.tolist(),
            "sigma2_b": self.params.sigma2_b,
            "sigma2_b_yl_raw": _json_float(self.sigma2_b_yl),
            "loglik": _json_float(self.loglik),
            "n": self.n_areas,
            "diagnostics": {k: _json_float(v) for k, v in self.diagnostics.items()},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FitResult":
        def _num(value: Any) -> float:
            return float("nan") if value is None else float(value)

        return cls(
            params=ModelParams.from_dict(data),
            sigma2_b_yl=_num(data.get("sigma2_b_yl_raw")),
            loglik=_num(data.get("loglik")),
            n_areas=int(data.get("n", 0)),
            method=Method(data.get("method", "mecor")),
            diagnostics={k: _num(v) for k, v in data.get("diagnostics", {}).items()},
        )


# ============== Prediction Types ==============

@dataclass(frozen=True)
class PredictionRecord:
    """Predictor of theta_i and its leading MSPE term."""
    area_id: str
    y: float
    v: float              # Residual Y_i - beta0 - beta1'W_i
    e_hat: float          # Predicted sampling error
    theta_hat: float      # Y_i - e_hat
    m1: float             # Leading MSPE term at the given parameters
    shrink_coef: float    # Multiplier on v_i in e_hat

    def to_dict(self) -> dict[str, Any]:
        return {
            "area_id": self.area_id,
            "y": self.y,
            "theta_hat": self.theta_hat,
            "v": self.v,
            "e_hat": self.e_hat,
            "m1": self.m1,
            "shrink_coef": self.shrink_coef,
        }


# ============== Jackknife Types ==============

@dataclass
class JackknifeSet:
    """Full fit plus delete-one-area refits."""
    omega_full: ModelParams
    omega_deleted: list[ModelParams] = field(default_factory=list)
    deleted_ids: list[str] = field(default_factory=list)       # Area omitted for each refit
    failed_deletions: list[str] = field(default_factory=list)

    @property
    def n_areas(self) -> int:
        return len(self.omega_deleted) + len(self.failed_deletions)

    @property
    def n_success(self) -> int:
        return len(self.omega_deleted)


@dataclass
class JackknifeCovariance:
    """Jackknife covariance matrix of omega-hat with derived standard errors."""
    matrix: np.ndarray
    names: list[str]
    n_success: int
    n_failed: int = 0

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))

    def to_dict(self) -> dict[str, Any]:
        return {
            "names": self.names,
            "matrix": self.matrix.tolist(),
            "standard_errors": dict(zip(self.names, self.standard_errors.tolist())),
            "n_success": self.n_success,
            "n_failed": self.n_failed,
        }


@dataclass(frozen=True)
class MspeRecord:
    """Estimated MSPE of one area's predictor."""
    area_id: str
    theta_hat: float
    m1_hat: float
    m2_jk: float
    bias_jk: float
    mspe: float
    mspe_lb: float
    lb_applied: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "area_id": self.area_id,
            "theta_hat": self.theta_hat,
            "m1": self.m1_hat,
            "m2_jk": self.m2_jk,
            "bias_jk": self.bias_jk,
            "mspe": self.mspe,
            "mspe_lb": self.mspe_lb,
            "lb_applied": self.lb_applied,
        }


# ============== Survey Types ==============

@dataclass(frozen=True)
class UnitRecord:
    """One sampled unit: raw covariate and response values."""
    area_id: str
    w_raw: float
    y_raw: float


@dataclass(frozen=True, eq=False)
class PreparedArea:
    """Log-scale area estimates with smoothed error covariance."""
    area_id: str
    n_i: int
    y: float
    w: float
    psi: ErrorCov

    def to_observation(self) -> AreaObservation:
        return AreaObservation(area_id=self.area_id, y=self.y, w=[self.w], psi=self.psi)
