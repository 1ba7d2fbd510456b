"""CSV and JSON readers/writers for area, unit, prediction and MSPE files.

Writers are deterministic: fixed column order, "%.15g" floats, "\\n" line
endings and no timestamps, so re-running a command reproduces its bytes.
A path of "-" means stdout.
"""
import json
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger

from .errors import SchemaError
from .types import AreaObservation, ErrorCov, Method, MspeRecord, PredictionRecord, UnitRecord

logger = logger.bind(module="sae.io")

FLOAT_FORMAT = "%.15g"
PREDICTION_COLUMNS = ["area_id", "y", "theta_hat", "v", "e_hat", "m1", "shrink_coef"]
MSPE_COLUMNS = ["area_id", "theta_hat", "m1", "m2_jk", "bias_jk", "mspe", "mspe_lb", "lb_applied"]
UNIT_COLUMNS = ["area_id", "w_raw", "y_raw"]


def area_columns(p: int) -> list[str]:
    """Header of an area-level CSV with p covariates."""
    return [
        "area_id",
        "y",
        *[f"w_{j + 1}" for j in range(p)],
        *[f"psi_uu_{j + 1}{k + 1}" for j in range(p) for k in range(j, p)],
        *[f"psi_ue_{j + 1}" for j in range(p)],
        "psi_ee",
    ]


def _read_frame(path: str | Path, required: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"area_id": str}, skipinitialspace=True)
    except FileNotFoundError:
        raise SchemaError(f"file not found: {path}", path=str(path))
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SchemaError(f"cannot parse {path}: {e}", path=str(path))
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path} is missing columns {missing}", path=str(path), missing=missing)
    if frame["area_id"].isna().any():
        raise SchemaError(f"{path} has rows without area_id", path=str(path))
    return frame


def _numeric(frame: pd.DataFrame, columns: Sequence[str], path: str | Path) -> np.ndarray:
    try:
        return frame[list(columns)].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise SchemaError(f"non-numeric value in {path}: {e}", path=str(path))


def _infer_p(columns: Sequence[str]) -> int:
    p = 0
    while f"w_{p + 1}" in columns:
        p += 1
    if p == 0:
        raise SchemaError("area file has no covariate columns w_1..w_p")
    return p


# ============== Area Files ==============

def read_area_csv(path: str | Path) -> tuple[list[AreaObservation], dict[str, int]]:
    """Read an area-level CSV.

    Returns:
        (observations in file order, n_i by area_id when the optional n_i column is present)
    """
    header = _read_frame(path, ["area_id", "y", "w_1"])
    p = _infer_p(list(header.columns))
    columns = area_columns(p)
    missing = [c for c in columns if c not in header.columns]
    if missing:
        raise SchemaError(f"{path} is missing columns {missing}", path=str(path), missing=missing)
    if header.empty:
        raise SchemaError(f"{path} has no data rows", path=str(path))

    values = _numeric(header, columns[1:], path)
    iu = np.triu_indices(p)
    observations = []
    for row, area_id in zip(values, header["area_id"]):
        w = row[1:1 + p]
        upper = row[1 + p:1 + p + len(iu[0])]
        psi_uu = np.zeros((p, p))
        psi_uu[iu] = upper
        psi_uu = psi_uu + np.triu(psi_uu, 1).T
        psi_ue = row[1 + p + len(iu[0]):1 + 2 * p + len(iu[0])]
        observations.append(
            AreaObservation(
                area_id=area_id,
                y=row[0],
                w=w,
                psi=ErrorCov(psi_uu=psi_uu, psi_ue=psi_ue, psi_ee=row[-1]),
            )
        )

    sizes: dict[str, int] = {}
    if "n_i" in header.columns:
        n_i = _numeric(header, ["n_i"], path)[:, 0]
        sizes = {str(a): int(n) for a, n in zip(header["area_id"], n_i)}
    logger.debug(f"Read {len(observations)} areas (p={p}) from {path}")
    return observations, sizes


def write_area_csv(
    path: str | Path,
    observations: Sequence[AreaObservation],
    sizes: dict[str, int] | None = None,
) -> None:
    p = observations[0].p
    iu = np.triu_indices(p)
    rows = []
    for obs in observations:
        row: list[Any] = [obs.area_id, obs.y, *obs.w, *obs.psi.psi_uu[iu], *obs.psi.psi_ue, obs.psi.psi_ee]
        if sizes is not None:
            row.append(sizes[obs.area_id])
        rows.append(row)
    columns = area_columns(p) + (["n_i"] if sizes is not None else [])
    _write_frame(pd.DataFrame(rows, columns=columns), path)


# ============== Unit Files ==============

def read_unit_csv(path: str | Path) -> list[UnitRecord]:
    """Read unit-level survey records; design weights are ignored."""
    frame = _read_frame(path, UNIT_COLUMNS)
    weight_columns = [c for c in frame.columns if "weight" in c.lower()]
    if weight_columns:
        logger.warning(f"Ignoring design weight columns {weight_columns}: units treated as a simple random sample")
    values = _numeric(frame, ["w_raw", "y_raw"], path)
    return [
        UnitRecord(area_id=str(area_id), w_raw=float(w), y_raw=float(y))
        for area_id, (w, y) in zip(frame["area_id"], values)
    ]


# ============== Result Files ==============

def _write_frame(frame: pd.DataFrame, path: str | Path) -> None:
    options = dict(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if str(path) == "-":
        frame.to_csv(sys.stdout, **options)
    else:
        frame.to_csv(path, **options)


def predictions_frame(records: Sequence[PredictionRecord], method: Method) -> pd.DataFrame:
    frame = pd.DataFrame([r.to_dict() for r in records], columns=PREDICTION_COLUMNS)
    frame["method"] = method.value
    return frame


def mspe_frame(records: Sequence[MspeRecord], method: Method) -> pd.DataFrame:
    frame = pd.DataFrame([r.to_dict() for r in records], columns=MSPE_COLUMNS)
    frame["method"] = method.value
    return frame


def write_frame_csv(path: str | Path, frame: pd.DataFrame) -> None:
    _write_frame(frame, path)


def read_mspe_csv(path: str | Path) -> pd.DataFrame:
    frame = _read_frame(path, MSPE_COLUMNS)
    _numeric(frame, MSPE_COLUMNS[1:-1], path)
    return frame


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def dumps_json(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, default=_json_default) + "\n"


def write_json(path: str | Path, data: Any) -> None:
    text = dumps_json(data)
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
