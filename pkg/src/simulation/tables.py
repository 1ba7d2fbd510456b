"""Table-style CSV layouts of simulation results, one file per (dist, pattern) family."""
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from ..sae.io import write_frame_csv, write_json
from ..sae.types import Method, ModelParams
from .runner import MODEL_METHODS, SimResult

logger = logger.bind(module="simulation.tables")

PARAM_COLUMNS = ["method", "param", "a", "b", "rho", "n", "mc_mean", "mc_sd"]
MSPE_COLUMNS = ["a", "b", "rho", "n", "direct", "mecor", "yl", "fh", "mecor_mspe", "fh_mspe"]
PER_AREA_COLUMNS = ["a", "b", "rho", "n", "area", "block", "psi_ee", "direct", "mecor", "yl", "fh"]


def _design(result: SimResult) -> dict[str, float]:
    c = result.config
    return {"a": c.a, "b": c.b, "rho": c.rho, "n": c.n}


def params_table(results: Sequence[SimResult]) -> pd.DataFrame:
    """MC mean and SD of every parameter estimate, by method and config."""
    rows = []
    for method in MODEL_METHODS:
        for result in results:
            summary = result.summaries.get(method)
            if summary is None or summary.mc_mean is None:
                continue
            names = ModelParams.names(summary.mc_mean.p)
            for name, mean, sd in zip(names, summary.mc_mean.to_vector(), summary.mc_sd.to_vector()):
                rows.append({"method": method.value, "param": name, **_design(result), "mc_mean": mean, "mc_sd": sd})
    return pd.DataFrame(rows, columns=PARAM_COLUMNS)


def mspe_table(results: Sequence[SimResult]) -> pd.DataFrame:
    """Average MC MSPE of each predictor plus the MC mean of the MSPE estimators."""
    def _avg(result: SimResult, method: Method) -> float:
        summary = result.summaries.get(method)
        return summary.mc_mspe_avg if summary else np.nan

    def _est(result: SimResult, method: Method) -> float:
        summary = result.summaries.get(method)
        return summary.mc_mean_est_mspe if summary else np.nan

    rows = [
        {
            **_design(r),
            "direct": _avg(r, Method.DIRECT),
            "mecor": _avg(r, Method.MECOR),
            "yl": _avg(r, Method.YL),
            "fh": _avg(r, Method.FH),
            "mecor_mspe": _est(r, Method.MECOR),
            "fh_mspe": _est(r, Method.FH),
        }
        for r in results
    ]
    return pd.DataFrame(rows, columns=MSPE_COLUMNS)


def per_area_table(results: Sequence[SimResult]) -> pd.DataFrame:
    """Per-area MC MSPE behind the averages of mspe_table."""
    frames = []
    for r in results:
        frame = pd.DataFrame({
            "area": np.arange(1, r.config.n + 1),
            "block": r.blocks,
            "psi_ee": r.psi_ee,
        })
        for key, value in _design(r).items():
            frame[key] = value
        for method in (Method.DIRECT, *MODEL_METHODS):
            summary = r.summaries.get(method)
            frame[method.value] = summary.per_area_mspe if summary else np.nan
        frames.append(frame[PER_AREA_COLUMNS])
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=PER_AREA_COLUMNS)


def write_tables(results: Sequence[SimResult], output_dir: str | Path) -> list[Path]:
    """Write table_params_<family>.csv, table_mspe_<family>.csv, per_area_<family>.csv and simulation.json."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    families: dict[str, list[SimResult]] = {}
    for result in results:
        families.setdefault(result.config.family, []).append(result)

    written = []
    for family, members in families.items():
        for stem, frame in (
            ("table_params", params_table(members)),
            ("table_mspe", mspe_table(members)),
            ("per_area", per_area_table(members)),
        ):
            path = output_dir / f"{stem}_{family}.csv"
            write_frame_csv(path, frame)
            written.append(path)

    summary_path = output_dir / "simulation.json"
    write_json(summary_path, {"results": [r.to_dict() for r in results]})
    written.append(summary_path)
    logger.info(f"Wrote {len(written)} simulation files to {output_dir}")
    return written
