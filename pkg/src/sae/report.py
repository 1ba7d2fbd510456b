"""Direct standard errors against model RMSPEs, and the y-vs-w scatter of the input areas."""
import xml.etree.ElementTree as ET
from collections.abc import Sequence
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger

from .errors import SchemaError
from .types import AreaObservation

logger = logger.bind(module="sae.report")

COMPARISON_COLUMNS = ["area_id", "n_i", "se_direct", "rmspe", "ratio"]

BAR_WIDTH = 6
BAR_GAP = 4
CHART_HEIGHT = 240
MARGIN = 30


def comparison_table(
    observations: Sequence[AreaObservation],
    mspe: pd.DataFrame,
    sizes: dict[str, int] | None = None,
) -> pd.DataFrame:
    """Per-area sqrt(psi_ee) vs sqrt(mspe_lb).

    Rows are sorted by ascending n_i when sample sizes are known, otherwise
    by descending psi_ee (the usual proxy for small samples).
    """
    by_id = {str(a): float(v) for a, v in zip(mspe["area_id"], mspe["mspe_lb"])}
    area_ids = [obs.area_id for obs in observations]
    if set(by_id) != set(area_ids):
        missing = sorted(set(area_ids) ^ set(by_id))
        raise SchemaError("area ids of the MSPE file do not match the area file", mismatched=missing[:10])
    if sizes and set(sizes) != set(area_ids):
        raise SchemaError("n_i column does not cover every area")

    psi_ee = np.array([obs.psi.psi_ee for obs in observations])
    mspe_lb = np.array([by_id[a] for a in area_ids])
    frame = pd.DataFrame({
        "area_id": area_ids,
        "n_i": [sizes[a] for a in area_ids] if sizes else [pd.NA] * len(area_ids),
        "se_direct": np.sqrt(psi_ee),
        "rmspe": np.sqrt(np.clip(mspe_lb, 0.0, None)),
    })
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["ratio"] = frame["rmspe"] / frame["se_direct"]

    if sizes:
        frame = frame.sort_values(["n_i", "area_id"], kind="mergesort")
    else:
        frame = frame.assign(_psi=psi_ee).sort_values(["_psi", "area_id"], ascending=[False, True], kind="mergesort")
        frame = frame.drop(columns="_psi")
    return frame.reset_index(drop=True)[COMPARISON_COLUMNS]


def summarize(frame: pd.DataFrame, mspe: pd.DataFrame) -> dict[str, Any]:
    finite = frame["ratio"].replace([np.inf, -np.inf], np.nan).dropna()
    lb_applied = mspe.loc[mspe["lb_applied"].astype(str).str.lower() == "true", "area_id"]
    nonpositive = mspe.loc[~(mspe["mspe_lb"].astype(float) > 0.0), "area_id"]
    return {
        "n_areas": int(len(frame)),
        "mean_ratio": float(finite.mean()) if len(finite) else None,
        "median_ratio": float(finite.median()) if len(finite) else None,
        "n_rmspe_below_se": int((frame["rmspe"] < frame["se_direct"]).sum()),
        "lb_applied_areas": sorted(str(a) for a in lb_applied),
        "nonpositive_mspe_areas": sorted(str(a) for a in nonpositive),
    }


def render_svg(frame: pd.DataFrame) -> str:
    """Grouped bar chart: one (direct, model) pair of bars per area."""
    n = len(frame)
    top = float(np.nanmax(np.concatenate([frame["se_direct"].to_numpy(float), frame["rmspe"].to_numpy(float), [0.0]])))
    scale = (CHART_HEIGHT - 2 * MARGIN) / top if top > 0 else 0.0
    width = 2 * MARGIN + n * (2 * BAR_WIDTH + BAR_GAP)
    baseline = CHART_HEIGHT - MARGIN

    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": str(width),
        "height": str(CHART_HEIGHT),
        "viewBox": f"0 0 {width} {CHART_HEIGHT}",
    })
    ET.SubElement(svg, "title").text = "Direct standard error vs model RMSPE by area"
    ET.SubElement(svg, "line", {
        "x1": str(MARGIN), "y1": str(baseline),
        "x2": str(width - MARGIN), "y2": str(baseline),
        "stroke": "black",
    })
    for k, row in enumerate(frame.itertuples(index=False)):
        x = MARGIN + k * (2 * BAR_WIDTH + BAR_GAP)
        group = ET.SubElement(svg, "g", {"id": f"area-{row.area_id}"})
        for offset, cls, value, color in (
            (0, "direct", row.se_direct, "#d62728"),
            (BAR_WIDTH, "model", row.rmspe, "#1f77b4"),
        ):
            height = float(value) * scale if np.isfinite(value) else 0.0
            rect = ET.SubElement(group, "rect", {
                "class": cls,
                "x": str(x + offset),
                "y": f"{baseline - height:.3f}",
                "width": str(BAR_WIDTH),
                "height": f"{height:.3f}",
                "fill": color,
            })
            ET.SubElement(rect, "title").text = f"{row.area_id} {cls}: {float(value):.6g}"

    legend = ET.SubElement(svg, "g", {"id": "legend"})
    for k, (label, color) in enumerate((("direct SE", "#d62728"), ("model RMSPE", "#1f77b4"))):
        ET.SubElement(legend, "rect", {
            "x": str(MARGIN + 110 * k), "y": "8", "width": "10", "height": "10", "fill": color,
        })
        ET.SubElement(legend, "text", {
            "x": str(MARGIN + 110 * k + 14), "y": "17", "font-size": "11",
        }).text = label
    return ET.tostring(svg, encoding="unicode") + "\n"


def scatter_frame(observations: Sequence[AreaObservation]) -> pd.DataFrame:
    """Direct estimate Y_i against every observed covariate W_ij."""
    p = len(observations[0].w) if observations else 0
    frame = pd.DataFrame({"area_id": [obs.area_id for obs in observations]})
    for j in range(p):
        frame[f"w_{j + 1}"] = [float(obs.w[j]) for obs in observations]
    frame["y"] = [float(obs.y) for obs in observations]
    return frame


def render_scatter_svg(frame: pd.DataFrame) -> str:
    """Scatter of y against the first covariate, one circle per area."""
    width = height = CHART_HEIGHT
    x = frame["w_1"].to_numpy(float)
    y = frame["y"].to_numpy(float)

    def axis(values: np.ndarray, lo_px: float, hi_px: float):
        lo, hi = (float(values.min()), float(values.max())) if len(values) else (0.0, 1.0)
        span = hi - lo if hi > lo else 1.0
        return lambda value: lo_px + (value - lo) / span * (hi_px - lo_px)

    to_x = axis(x, MARGIN, width - MARGIN)
    to_y = axis(y, height - MARGIN, MARGIN)

    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": str(width),
        "height": str(height),
        "viewBox": f"0 0 {width} {height}",
    })
    ET.SubElement(svg, "title").text = "Direct estimate y against covariate w_1"
    ET.SubElement(svg, "line", {
        "x1": str(MARGIN), "y1": str(height - MARGIN),
        "x2": str(width - MARGIN), "y2": str(height - MARGIN),
        "stroke": "black",
    })
    ET.SubElement(svg, "line", {
        "x1": str(MARGIN), "y1": str(MARGIN),
        "x2": str(MARGIN), "y2": str(height - MARGIN),
        "stroke": "black",
    })
    points = ET.SubElement(svg, "g", {"id": "areas"})
    for row, xi, yi in zip(frame.itertuples(index=False), x, y):
        circle = ET.SubElement(points, "circle", {
            "cx": f"{to_x(xi):.3f}",
            "cy": f"{to_y(yi):.3f}",
            "r": "3",
            "fill": "#1f77b4",
        })
        ET.SubElement(circle, "title").text = f"{row.area_id}: w_1={xi:.6g}, y={yi:.6g}"
    return ET.tostring(svg, encoding="unicode") + "\n"
