"""mecor-sae command line entry point.

Subcommands:
- fit: estimate, predict and (jackknife) MSPE for an area-level CSV
- simulate: Monte Carlo study over a grid file
- prep: unit-level survey records to an area-level CSV
- report: direct SE vs model RMSPE table and bar chart, y-vs-w scatter

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Errors are
printed on stderr as JSON; stdout only ever carries data.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any

from loguru import logger

from .config import settings
from .sae.baselines import fit_fh, fit_yl
from .sae.dataset import validate_dataset
from .sae.errors import SaeError
from .sae.estimation import fit_mecor
from .sae.io import (
    mspe_frame,
    predictions_frame,
    read_area_csv,
    read_mspe_csv,
    read_unit_csv,
    write_area_csv,
    write_frame_csv,
    write_json,
)
from .sae.mspe import jackknife_covariance, jackknife_refits, mspe_estimate, nonpositive_areas
from .sae.prediction import predict_dataset
from .sae.report import comparison_table, render_scatter_svg, render_svg, scatter_frame, summarize
from .sae.survey_prep import prepare
from .sae.types import JkScale, Method
from .simulation import load_grid, run_simulation, write_tables

logger = logger.bind(module="cli")

STDOUT = "-"


def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format="{time:HH:mm:ss} | {level: <7} | {extra[module]} - {message}",
    )
    logger.configure(extra={"module": "sae"})


def _output_dir(args: argparse.Namespace) -> Path | None:
    """None when output goes to stdout."""
    if str(args.output_dir) == STDOUT:
        return None
    path = Path(args.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ============== Commands ==============

def cmd_fit(args: argparse.Namespace) -> dict[str, Any]:
    """Fit one method and write fit.json, predictions.csv and mspe.csv."""
    observations, _ = read_area_csv(args.input)
    ds = validate_dataset(observations)
    method = Method(args.method or settings.method)
    scale = JkScale(args.jk_scale)
    logger.info(f"Fitting {method.value} on {ds.n} areas (p={ds.p}) from {args.input}")

    mspe = None
    if method == Method.MECOR:
        fit = fit_mecor(ds)
        predictions = predict_dataset(ds, fit.params)
        fit_doc = fit.to_dict()
        if not args.no_jackknife:
            jk = jackknife_refits(
                ds,
                threads=args.threads,
                max_failure_rate=settings.max_jk_failure_rate,
                full_fit=fit,
            )
            mspe = mspe_estimate(ds, jk, scale=scale)
            fit_doc["jackknife"] = {
                "scale": scale.value,
                **jackknife_covariance(jk, scale).to_dict(),
                "failed_deletions": jk.failed_deletions,
                "nonpositive_mspe_areas": nonpositive_areas(mspe),
            }
    elif method == Method.YL:
        result = fit_yl(ds)
        fit_doc, predictions = result.fit.to_dict(), result.predictions
    else:
        result = fit_fh(ds)
        fit_doc, predictions, mspe = result.fit.to_dict(), result.predictions, result.mspe

    out = _output_dir(args)
    if out is None:
        write_json(STDOUT, {
            "fit": fit_doc,
            "predictions": predictions_frame(predictions, method).to_dict(orient="records"),
            "mspe": mspe_frame(mspe, method).to_dict(orient="records") if mspe else None,
        })
    else:
        write_json(out / "fit.json", fit_doc)
        write_frame_csv(out / "predictions.csv", predictions_frame(predictions, method))
        if mspe:
            write_frame_csv(out / "mspe.csv", mspe_frame(mspe, method))
        logger.info(f"Wrote fit outputs to {out}")
    return fit_doc


def cmd_simulate(args: argparse.Namespace) -> list:
    """Run every config of a grid file and write the table CSVs."""
    configs = load_grid(args.grid, default_reps=settings.mc_reps, default_seed=settings.seed)
    configs = [
        c.with_overrides(
            mc_reps=args.reps,
            seed=args.seed + index if args.seed is not None else None,
        )
        for index, c in enumerate(configs)
    ]
    if args.methods:
        methods = [Method(m) for m in args.methods]
    elif args.method:
        methods = [Method(args.method)]
    else:
        methods = [Method.MECOR, Method.YL, Method.FH]
    results = []
    for index, config in enumerate(configs, start=1):
        logger.info(f"[{index}/{len(configs)}] {config.label}, {config.mc_reps} replicates")
        results.append(
            run_simulation(
                config,
                methods=methods,
                threads=args.threads,
                estimate_mspe=not args.no_mspe,
                jk_scale=JkScale(args.jk_scale),
                max_failure_rate=settings.max_sim_failure_rate,
            )
        )

    out = _output_dir(args)
    if out is None:
        write_json(STDOUT, {"results": [r.to_dict() for r in results]})
    else:
        write_tables(results, out)
    return results


def cmd_prep(args: argparse.Namespace) -> dict[str, Any]:
    """Turn unit records into areas.csv plus prep.json."""
    result = prepare(read_unit_csv(args.input))
    observations = [area.to_observation() for area in result.areas]
    sizes = {area.area_id: area.n_i for area in result.areas}

    out = _output_dir(args)
    if out is None:
        write_area_csv(STDOUT, observations, sizes)
    else:
        write_area_csv(out / "areas.csv", observations, sizes)
        write_json(out / "prep.json", result.to_dict())
        logger.info(f"Wrote {len(observations)} areas to {out / 'areas.csv'}")
    return result.to_dict()


def cmd_report(args: argparse.Namespace) -> dict[str, Any]:
    """Compare direct standard errors with model RMSPEs."""
    observations, sizes = read_area_csv(args.areas)
    mspe = read_mspe_csv(args.mspe)
    frame = comparison_table(observations, mspe, sizes or None)
    summary = summarize(frame, mspe)

    out = _output_dir(args)
    if out is None:
        write_frame_csv(STDOUT, frame)
    else:
        write_frame_csv(out / "comparison.csv", frame)
        write_json(out / "report_summary.json", summary)
        (out / "report.svg").write_text(render_svg(frame), encoding="utf-8")
        scatter = scatter_frame(observations)
        write_frame_csv(out / "scatter.csv", scatter)
        (out / "scatter.svg").write_text(render_scatter_svg(scatter), encoding="utf-8")
        logger.info(f"Report for {summary['n_areas']} areas, mean ratio {summary['mean_ratio']}")
    return summary


# ============== Parser ==============

def _jk_scale_arg(value: str) -> str:
    """Canonical JkScale value; argparse also applies this to the env default."""
    try:
        return JkScale(value).value
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid jackknife scale {value!r} (choose from plain, paper, classic)"
        ) from None


def _global_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=None, help=f"Base random seed (default {settings.seed})")
    parent.add_argument("--threads", type=int, default=settings.threads, help="Worker threads")
    parent.add_argument("--output-dir", default=str(settings.output_dir), help="Output directory, or - for stdout")
    parent.add_argument(
        "--jk-scale",
        type=_jk_scale_arg,
        default=settings.jk_scale,
        metavar="{plain,paper,classic}",
        help="Jackknife scaling; paper is an alias of plain",
    )
    parent.add_argument(
        "--method",
        choices=[Method.MECOR.value, Method.YL.value, Method.FH.value],
        default=None,
        help=f"Method to fit (default {settings.method}); restricts simulate when --methods is absent",
    )
    parent.add_argument("--log-level", default=settings.log_level)
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecor-sae",
        description="Small area estimation with correlated measurement and sampling errors",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    parent = _global_flags()

    fit = subparsers.add_parser("fit", parents=[parent], help="Fit, predict and estimate MSPE")
    fit.add_argument("input", help="Area-level CSV")
    fit.add_argument("--no-jackknife", action="store_true", help="Skip the jackknife MSPE")
    fit.set_defaults(handler=cmd_fit)

    simulate = subparsers.add_parser("simulate", parents=[parent], help="Run a Monte Carlo grid")
    simulate.add_argument("grid", help="Grid file (JSON or YAML)")
    simulate.add_argument("--reps", type=int, default=None, help="Override replicates per config")
    simulate.add_argument(
        "--methods",
        nargs="+",
        choices=[Method.MECOR.value, Method.YL.value, Method.FH.value],
        default=None,
        help="Methods to run (default: --method if given, else all)",
    )
    simulate.add_argument("--no-mspe", action="store_true", help="Skip the MSPE estimators")
    simulate.set_defaults(handler=cmd_simulate)

    prep = subparsers.add_parser("prep", parents=[parent], help="Unit-level CSV to area-level CSV")
    prep.add_argument("input", help="Unit-level CSV: area_id, w_raw, y_raw")
    prep.set_defaults(handler=cmd_prep)

    report = subparsers.add_parser("report", parents=[parent], help="Direct SE vs RMSPE comparison")
    report.add_argument("--areas", required=True, help="Area-level CSV used for the fit")
    report.add_argument("--mspe", required=True, help="mspe.csv written by fit")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand and return the process exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        args.handler(args)
    except SaeError as e:
        logger.error(f"{args.command} failed: {e.code}: {e}")
        print(json.dumps(e.to_dict(), ensure_ascii=False, default=str), file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
