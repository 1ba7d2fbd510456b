"""Monte Carlo loop: generate, fit every method, aggregate.

Replicates are independent work units. They run on a thread pool when
threads > 1 and are reduced in replicate order, so a fixed config gives the
same SimResult for any thread count.
"""
import time
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from loguru import logger

from ..sae.baselines import fit_fh, fit_yl, theta_hat_vector
from ..sae.errors import SaeError, SimulationUnstable
from ..sae.estimation import fit_mecor
from ..sae.mspe import jackknife_refits, mspe_estimate
from ..sae.types import JkScale, Method, ModelParams
from .config import SimConfig
from .generator import block_index, generate_population, generate_replicate

logger = logger.bind(module="simulation.runner")

MAX_FAILURE_RATE = 0.01
MODEL_METHODS = (Method.MECOR, Method.YL, Method.FH)


@dataclass
class ReplicateOutcome:
    """Per-replicate estimates and squared prediction errors."""
    omega: dict[Method, np.ndarray] = field(default_factory=dict)
    sq_error: dict[Method, np.ndarray] = field(default_factory=dict)
    est_mspe: dict[Method, float] = field(default_factory=dict)


@dataclass
class MethodSummary:
    """Monte Carlo aggregates of one method at one config."""
    method: Method
    mc_mean: ModelParams | None
    mc_sd: ModelParams | None
    mc_mspe_avg: float
    mc_mean_est_mspe: float
    per_area_mspe: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        def _num(value: float) -> float | None:
            return float(value) if np.isfinite(value) else None

        return {
            "method": self.method.value,
            "mc_mean": self.mc_mean.to_dict() if self.mc_mean else None,
            "mc_sd": self.mc_sd.to_dict() if self.mc_sd else None,
            "mc_mspe_avg": _num(self.mc_mspe_avg),
            "mc_mean_est_mspe": _num(self.mc_mean_est_mspe),
        }


@dataclass
class SimResult:
    """Aggregated outcome of one simulation config."""
    config: SimConfig
    summaries: dict[Method, MethodSummary]
    n_success: int
    n_failed: int
    psi_ee: np.ndarray
    blocks: np.ndarray

    @property
    def direct_mspe_avg(self) -> float:
        return self.summaries[Method.DIRECT].mc_mspe_avg

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "n_success": self.n_success,
            "n_failed": self.n_failed,
            "direct_mspe_avg": self.direct_mspe_avg,
            "methods": {m.value: s.to_dict() for m, s in self.summaries.items()},
        }


def run_replicate(
    config: SimConfig,
    x: np.ndarray,
    rep_index: int,
    methods: Iterable[Method] = MODEL_METHODS,
    estimate_mspe: bool = True,
    jk_scale: JkScale = JkScale.PLAIN,
) -> ReplicateOutcome:
    """Generate one data set and run every requested method on it."""
    ds, truths = generate_replicate(config, x, rep_index)
    theta = np.array([t.theta for t in truths])
    out = ReplicateOutcome()
    out.sq_error[Method.DIRECT] = (ds.y - theta) ** 2

    for method in methods:
        if method == Method.MECOR:
            fit = fit_mecor(ds)
            params = fit.params
            theta_hat = theta_hat_vector(ds, params)
            if estimate_mspe:
                jk = jackknife_refits(ds, full_fit=fit)
                records = mspe_estimate(ds, jk, scale=jk_scale)
                out.est_mspe[method] = float(np.mean([r.mspe_lb for r in records]))
        elif method == Method.YL:
            result = fit_yl(ds)
            params = result.fit.params
            theta_hat = np.array([p.theta_hat for p in result.predictions])
        elif method == Method.FH:
            result = fit_fh(ds)
            params = result.fit.params
            theta_hat = np.array([p.theta_hat for p in result.predictions])
            if estimate_mspe:
                out.est_mspe[method] = float(np.mean([r.mspe for r in result.mspe]))
        else:
            continue
        out.omega[method] = params.to_vector()
        out.sq_error[method] = (theta_hat - theta) ** 2
    return out


def _summarize(method: Method, outcomes: list[ReplicateOutcome]) -> MethodSummary:
    sq_error = np.stack([o.sq_error[method] for o in outcomes])
    per_area = sq_error.mean(axis=0)
    mc_mean = mc_sd = None
    if method in outcomes[0].omega:
        omegas = np.stack([o.omega[method] for o in outcomes])
        mc_mean = ModelParams.from_vector(omegas.mean(axis=0))
        sd = omegas.std(axis=0, ddof=1) if len(outcomes) > 1 else np.zeros(omegas.shape[1])
        mc_sd = ModelParams.from_vector(sd)
    est = [o.est_mspe[method] for o in outcomes if method in o.est_mspe]
    return MethodSummary(
        method=method,
        mc_mean=mc_mean,
        mc_sd=mc_sd,
        mc_mspe_avg=float(per_area.mean()),
        mc_mean_est_mspe=float(np.mean(est)) if est else float("nan"),
        per_area_mspe=per_area,
    )


def run_simulation(
    config: SimConfig,
    methods: Iterable[Method] = MODEL_METHODS,
    threads: int = 1,
    estimate_mspe: bool = True,
    jk_scale: JkScale = JkScale.PLAIN,
    max_failure_rate: float = MAX_FAILURE_RATE,
) -> SimResult:
    """Run all replicates of one config and aggregate per method.

    Args:
        config: Design point
        methods: Model-based methods to run; the direct estimator is always included
        threads: Worker threads across replicates
        estimate_mspe: Also compute the ME-Cor jackknife and FH MSPE estimators
        jk_scale: Jackknife scaling for the ME-Cor MSPE estimator
        max_failure_rate: Largest tolerated share of failed replicates

    Returns:
        SimResult with one MethodSummary per method
    """
    methods = [m for m in MODEL_METHODS if m in set(methods)]
    x = generate_population(config)
    started = time.monotonic()

    def work(rep_index: int) -> ReplicateOutcome | None:
        try:
            return run_replicate(config, x, rep_index, methods, estimate_mspe, jk_scale)
        except SaeError as e:
            logger.warning(f"Replicate {rep_index} of [{config.label}] failed: {e.code}: {e}")
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(config.mc_reps)))
    else:
        results = [work(r) for r in range(config.mc_reps)]

    outcomes = [o for o in results if o is not None]
    n_failed = len(results) - len(outcomes)
    if n_failed > max_failure_rate * config.mc_reps or not outcomes:
        raise SimulationUnstable(
            f"{n_failed} of {config.mc_reps} replicates failed for [{config.label}]",
            n_failed=n_failed,
            mc_reps=config.mc_reps,
        )

    summaries = {m: _summarize(m, outcomes) for m in (Method.DIRECT, *methods)}
    psi_ee = np.array([(0.75 + 0.25 * block_index(config, i)) ** 2 * config.b for i in range(config.n)])
    logger.info(
        f"Simulated [{config.label}]: {len(outcomes)} replicates in {time.monotonic() - started:.1f}s, "
        + ", ".join(f"{m.value}={s.mc_mspe_avg:.4f}" for m, s in summaries.items())
    )
    return SimResult(
        config=config,
        summaries=summaries,
        n_success=len(outcomes),
        n_failed=n_failed,
        psi_ee=psi_ee,
        blocks=np.array([block_index(config, i) for i in range(config.n)]),
    )
