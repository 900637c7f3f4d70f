"""
Experiment orchestration behind the CLI: single estimates, RMSE sweeps over
independent replications, stand-alone tilt calibration and oracle surfaces.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from exceptions import ConfigError, EstimationDegradedError
from mlmc_engine import ais_mlmc_estimate, mlmc_estimate, plan_levels, theta_trajectory
from models import SdeModel, call_from_params, model_from_params
from oracle import (
    bs_exact_call,
    grid_argmin,
    level_variance_surface,
    theta_grid,
    variance_surface,
    weak_error_fit,
)
from schemas import (
    CalibrationResult,
    EstimatorReport,
    LevelPlan,
    RunConfig,
    SweepRow,
    SweepSummary,
    VarianceSurface,
    WeakErrorFit,
)
from utils import replication_seed, rmse

logger = logging.getLogger(__name__)

WEAK_ERROR_STEPS = [4, 8, 16, 32]


@dataclass(frozen=True)
class Replication:
    rep: int
    seed: int
    report: EstimatorReport
    degraded: bool


# ============================================
# BUILDERS
# ============================================
def build_model(config: RunConfig) -> SdeModel:
    return model_from_params(config.bs_params())


def build_payoff(config: RunConfig):
    return call_from_params(config.bs_params())


def build_plan(config: RunConfig, L: Optional[int] = None) -> LevelPlan:
    L = config.L if L is None else L
    return plan_levels(config.m, L, config.alpha, config.T, a=[config.a0] + [1.0] * L)


def benchmark_value(config: RunConfig) -> float:
    """Configured benchmark, else the Black-Scholes closed form."""
    if config.benchmark is not None:
        return config.benchmark
    return bs_exact_call(config.bs_params())


# ============================================
# ESTIMATES
# ============================================
def run_estimate(config: RunConfig, seed: int, L: Optional[int] = None, threads: int = 1) -> EstimatorReport:
    """One run of the configured estimator; `threads` workers share its levels."""
    model, payoff, plan = build_model(config), build_payoff(config), build_plan(config, L)
    if config.method == "standard":
        return mlmc_estimate(model, payoff, plan, seed, threads=threads)
    return ais_mlmc_estimate(model, payoff, plan, config.sa_config(), seed, threads=threads)


def _replicate(config: RunConfig, L: int, rep: int) -> Replication:
    seed = replication_seed(config.seed, L, rep)
    try:
        report = run_estimate(config, seed, L)
        degraded = False
    except EstimationDegradedError as e:
        logger.warning(f"L={L} rep {rep}: estimate degraded ({e.detail})")
        report = e.report
        degraded = True
    return Replication(rep=rep, seed=seed, report=report, degraded=degraded)


def run_replications(config: RunConfig, L: int, threads: int = 1) -> List[Replication]:
    """Replications 1..M of one sweep point, returned in replication order."""
    reps = range(1, config.repetitions + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda rep: _replicate(config, L, rep), reps))
    return [_replicate(config, L, rep) for rep in reps]


def sweep_row(config: RunConfig, L: int, replication: Replication, benchmark: float) -> SweepRow:
    report = replication.report
    return SweepRow(
        method=report.method,
        m=config.m,
        L=L,
        n=config.m ** L,
        I=config.I if config.method != "standard" else 0,
        rep=replication.rep,
        estimate=report.estimate,
        abs_error=abs(report.estimate - benchmark),
        theta_hat=report.theta_hat,
        euler_steps=report.euler_steps_total,
        wall_seconds=report.wall_seconds,
        seed=replication.seed,
    )


def run_rmse_sweep(config: RunConfig, levels: Optional[Sequence[int]] = None,
                   threads: int = 1) -> Tuple[List[SweepRow], List[SweepSummary]]:
    """
    M replications of the configured estimator for every L, rows in (L, rep) order,
    plus one RMSE summary per L. Degraded replications keep their row and are counted.
    """
    levels = list(config.sweep_levels if levels is None else levels)
    benchmark = benchmark_value(config)
    logger.info(f"Sweep {config.method}: L in {levels}, M={config.repetitions}, benchmark {benchmark:.6f}")

    rows: List[SweepRow] = []
    summaries: List[SweepSummary] = []
    for L in levels:
        replications = run_replications(config, L, threads)
        point = [sweep_row(config, L, r, benchmark) for r in replications]
        rows.extend(point)
        summary = SweepSummary(
            method=config.method,
            L=L,
            n=config.m ** L,
            rmse=rmse([row.estimate for row in point], benchmark),
            total_wall_seconds=sum(row.wall_seconds for row in point),
            total_euler_steps=sum(row.euler_steps for row in point),
            degraded_count=sum(r.degraded for r in replications),
        )
        summaries.append(summary)
        logger.info(
            f"L={L}: RMSE {summary.rmse:.5f}, {summary.total_euler_steps} Euler steps, "
            f"{summary.degraded_count} degraded"
        )
    return rows, summaries


def summary_rows(config: RunConfig, summaries: Sequence[SweepSummary]) -> List[SweepRow]:
    """Summaries in CSV row form: method '<method>-summary', rep -1, estimate = abs_error = RMSE."""
    return [
        SweepRow(
            method=f"{s.method}-summary",
            m=config.m,
            L=s.L,
            n=s.n,
            I=config.I if config.method != "standard" else 0,
            rep=-1,
            estimate=s.rmse,
            abs_error=s.rmse,
            theta_hat=[],
            euler_steps=s.total_euler_steps,
            wall_seconds=s.total_wall_seconds,
            seed=config.seed,
        )
        for s in summaries
    ]


# ============================================
# CALIBRATION
# ============================================
def run_calibration(config: RunConfig, level: Optional[int] = None, seed: Optional[int] = None,
                    with_oracle: bool = True) -> Tuple[CalibrationResult, Optional[VarianceSurface]]:
    """
    The level-l tilt recursion run on its own for I iterates, compared with the grid
    minimizer of the level variance surface.
    """
    if config.method == "standard":
        raise ConfigError("calibration needs an adaptive method (ais or ais-chen)", key="method")
    level = config.calibration_level if level is None else level
    seed = config.seed if seed is None else seed
    model, payoff, sa = build_model(config), build_payoff(config), config.sa_config()

    trajectory = theta_trajectory(model, payoff, config.m, level, sa, config.I, seed)
    final = trajectory["averages" if sa.averaging else "iterates"][-1]

    surface = None
    oracle_theta = None
    distance = None
    if with_oracle:
        grid = theta_grid(sa.box, config.grid_spacing)
        surface = level_variance_surface(model, payoff, config.m, level, grid, config.oracle_samples,
                                         config.oracle_steps, seed)
        oracle_theta = grid_argmin(surface)["theta_star"]
        distance = float(np.linalg.norm(final - np.asarray(oracle_theta)))
        logger.info(f"Level {level}: theta {final} vs oracle {oracle_theta} (distance {distance:.4f})")

    result = CalibrationResult(
        level=level,
        iterates=trajectory["iterates"].tolist(),
        averages=trajectory["averages"].tolist(),
        theta_final=final.tolist(),
        oracle_theta=oracle_theta,
        distance=distance,
        skipped_updates=trajectory["skipped_updates"],
    )
    return result, surface


# ============================================
# ORACLE
# ============================================
def run_oracle(config: RunConfig, seed: Optional[int] = None) -> List[VarianceSurface]:
    """Level surfaces for l = 0..L followed by the limit surface."""
    seed = config.seed if seed is None else seed
    model, payoff = build_model(config), build_payoff(config)
    grid = theta_grid(config.sa_config().box, config.grid_spacing)

    surfaces = [
        level_variance_surface(model, payoff, config.m, ell, grid, config.oracle_samples,
                               config.oracle_steps, seed)
        for ell in range(config.L + 1)
    ]
    surfaces.append(variance_surface(model, payoff.gradient, grid, config.oracle_samples,
                                     config.oracle_steps, seed))
    for surface in surfaces:
        best = grid_argmin(surface)
        name = "limit" if surface.level is None else f"level {surface.level}"
        logger.info(f"Oracle {name}: minimizer {best['theta_star']} value {best['value']:.6g}")
    return surfaces


def run_weak_error(config: RunConfig, samples: int, seed: Optional[int] = None,
                   step_counts: Sequence[int] = WEAK_ERROR_STEPS) -> WeakErrorFit:
    seed = config.seed if seed is None else seed
    return weak_error_fit(build_model(config), build_payoff(config), benchmark_value(config),
                          step_counts, samples, seed)
