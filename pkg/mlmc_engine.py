"""
Multilevel Monte Carlo Euler estimators.

`mlmc_estimate` is the standard estimator Q_n; `ais_mlmc_estimate` adds per-level
adaptive importance sampling: while i <= I a Robbins-Monro recursion learns the
Girsanov tilt of level l from the untilted coupled paths, and the estimator term
uses the tilted paths of the same Brownian grid. After I iterates the tilt is frozen
and the remaining samples are simulated in vectorized chunks.

Every level owns one random stream keyed by (seed, level); iterate i always uses the
i-th grid of that stream, so reports do not depend on thread scheduling.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from exceptions import EstimationDegradedError, InvalidArgumentError, NumericalOverflowError
from importance import LevelScale, girsanov_weight, grad_H_level, grad_H_zero
from models import SdeModel
from schemas import ComplexityReport, EstimatorReport, LevelPlan, LevelReport, SaConfig
from sde_core import coarsen_increments, draw_increments, left_to_right_sum, simulate_terminals
from stochastic_approx import (
    GainScale,
    chen_compacts,
    chen_step,
    init_state,
    polyak_average,
    rm_step,
    scaled_gain,
)
from utils import (
    CALIBRATION_STREAM,
    ORACLE_STREAM,
    chunk_size,
    iter_chunks,
    level_stream,
    mean_and_variance,
    substream,
)

logger = logging.getLogger(__name__)

Payoff = Callable[[np.ndarray], np.ndarray]

# dropping more than this share of samples makes an estimate unusable
MAX_OVERFLOW_FRACTION = 1e-3
MAX_FINEST_STEPS = 1 << 40


# ============================================
# LEVEL PLANNING
# ============================================
def _decimal(x: float) -> Fraction:
    # 0.1 is 1/10 here, not its binary neighbour
    return Fraction(repr(float(x)))


def plan_levels(m: int, L: int, alpha: float, T: float,
                a: Optional[Sequence[float]] = None) -> LevelPlan:
    """
    N_l = ceil(n^{2 alpha} (m-1) T / (m^l a_l) * sum_{l'=1..L} a_l') with n = m^L.
    Exact rational arithmetic on the decimal values of T and a whenever 2 alpha is an integer.
    """
    if m < 2 or L < 1:
        raise InvalidArgumentError(f"need m >= 2 and L >= 1, got m={m}, L={L}")
    if not 0.5 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in [1/2, 1], got {alpha}")
    if not T > 0:
        raise InvalidArgumentError(f"horizon must be > 0, got {T}")
    weights = [1.0] * (L + 1) if a is None else [float(w) for w in a]
    if len(weights) != L + 1:
        raise InvalidArgumentError(f"need L+1 = {L + 1} weights, got {len(weights)}")
    if any(not w > 0 for w in weights):
        raise InvalidArgumentError(f"weights must be positive, got {weights}")

    n = m ** L
    if n > MAX_FINEST_STEPS:
        raise NumericalOverflowError(f"finest step count m^L = {m}^{L} is too large")

    sizes = []
    if float(2 * alpha).is_integer():
        power = Fraction(n) ** int(2 * alpha)
        weight_sum = sum(_decimal(w) for w in weights[1:])
        for ell in range(L + 1):
            exact = power * (m - 1) * _decimal(T) / (m ** ell * _decimal(weights[ell])) * weight_sum
            sizes.append(math.ceil(exact))
    else:
        weight_sum = math.fsum(weights[1:])
        for ell in range(L + 1):
            approx = n ** (2 * alpha) * (m - 1) * T / (m ** ell * weights[ell]) * weight_sum
            sizes.append(math.ceil(approx * (1 - 1e-12)))

    plan = LevelPlan(m=m, L=L, n=n, alpha=alpha, T=T, a=weights, N=[max(1, k) for k in sizes])
    logger.debug(f"Planned levels m={m} L={L} alpha={alpha}: N={plan.N}")
    return plan


def level_cost(plan: LevelPlan, level: int) -> int:
    """Euler steps for one sample of a level: m^0 at level 0, m^l + m^{l-1} above."""
    if level == 0:
        return 1
    return plan.m ** level + plan.m ** (level - 1)


def complexity_model(plan: LevelPlan, I: int) -> ComplexityReport:
    if I < 0:
        raise InvalidArgumentError(f"iteration count must be >= 0, got {I}")
    steps_standard = sum(plan.N[ell] * level_cost(plan, ell) for ell in range(plan.L + 1))
    # untilted paths generated for the theta update while i <= I
    overhead = sum(min(I, plan.N[ell]) * level_cost(plan, ell) for ell in range(plan.L + 1))
    steps_ais = steps_standard + overhead

    m, n, T, alpha = plan.m, plan.n, plan.T, plan.alpha
    log_m, log_n = math.log(m), math.log(n)
    optimal_standard = (
        (m - 1) * T / (plan.a[0] * log_m) * n ** (2 * alpha) * log_n
        + (m * m - 1) * T / (m * log_m ** 2) * n ** (2 * alpha) * log_n ** 2
    )
    return ComplexityReport(
        steps_standard=steps_standard,
        steps_ais=steps_ais,
        ratio=steps_ais / steps_standard,
        overhead_bound=I * sum(m ** ell for ell in range(plan.L + 1)),
        optimal_standard=optimal_standard,
        optimal_ais=optimal_standard * (1 + I / (n ** alpha * log_n ** 2)),
    )


# ============================================
# SAMPLING HELPERS
# ============================================
def _level_values(model: SdeModel, payoff: Payoff, theta: Optional[np.ndarray], m: int, level: int,
                  increments: np.ndarray, w_T: np.ndarray) -> np.ndarray:
    """
    Per-sample estimator terms for a batch of grids under a fixed tilt:
    psi(X^theta) g at level 0, (psi(fine^theta) - psi(coarse^theta)) g above.
    """
    T = model.horizon
    with np.errstate(over="ignore", invalid="ignore"):
        fine = payoff(simulate_terminals(model, theta, increments, T))
        if level == 0:
            values = fine
        else:
            coarse = payoff(simulate_terminals(model, theta, coarsen_increments(increments, m), T))
            values = fine - coarse
        if theta is not None and np.any(theta):
            values = values * girsanov_weight(theta, w_T, T)
    return values


class _TiltRecursion:
    """
    Tilt recursion of one level, driven by untilted samples. Updates whose gradient
    sample is not finite are skipped and counted; the iterate stays where it was.
    """

    def __init__(self, sa: SaConfig, model: SdeModel, m: int, level: int, theta_start):
        self.sa = sa
        self.level = level
        self.T = model.horizon
        self.scale = LevelScale.of(m, level, self.T) if level >= 1 else None
        self.compacts = chen_compacts(sa.chen_k0, model.dim_noise) if sa.algorithm == "chen" else None
        self.state = init_state(theta_start)
        self.gain_scale = GainScale()
        self.skipped = 0

    @property
    def theta_in_use(self) -> np.ndarray:
        """Tilt for the estimator term: the running average when averaging is on."""
        return polyak_average(self.state) if self.sa.averaging else self.state.theta

    def update(self, i: int, psi_fine: float, psi_coarse: Optional[float], w_T: np.ndarray) -> None:
        theta = self.state.theta
        try:
            if self.scale is None:
                grad = grad_H_zero(theta, psi_fine, w_T, self.T)
            else:
                grad = grad_H_level(theta, psi_fine, psi_coarse, w_T, self.scale)
        except NumericalOverflowError as e:
            self.skipped += 1
            logger.debug(f"Level {self.level} iterate {i}: theta update skipped ({e})")
            return
        # finite once the gradient is
        z = float(psi_fine) if self.scale is None else self.scale.r_ell * (float(psi_fine) - float(psi_coarse))

        step_gain = self.sa.gain.gain(i)
        if self.sa.normalize_gain:
            self.gain_scale = self.gain_scale.update(z * z)
            step_gain = scaled_gain(step_gain, self.gain_scale)
        if self.compacts is not None:
            self.state = chen_step(self.state, grad, step_gain, self.compacts, self.sa.theta0,
                                   literal=self.sa.chen_literal, max_step=self.sa.step_limit)
        else:
            self.state = rm_step(self.state, grad, step_gain, self.sa.box, max_step=self.sa.step_limit)


@dataclass
class _LevelOutcome:
    report: LevelReport
    theta_final: np.ndarray


def _adapt_and_sample(model: SdeModel, payoff: Payoff, plan: LevelPlan, level: int, seed: int,
                      sa: Optional[SaConfig], theta_start: np.ndarray) -> _LevelOutcome:
    q, m, T = model.dim_noise, plan.m, model.horizon
    steps = plan.steps(level)
    total = plan.N[level]
    cost = level_cost(plan, level)
    stream = level_stream(seed, level)

    values = np.empty(total)
    euler_steps = 0
    adapt_iters = min(sa.stop_iters, total) if sa is not None else 0
    recursion = _TiltRecursion(sa, model, m, level, theta_start) if sa is not None else None

    # adaptation: one grid per iterate, untilted and tilted paths side by side
    for i in range(1, adapt_iters + 1):
        theta_use = recursion.theta_in_use
        increments = draw_increments(stream, 1, steps, q, T)
        w_T = left_to_right_sum(increments)[0]
        both = np.repeat(increments, 2, axis=0)
        tilts = np.stack([np.zeros(q), theta_use])
        coarse = None
        with np.errstate(over="ignore", invalid="ignore"):
            fine = payoff(simulate_terminals(model, tilts, both, T))
            if level == 0:
                value = fine[1] * girsanov_weight(theta_use, w_T, T)
            else:
                coarse = payoff(simulate_terminals(model, tilts, coarsen_increments(both, m), T))
                value = (fine[1] - coarse[1]) * girsanov_weight(theta_use, w_T, T)
        values[i - 1] = value
        euler_steps += 2 * cost
        recursion.update(i, fine[0], None if coarse is None else coarse[0], w_T)

    if adapt_iters > 0:
        theta_frozen = recursion.theta_in_use
    else:
        theta_frozen = np.array(theta_start, dtype=float)
    frozen = theta_frozen if np.any(theta_frozen) else None
    skipped = recursion.skipped if recursion is not None else 0
    if skipped:
        logger.warning(f"Level {level}: skipped {skipped} of {adapt_iters} theta updates with non-finite gradients")

    # stopped phase: theta frozen, vectorized chunks
    offset = adapt_iters
    for k in iter_chunks(total - adapt_iters, chunk_size(steps, q)):
        increments = draw_increments(stream, k, steps, q, T)
        w_T = left_to_right_sum(increments)
        values[offset:offset + k] = _level_values(model, payoff, frozen, m, level, increments, w_T)
        offset += k
        euler_steps += k * cost

    valid = np.isfinite(values)
    overflow = int(total - np.count_nonzero(valid))
    if overflow:
        logger.warning(f"Level {level}: dropped {overflow} of {total} samples with non-finite values")
    kept = values[valid] if overflow else values
    mean, variance = mean_and_variance(kept)
    n_used = int(kept.size)

    report = LevelReport(
        level=level,
        N=total,
        n_used=n_used,
        sample_mean=mean,
        sample_variance=variance,
        standard_error=math.sqrt(variance / n_used) if n_used > 0 else float("nan"),
        theta_final=[float(t) for t in theta_frozen],
        overflow_count=overflow,
        adapted_iters=adapt_iters,
        skipped_updates=skipped,
        euler_steps=euler_steps,
    )
    logger.debug(
        f"Level {level}: N={total} mean={mean:.6g} var={variance:.6g} theta={report.theta_final}"
    )
    return _LevelOutcome(report=report, theta_final=theta_frozen)


def _run_levels(model: SdeModel, payoff: Payoff, plan: LevelPlan, seed: int,
                sa: Optional[SaConfig], method: str, threads: int) -> EstimatorReport:
    if plan.T != model.horizon:
        raise InvalidArgumentError(f"plan horizon {plan.T} differs from model horizon {model.horizon}")
    q = model.dim_noise
    if sa is not None and sa.dim != q:
        raise InvalidArgumentError(f"SA config has dimension {sa.dim}, model has q={q}")

    start = time.perf_counter()
    theta0 = np.asarray(sa.theta0, dtype=float) if sa is not None else np.zeros(q)
    levels = range(plan.L + 1)

    if sa is not None and sa.warm_start:
        outcomes: List[_LevelOutcome] = []
        theta_start = theta0
        for ell in levels:
            outcome = _adapt_and_sample(model, payoff, plan, ell, seed, sa, theta_start)
            outcomes.append(outcome)
            theta_start = outcome.theta_final
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(
                lambda ell: _adapt_and_sample(model, payoff, plan, ell, seed, sa, theta0), levels
            ))
    else:
        outcomes = [_adapt_and_sample(model, payoff, plan, ell, seed, sa, theta0) for ell in levels]

    per_level = [o.report for o in outcomes]
    estimate = 0.0
    total_variance = 0.0
    for level in per_level:
        estimate += level.sample_mean
        total_variance += level.sample_variance / level.n_used if level.n_used else float("nan")

    report = EstimatorReport(
        method=method,
        estimate=estimate,
        per_level=per_level,
        euler_steps_total=sum(level.euler_steps for level in per_level),
        wall_seconds=time.perf_counter() - start,
        seed=seed,
        plan=plan,
        total_variance=total_variance,
        standard_error=math.sqrt(total_variance) if total_variance >= 0 else float("nan"),
    )
    logger.info(
        f"{method} estimate {estimate:.6f} (se {report.standard_error:.3g}), "
        f"{report.euler_steps_total} Euler steps, {report.wall_seconds:.2f}s"
    )

    dropped = report.overflow_count
    fraction = dropped / sum(plan.N)
    if fraction > MAX_OVERFLOW_FRACTION:
        raise EstimationDegradedError(
            f"{dropped} of {sum(plan.N)} samples overflowed ({fraction:.2%})",
            report=report,
            overflow_fraction=fraction,
        )
    return report


# ============================================
# ESTIMATORS
# ============================================
def mlmc_estimate(model: SdeModel, payoff: Payoff, plan: LevelPlan, seed: int,
                  threads: int = 1) -> EstimatorReport:
    """Standard MLMC Euler estimator with untilted paths."""
    return _run_levels(model, payoff, plan, seed, sa=None, method="standard", threads=threads)


def ais_mlmc_estimate(model: SdeModel, payoff: Payoff, plan: LevelPlan, sa: SaConfig, seed: int,
                      threads: int = 1) -> EstimatorReport:
    """MLMC Euler estimator with per-level adaptive importance sampling."""
    method = "ais-chen" if sa.algorithm == "chen" else "ais"
    return _run_levels(model, payoff, plan, seed, sa=sa, method=method, threads=threads)


# ============================================
# DIAGNOSTICS
# ============================================
def level_statistics(model: SdeModel, payoff: Payoff, theta, m: int, ell: int, samples: int,
                     seed: int) -> Dict[str, float]:
    """
    Mean and variance of r_l (psi(fine) - psi(coarse)) g under tilt theta
    (psi(X) g at level 0, unscaled). `second_moment` estimates v_l(theta).
    """
    if samples < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got {samples}")
    q, T = model.dim_noise, model.horizon
    theta = np.asarray(theta, dtype=float)
    scale = LevelScale.of(m, ell, T).r_ell if ell >= 1 else 1.0
    stream = substream(seed, ORACLE_STREAM, 0, ell)
    steps = m ** ell

    values = np.empty(samples)
    offset = 0
    for k in iter_chunks(samples, chunk_size(steps, q)):
        increments = draw_increments(stream, k, steps, q, T)
        w_T = left_to_right_sum(increments)
        values[offset:offset + k] = scale * _level_values(model, payoff, theta, m, ell, increments, w_T)
        offset += k

    values = values[np.isfinite(values)]
    mean, variance = mean_and_variance(values)
    second = values * values
    return {
        "mean": mean,
        "variance": variance,
        "second_moment": float(np.mean(second)),
        "second_moment_se": float(np.std(second, ddof=1) / math.sqrt(second.size)),
        "samples": int(values.size),
    }


def theta_trajectory(model: SdeModel, payoff: Payoff, m: int, ell: int, sa: SaConfig, iters: int,
                     seed: int) -> Dict[str, Any]:
    """
    Run the level-l tilt recursion on its own for `iters` iterates.
    Returns the raw iterates and Polyak averages, both with theta_0 in row 0, and
    the number of skipped updates.
    """
    q, T = model.dim_noise, model.horizon
    if sa.dim != q:
        raise InvalidArgumentError(f"SA config has dimension {sa.dim}, model has q={q}")
    steps = m ** ell
    stream = substream(seed, CALIBRATION_STREAM, ell)
    recursion = _TiltRecursion(sa, model, m, ell, sa.theta0)

    iterates = [recursion.state.theta]
    averages = [recursion.state.theta_avg]
    for i in range(1, iters + 1):
        increments = draw_increments(stream, 1, steps, q, T)
        w_T = left_to_right_sum(increments)[0]
        coarse = None
        with np.errstate(over="ignore", invalid="ignore"):
            fine = payoff(simulate_terminals(model, None, increments, T))
            if ell >= 1:
                coarse = payoff(simulate_terminals(model, None, coarsen_increments(increments, m), T))
        recursion.update(i, fine[0], None if coarse is None else coarse[0], w_T)
        iterates.append(recursion.state.theta)
        averages.append(recursion.state.theta_avg)

    if recursion.skipped:
        logger.warning(f"Calibration level {ell}: skipped {recursion.skipped} of {iters} theta updates "
                       f"with non-finite gradients")
    logger.info(f"Level {ell} recursion: {iters} iterates, average {averages[-1]}")
    return {
        "iterates": np.array(iterates),
        "averages": np.array(averages),
        "skipped_updates": recursion.skipped,
    }
