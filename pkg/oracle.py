"""
Independent references for validating the estimators: the Black-Scholes closed
form, the joint Euler scheme of (X, U) where U is the limit of the rescaled
fine/coarse error, Monte Carlo variance surfaces with their grid minimizers,
and weak-error rate fits.
"""
from __future__ import annotations

import itertools
import logging
import math
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import stats

from exceptions import InsufficientResolutionError, InvalidArgumentError, NumericalOverflowError
from importance import level_scale
from models import SdeModel
from schemas import BsParams, CompactBox, VarianceSurface, WeakErrorFit
from sde_core import coarsen_increments, draw_increments, left_to_right_sum, simulate_terminals
from utils import ORACLE_STREAM, chunk_size, iter_chunks, substream

logger = logging.getLogger(__name__)

# spawn_key sub-tags under ORACLE_STREAM (tag 0 belongs to level_statistics)
LEVEL_SURFACE_TAG = 1
LIMIT_SURFACE_TAG = 2
WEAK_ERROR_TAG = 3


# ============================================
# CLOSED FORMS
# ============================================
def bs_exact_call(p: BsParams) -> float:
    """Discounted Black-Scholes call price e^{-rT} E(S_T - K)_+."""
    vol = p.sigma * math.sqrt(p.T)
    d1 = (math.log(p.s0 / p.K) + (p.r + 0.5 * p.sigma ** 2) * p.T) / vol
    d2 = d1 - vol
    return float(p.s0 * stats.norm.cdf(d1) - p.K * math.exp(-p.r * p.T) * stats.norm.cdf(d2))


def bs_limit_second_moment(p: BsParams, n: int) -> Tuple[float, float]:
    """
    (E[X_T^2], E[U_T^2]) of the joint Euler scheme for Black-Scholes, by the exact
    second-moment recursion (E[X U] stays 0 because U_0 = 0).
    """
    if n < 1:
        raise InvalidArgumentError(f"need n >= 1, got {n}")
    h = p.T / n
    growth = (1 + p.r * h) ** 2 + p.sigma ** 2 * h
    ex2, eu2 = p.s0 ** 2, 0.0
    for _ in range(n):
        ex2, eu2 = ex2 * growth, eu2 * growth + 0.5 * p.sigma ** 4 * ex2 * h
    return ex2, eu2


# ============================================
# LIMIT PROCESS U
# ============================================
def _limit_batch(model: SdeModel, dw: np.ndarray, dw_tilde: np.ndarray, dt: float
                 ) -> Tuple[np.ndarray, np.ndarray]:
    batch, n, q = dw.shape
    d = model.dim_state
    x = np.broadcast_to(model.x0, (batch, d)).copy()
    u = np.zeros((batch, d))
    extra = dw_tilde.reshape(batch, n, q, q)  # [b, k, l, j] drives sigma_dot_j sigma_l
    root_half = 1.0 / math.sqrt(2.0)

    for k in range(n):
        b = model.drift(x)
        sigma = model.diffusion(x)
        b_dot = model.drift_jacobian(x)
        sigma_dot = model.diffusion_jacobian(x)

        du = np.einsum("bde,be->bd", b_dot, u) * dt
        du += np.einsum("bjde,be,bj->bd", sigma_dot, u, dw[:, k, :])
        du -= root_half * np.einsum("bjde,bel,blj->bd", sigma_dot, sigma, extra[:, k])
        x = x + b * dt + np.einsum("bdq,bq->bd", sigma, dw[:, k, :])
        u = u + du
    return x, u


def simulate_limit_batch(model: SdeModel, n: int, count: int, stream: np.random.Generator
                         ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """`count` joint Euler samples of (X_T, U_T) plus their W_T."""
    if not model.has_jacobians:
        raise InvalidArgumentError(f"model '{model.name}' does not supply Jacobians")
    q, T = model.dim_noise, model.horizon
    dw = draw_increments(stream, count, n, q, T)
    dw_tilde = draw_increments(stream, count, n, q * q, T)
    with np.errstate(over="ignore", invalid="ignore"):
        x, u = _limit_batch(model, dw, dw_tilde, T / n)
    return x, u, left_to_right_sum(dw)


def simulate_limit_pair(model: SdeModel, n: int, stream: np.random.Generator
                        ) -> Tuple[np.ndarray, np.ndarray]:
    x, u, _ = simulate_limit_batch(model, n, 1, stream)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise NumericalOverflowError("non-finite state in the joint (X, U) scheme")
    return x[0], u[0]


# ============================================
# VARIANCE SURFACES
# ============================================
def theta_grid(box: CompactBox, spacing: float) -> List[List[float]]:
    """Uniform grid over the box, lexicographically ordered."""
    if not spacing > 0:
        raise InvalidArgumentError(f"spacing must be > 0, got {spacing}")
    axes = []
    for lo, hi in zip(box.lo, box.hi):
        count = int(math.floor((hi - lo) / spacing + 1e-9))
        axes.append(np.round(lo + spacing * np.arange(count + 1), 12))
    return [list(map(float, point)) for point in itertools.product(*axes)]


def _surface(squared: np.ndarray, w_T: np.ndarray, grid: Sequence[Sequence[float]], T: float,
             level) -> VarianceSurface:
    """Common-random-number estimate of E[Z^2 exp(-theta.W_T + |theta|^2 T / 2)] on every grid point."""
    thetas = np.asarray(grid, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != w_T.shape[1]:
        raise InvalidArgumentError(f"grid points must have {w_T.shape[1]} coordinates")
    keep = np.isfinite(squared) & np.all(np.isfinite(w_T), axis=1)
    squared, w_T = squared[keep], w_T[keep]
    samples = squared.size

    values, errors = [], []
    per_block = max(1, (1 << 22) // max(samples, 1))
    for start in range(0, len(thetas), per_block):
        block = thetas[start:start + per_block]
        log_w = -w_T @ block.T + 0.5 * T * np.sum(block * block, axis=1)
        with np.errstate(over="ignore", invalid="ignore"):
            integrand = squared[:, None] * np.exp(log_w)
            values.extend(np.mean(integrand, axis=0).tolist())
            errors.extend((np.std(integrand, axis=0, ddof=1) / math.sqrt(samples)).tolist())

    bad = [i for i, v in enumerate(values) if not math.isfinite(v)]
    if bad:
        raise InvalidArgumentError(
            f"variance surface overflows at theta = {thetas[bad[0]].tolist()} "
            f"({len(bad)} of {len(values)} grid points); narrow the box"
        )
    try:
        return VarianceSurface(
            theta_grid=[list(map(float, t)) for t in thetas],
            values=values,
            std_errors=errors,
            samples_per_point=samples,
            level=level,
        )
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid variance surface: {e.errors()[0]['msg']}") from e


def variance_surface(model: SdeModel, payoff_gradient: Callable, grid, samples: int, n: int,
                     seed: int) -> VarianceSurface:
    """v(theta) = E[(grad psi(X_T).U_T)^2 exp(-theta.W_T + |theta|^2 T / 2)] on a grid."""
    if samples < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got {samples}")
    stream = substream(seed, ORACLE_STREAM, LIMIT_SURFACE_TAG)
    q = model.dim_noise
    squared = np.empty(samples)
    w_all = np.empty((samples, q))
    offset = 0
    for k in iter_chunks(samples, chunk_size(n, q + q * q)):
        x, u, w_T = simulate_limit_batch(model, n, k, stream)
        z = np.einsum("bd,bd->b", payoff_gradient(x), u)
        squared[offset:offset + k] = z * z
        w_all[offset:offset + k] = w_T
        offset += k
    surface = _surface(squared, w_all, grid, model.horizon, level=None)
    logger.info(f"Limit variance surface: {len(surface.values)} points, {surface.samples_per_point} samples")
    return surface


def level_variance_surface(model: SdeModel, payoff: Callable, m: int, ell: int, grid, samples: int,
                           n_unused: int, seed: int) -> VarianceSurface:
    """
    v_l(theta) = E[(r_l (psi(fine) - psi(coarse)))^2 exp(-theta.W_T + |theta|^2 T / 2)] from
    untilted coupled paths (psi(X)^2 at level 0). `n_unused` is kept for call symmetry
    with variance_surface.
    """
    if ell < 0:
        raise InvalidArgumentError(f"level must be >= 0, got {ell}")
    if samples < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got {samples}")
    q, T = model.dim_noise, model.horizon
    steps = m ** ell
    scale = level_scale(m, ell, T) if ell >= 1 else 1.0
    stream = substream(seed, ORACLE_STREAM, LEVEL_SURFACE_TAG, ell)

    squared = np.empty(samples)
    w_all = np.empty((samples, q))
    offset = 0
    for k in iter_chunks(samples, chunk_size(steps, q)):
        increments = draw_increments(stream, k, steps, q, T)
        with np.errstate(over="ignore", invalid="ignore"):
            z = payoff(simulate_terminals(model, None, increments, T))
            if ell >= 1:
                z = scale * (z - payoff(simulate_terminals(model, None, coarsen_increments(increments, m), T)))
        squared[offset:offset + k] = z * z
        w_all[offset:offset + k] = left_to_right_sum(increments)
        offset += k
    surface = _surface(squared, w_all, grid, T, level=ell)
    logger.info(f"Level {ell} variance surface: {len(surface.values)} points")
    return surface


def grid_argmin(surface: VarianceSurface) -> Dict[str, object]:
    """Grid point of minimal value; the grid is lexicographically sorted, so ties go to the smallest point."""
    index = int(np.argmin(np.asarray(surface.values)))
    return {"theta_star": list(surface.theta_grid[index]), "value": surface.values[index]}


# ============================================
# WEAK ERROR
# ============================================
def weak_error_fit(model: SdeModel, payoff: Callable, exact_value: float, step_counts: Sequence[int],
                   samples: int, seed: int) -> WeakErrorFit:
    """
    Fit log|E psi(X^n_T) - exact| = intercept + slope log n; alpha = -slope and
    C_psi = sign * exp(intercept).
    """
    if len(step_counts) < 3:
        raise InvalidArgumentError("a weak-error fit needs at least 3 step counts")
    if samples < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got {samples}")
    q, T = model.dim_noise, model.horizon
    biases, errors = [], []
    for n in step_counts:
        stream = substream(seed, ORACLE_STREAM, WEAK_ERROR_TAG, n)
        total = 0.0
        total_sq = 0.0
        for k in iter_chunks(samples, chunk_size(n, q)):
            values = payoff(simulate_terminals(model, None, draw_increments(stream, k, n, q, T), T))
            total += math.fsum(values)
            total_sq += math.fsum(values * values)
        mean = total / samples
        variance = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
        bias = mean - exact_value
        se = math.sqrt(variance / samples)
        if abs(bias) <= 3 * se:
            raise InsufficientResolutionError(
                f"bias {bias:.3g} at n={n} is within 3 standard errors ({se:.3g}); raise the sample size"
            )
        biases.append(bias)
        errors.append(se)
        logger.debug(f"Weak error n={n}: bias {bias:.6g} (se {se:.3g})")

    fit = stats.linregress(np.log(step_counts), np.log(np.abs(biases)))
    sign = 1.0 if np.mean(biases) >= 0 else -1.0
    result = WeakErrorFit(
        step_counts=list(step_counts),
        biases=biases,
        std_errors=errors,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_stderr=float(fit.stderr),
        alpha=float(-fit.slope),
        c_psi=float(sign * math.exp(fit.intercept)),
    )
    logger.info(f"Weak-error fit: slope {result.slope:.3f} +/- {result.slope_stderr:.3f}")
    return result


# ============================================
# CLT SHAPE
# ============================================
def standardized_moments(errors: Sequence[float]) -> Dict[str, float]:
    """Skewness and excess kurtosis of standardized estimator errors (both ~0 under a CLT)."""
    errors = np.asarray(errors, dtype=float)
    return {
        "skewness": float(stats.skew(errors)),
        "excess_kurtosis": float(stats.kurtosis(errors, fisher=True)),
    }
