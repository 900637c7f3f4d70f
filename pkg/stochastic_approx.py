"""
Robbins-Monro recursions for the tilt parameter: projection onto a box, Chen's
expanding truncations, and online Polyak-Ruppert averaging.

A ThetaState is immutable; every step returns a new state. Steps of one state
must be applied in iteration order.

The raw gradient samples carry psi^2 and exp(|theta|^2 T / 2), so their size
depends on the payoff scale and explodes away from the origin. Two optional
controls keep the deterministic gain usable: dividing it by the running mean of
the squared level term (GainScale), and limiting the Euclidean length of a
single step (max_step). Neither moves the root of the mean field, and the step
limit stops binding once the gain is small.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from exceptions import InvalidArgumentError, NumericalOverflowError
from schemas import CompactBox, GainSchedule

logger = logging.getLogger(__name__)

CompactSequence = Callable[[int], CompactBox]


@dataclass(frozen=True)
class ThetaState:
    theta: np.ndarray
    theta_avg: np.ndarray  # mean of theta_0..theta_iter
    iter: int = 0
    trunc_index: int = 0


@dataclass(frozen=True)
class GainScale:
    """Running mean of the squared level term seen so far, current sample included."""
    total: float = 0.0
    count: int = 0

    def update(self, squared: float) -> "GainScale":
        return GainScale(total=self.total + float(squared), count=self.count + 1)

    @property
    def value(self) -> float:
        return self.total / self.count if self.count else 0.0


def init_state(theta0) -> ThetaState:
    theta0 = np.array(theta0, dtype=float)
    return ThetaState(theta=theta0, theta_avg=theta0.copy(), iter=0, trunc_index=0)


def gain(schedule: GainSchedule, i: int) -> float:
    return schedule.gain(i)


def scaled_gain(step_gain: float, scale: GainScale) -> float:
    """gamma_i / mean(Z^2); unchanged while every level term seen is zero."""
    value = scale.value
    return step_gain / value if value > 0 else step_gain


def project(box: CompactBox, theta) -> np.ndarray:
    """Euclidean projection onto a box: a componentwise clamp."""
    return np.clip(np.asarray(theta, dtype=float), box.lo_array, box.hi_array)


def limit_step(step: np.ndarray, max_step: Optional[float]) -> np.ndarray:
    """Shrink a displacement to Euclidean length max_step, keeping its direction."""
    if max_step is None:
        return step
    length = float(np.linalg.norm(step))
    if length <= max_step:
        return step
    return step * (max_step / length)


def _advance(state: ThetaState, new_theta: np.ndarray, trunc_index: int) -> ThetaState:
    count = state.iter + 1
    # incremental mean keeps a constant sequence exactly constant
    theta_avg = state.theta_avg + (new_theta - state.theta_avg) / (count + 1)
    return ThetaState(theta=new_theta, theta_avg=theta_avg, iter=count, trunc_index=trunc_index)


def _candidate(state: ThetaState, grad_sample, step_gain: float, max_step: Optional[float]) -> np.ndarray:
    if not step_gain > 0:
        raise InvalidArgumentError(f"gain must be > 0, got {step_gain}")
    if max_step is not None and not max_step > 0:
        raise InvalidArgumentError(f"max_step must be > 0, got {max_step}")
    grad_sample = np.asarray(grad_sample, dtype=float)
    if not np.all(np.isfinite(grad_sample)):
        raise NumericalOverflowError("non-finite gradient sample")
    return state.theta + limit_step(-step_gain * grad_sample, max_step)


def rm_step(state: ThetaState, grad_sample, step_gain: float, box: CompactBox,
            max_step: Optional[float] = None) -> ThetaState:
    """theta <- Pi_K[theta - gain * H]."""
    candidate = _candidate(state, grad_sample, step_gain, max_step)
    return _advance(state, project(box, candidate), state.trunc_index)


def chen_compacts(k0: float, q: int) -> CompactSequence:
    """K_i = [-2^i k0, 2^i k0]^q."""
    if not k0 > 0:
        raise InvalidArgumentError(f"k0 must be > 0, got {k0}")

    def compact(index: int) -> CompactBox:
        return CompactBox.symmetric(k0 * 2.0 ** index, q)

    return compact


def chen_step(state: ThetaState, grad_sample, step_gain: float, compacts: CompactSequence,
              theta0, literal: bool = False, max_step: Optional[float] = None) -> ThetaState:
    """
    Accept the raw step while it stays in K_{trunc_index}; otherwise restart at
    theta0 and move to the next compact. `literal=True` keeps the index fixed on
    restart.
    """
    candidate = _candidate(state, grad_sample, step_gain, max_step)
    if compacts(state.trunc_index).contains(candidate):
        return _advance(state, candidate, state.trunc_index)

    next_index = state.trunc_index if literal else state.trunc_index + 1
    logger.debug(f"Chen truncation at iterate {state.iter + 1}: restart, compact index {next_index}")
    return _advance(state, np.array(theta0, dtype=float), next_index)


def polyak_average(state: ThetaState) -> np.ndarray:
    return state.theta_avg
