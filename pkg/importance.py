"""
Girsanov reweighting and the stochastic gradients of the level variances.

For a drift tilt theta the weight is g = exp(-theta.W_T - |theta|^2 T / 2), so that
E psi(X_T) = E[psi(X_T^theta) g]. Payoffs arrive already evaluated; nothing here
differentiates psi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from exceptions import InvalidArgumentError, NumericalOverflowError


# ============================================
# TYPES
# ============================================
@dataclass(frozen=True)
class LevelScale:
    m: int
    ell: int
    T: float
    r_ell: float

    @classmethod
    def of(cls, m: int, ell: int, T: float) -> "LevelScale":
        return cls(m=m, ell=ell, T=T, r_ell=level_scale(m, ell, T))


@dataclass(frozen=True)
class WeightedSample:
    theta: np.ndarray
    w_T: np.ndarray
    psi_value: float
    weight: float
    product: float

    @classmethod
    def of(cls, theta, w_T, psi_value: float, T: float) -> "WeightedSample":
        weight = float(girsanov_weight(theta, w_T, T))
        return cls(
            theta=np.asarray(theta, dtype=float),
            w_T=np.asarray(w_T, dtype=float),
            psi_value=psi_value,
            weight=weight,
            product=psi_value * weight,
        )


# ============================================
# WEIGHTS
# ============================================
def _dot(theta: np.ndarray, w_T: np.ndarray):
    # w_T is (q,) or (B, q)
    return w_T @ theta


def log_girsanov_weight(theta, w_T, T: float):
    theta = np.asarray(theta, dtype=float)
    w_T = np.asarray(w_T, dtype=float)
    return -_dot(theta, w_T) - 0.5 * float(theta @ theta) * T


def girsanov_weight(theta, w_T, T: float):
    """exp(-theta.w_T - |theta|^2 T / 2); may overflow to +inf, which callers treat as a path error."""
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(log_girsanov_weight(theta, w_T, T))


def level_scale(m: int, ell: int, T: float) -> float:
    """r_l = sqrt(m^l / ((m - 1) T))."""
    if m < 2:
        raise InvalidArgumentError(f"refinement must be >= 2, got {m}")
    if ell < 1:
        raise InvalidArgumentError(f"level must be >= 1, got {ell}")
    if not T > 0:
        raise InvalidArgumentError(f"horizon must be > 0, got {T}")
    return math.sqrt(m ** ell / ((m - 1) * T))


# ============================================
# GRADIENT INTEGRANDS
# ============================================
def _gradient(theta, squared, w_T, T: float, what: str) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    w_T = np.asarray(w_T, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        inverse_weight = np.exp(-log_girsanov_weight(theta, w_T, T))
        grad = (theta * T - w_T) * np.asarray(squared * inverse_weight)[..., None]
    if not np.all(np.isfinite(grad)):
        raise NumericalOverflowError(f"non-finite {what} gradient sample")
    return grad


def grad_H_level(theta, psi_fine, psi_coarse, w_T, scale: LevelScale) -> np.ndarray:
    """(theta T - W_T) (r_l (psi_fine - psi_coarse))^2 exp(-theta.W_T + |theta|^2 T / 2)."""
    if scale.ell < 1:
        raise InvalidArgumentError(f"grad_H_level needs a level >= 1, got {scale.ell}")
    diff = scale.r_ell * (np.asarray(psi_fine, dtype=float) - np.asarray(psi_coarse, dtype=float))
    return _gradient(theta, diff * diff, w_T, scale.T, f"level-{scale.ell}")


def grad_H_zero(theta, psi_value, w_T, T: float) -> np.ndarray:
    """(theta T - W_T) psi^2 exp(-theta.W_T + |theta|^2 T / 2), the level-0 integrand."""
    psi_value = np.asarray(psi_value, dtype=float)
    return _gradient(theta, psi_value * psi_value, w_T, T, "level-0")


def grad_H_limit(theta, grad_psi_dot_u, w_T, T: float) -> np.ndarray:
    """(theta T - W_T) (grad psi(X_T).U_T)^2 exp(-theta.W_T + |theta|^2 T / 2), integrand of the limit objective."""
    g = np.asarray(grad_psi_dot_u, dtype=float)
    return _gradient(theta, g * g, w_T, T, "limit")
