from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from exceptions import InvalidArgumentError

# Batched callables: states have a leading batch axis, x.shape == (B, d).
VectorField = Callable[[np.ndarray], np.ndarray]


# ============================================
# SDE MODELS
# ============================================
@dataclass(frozen=True)
class SdeModel:
    """
    dX = b(X) dt + sum_j sigma_j(X) dW^j on [0, T], X_0 = x0.

    `diffusion(x)` returns shape (B, d, q); column j is sigma_j.
    The Jacobians are only needed by the oracle:
    `drift_jacobian(x)` -> (B, d, d), `diffusion_jacobian(x)` -> (B, q, d, d).
    """
    dim_state: int
    dim_noise: int
    drift: VectorField
    diffusion: VectorField
    x0: np.ndarray
    horizon: float
    drift_jacobian: Optional[VectorField] = None
    diffusion_jacobian: Optional[VectorField] = None
    name: str = field(default="sde")

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise InvalidArgumentError(
                f"dimensions must be positive, got d={self.dim_state}, q={self.dim_noise}"
            )
        if not self.horizon > 0:
            raise InvalidArgumentError(f"horizon must be > 0, got {self.horizon}")

        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape != (self.dim_state,):
            raise InvalidArgumentError(f"x0 must have length {self.dim_state}, got {x0.shape[0]}")
        object.__setattr__(self, "x0", x0)

        # coefficient shapes, checked once at the initial state
        start = x0[None, :]
        b = np.asarray(self.drift(start))
        if b.shape != (1, self.dim_state):
            raise InvalidArgumentError(f"drift returned shape {b.shape}, expected (1, {self.dim_state})")
        s = np.asarray(self.diffusion(start))
        if s.shape != (1, self.dim_state, self.dim_noise):
            raise InvalidArgumentError(
                f"diffusion returned shape {s.shape}, expected (1, {self.dim_state}, {self.dim_noise})"
            )

    @property
    def has_jacobians(self) -> bool:
        return self.drift_jacobian is not None and self.diffusion_jacobian is not None

    def diffusion_columns(self) -> List[VectorField]:
        """The q column fields sigma_j as separate callables."""
        return [
            (lambda x, j=j: self.diffusion(x)[..., j])
            for j in range(self.dim_noise)
        ]


def black_scholes_model(s0: float, r: float, sigma: float, T: float) -> SdeModel:
    """dS = r S dt + sigma S dW (d = q = 1)."""
    if s0 <= 0:
        raise InvalidArgumentError(f"s0 must be > 0, got {s0}")
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")

    def drift(x):
        return r * x

    def diffusion(x):
        return sigma * x[..., None]

    def drift_jacobian(x):
        return np.full((x.shape[0], 1, 1), r)

    def diffusion_jacobian(x):
        return np.full((x.shape[0], 1, 1, 1), sigma)

    return SdeModel(
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        x0=np.array([s0]),
        horizon=T,
        drift_jacobian=drift_jacobian,
        diffusion_jacobian=diffusion_jacobian,
        name="black-scholes",
    )


def ornstein_uhlenbeck_model(x0: float, kappa: float, mean: float, sigma: float, T: float) -> SdeModel:
    """dX = kappa (mean - X) dt + sigma dW; additive noise, so every sigma_j Jacobian is zero."""

    def drift(x):
        return kappa * (mean - x)

    def diffusion(x):
        return np.full((x.shape[0], 1, 1), sigma)

    def drift_jacobian(x):
        return np.full((x.shape[0], 1, 1), -kappa)

    def diffusion_jacobian(x):
        return np.zeros((x.shape[0], 1, 1, 1))

    return SdeModel(
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        x0=np.array([x0]),
        horizon=T,
        drift_jacobian=drift_jacobian,
        diffusion_jacobian=diffusion_jacobian,
        name="ornstein-uhlenbeck",
    )


def model_from_params(params) -> SdeModel:
    """Black-Scholes model for a `schemas.BsParams`."""
    return black_scholes_model(params.s0, params.r, params.sigma, params.T)


# ============================================
# PAYOFFS
# ============================================
class DiscountedCall:
    """psi(x) = e^{-rT} (x_k - K)_+ on one coordinate of the state."""

    def __init__(self, strike: float, discount: float = 1.0, index: int = 0):
        if strike <= 0:
            raise InvalidArgumentError(f"strike must be > 0, got {strike}")
        self.strike = strike
        self.discount = discount
        self.index = index

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.discount * np.maximum(x[..., self.index] - self.strike, 0.0)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        # subgradient 1_{x > K}; the kink has probability zero under a density
        grad = np.zeros_like(x)
        grad[..., self.index] = self.discount * (x[..., self.index] > self.strike)
        return grad

    def __repr__(self):
        return f"DiscountedCall(strike={self.strike}, discount={self.discount})"


class ConstantPayoff:
    def __init__(self, value: float):
        self.value = value

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.value, dtype=float)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)

    def __repr__(self):
        return f"ConstantPayoff({self.value})"


def call_from_params(params) -> DiscountedCall:
    """Discounted call payoff e^{-rT}(x - K)_+ for a `schemas.BsParams`."""
    return DiscountedCall(params.K, discount=float(np.exp(-params.r * params.T)))
