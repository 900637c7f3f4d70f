"""
Euler-Maruyama simulation of plain and drift-tilted SDEs on shared Brownian grids.

Everything here is pure: random numbers come from caller-owned generators and
no module state is mutated, so the functions are safe to call from many threads.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from exceptions import InvalidArgumentError, NumericalOverflowError
from models import SdeModel

logger = logging.getLogger(__name__)


# ============================================
# TYPES
# ============================================
@dataclass(frozen=True)
class BrownianGrid:
    """Increments of a q-dimensional Brownian motion on a uniform grid of [0, T]."""
    steps: int
    dim: int
    horizon: float
    dt: float
    increments: np.ndarray  # (steps, dim)
    endpoint_sum: np.ndarray  # W_T, (dim,)

    @classmethod
    def from_increments(cls, increments: np.ndarray, horizon: float) -> "BrownianGrid":
        increments = np.asarray(increments, dtype=float)
        if increments.ndim == 1:
            increments = increments[:, None]
        n, q = increments.shape
        if n < 1:
            raise InvalidArgumentError("a Brownian grid needs at least one step")
        return cls(
            steps=n,
            dim=q,
            horizon=horizon,
            dt=horizon / n,
            increments=increments,
            endpoint_sum=left_to_right_sum(increments),
        )


@dataclass(frozen=True)
class TerminalPair:
    fine_value: np.ndarray
    coarse_value: np.ndarray
    level: int
    refinement: int


def left_to_right_sum(increments: np.ndarray) -> np.ndarray:
    """Sum over the step axis (axis -2) in a fixed left-to-right order."""
    return np.cumsum(increments, axis=-2)[..., -1, :]


# ============================================
# BROWNIAN GRIDS
# ============================================
def draw_increments(stream: np.random.Generator, count: int, n: int, q: int, T: float) -> np.ndarray:
    """
    `count` independent grids as one (count, n, q) array of N(0, T/n) entries.
    Consumes the stream exactly like `count` successive generate_brownian_grid calls.
    """
    if n < 1 or q < 1:
        raise InvalidArgumentError(f"need n >= 1 and q >= 1, got n={n}, q={q}")
    if not T > 0:
        raise InvalidArgumentError(f"horizon must be > 0, got {T}")
    return stream.standard_normal((count, n, q)) * math.sqrt(T / n)


def generate_brownian_grid(n: int, q: int, T: float, stream: np.random.Generator) -> BrownianGrid:
    increments = draw_increments(stream, 1, n, q, T)[0]
    return BrownianGrid.from_increments(increments, T)


def coarsen_increments(increments: np.ndarray, m: int) -> np.ndarray:
    """Batched coarsening over axis -2: coarse step k sums fine steps mk..mk+m-1, left to right."""
    if m < 1:
        raise InvalidArgumentError(f"refinement must be >= 1, got {m}")
    n = increments.shape[-2]
    if n % m != 0:
        raise InvalidArgumentError(f"{n} steps are not divisible by m={m}")
    if m == 1:
        return increments
    blocks = increments.reshape(increments.shape[:-2] + (n // m, m, increments.shape[-1]))
    coarse = blocks[..., 0, :].copy()
    for j in range(1, m):
        coarse += blocks[..., j, :]
    return coarse


def coarsen(grid: BrownianGrid, m: int) -> BrownianGrid:
    if m == 1:
        return grid
    coarse = coarsen_increments(grid.increments, m)
    # W_T is carried over so fine and coarse paths see the same endpoint bitwise
    return BrownianGrid(
        steps=grid.steps // m,
        dim=grid.dim,
        horizon=grid.horizon,
        dt=grid.horizon / (grid.steps // m),
        increments=coarse,
        endpoint_sum=grid.endpoint_sum,
    )


# ============================================
# EULER SCHEME
# ============================================
def _check_theta(model: SdeModel, theta) -> Optional[np.ndarray]:
    """None stands for the untilted scheme (theta identically zero)."""
    if theta is None:
        return None
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != model.dim_noise:
        raise InvalidArgumentError(
            f"theta has {theta.shape[-1]} components, model has q={model.dim_noise}"
        )
    if not np.any(theta):
        return None
    return theta


def _euler(model: SdeModel, theta: Optional[np.ndarray], increments: np.ndarray, dt: float,
           raise_on_overflow: bool) -> np.ndarray:
    batch, n, _ = increments.shape
    x = np.broadcast_to(model.x0, (batch, model.dim_state)).copy()
    per_row = theta is not None and theta.ndim == 2

    for k in range(n):
        sigma = model.diffusion(x)
        drift = model.drift(x)
        if theta is not None:
            if per_row:
                drift = drift + np.einsum("bdq,bq->bd", sigma, theta)
            else:
                drift = drift + sigma @ theta
        x = x + drift * dt + np.einsum("bdq,bq->bd", sigma, increments[:, k, :])

        if raise_on_overflow and not np.all(np.isfinite(x)):
            raise NumericalOverflowError("non-finite state in Euler scheme", step=k + 1)
    return x


def simulate_terminals(model: SdeModel, theta, increments: np.ndarray, T: float) -> np.ndarray:
    """
    Batched Euler terminal values, shape (B, d), for increments of shape (B, n, q).
    theta is (q,), (B, q) or None. Rows that blow up are returned non-finite.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 3 or increments.shape[2] != model.dim_noise:
        raise InvalidArgumentError(
            f"increments must have shape (B, n, {model.dim_noise}), got {increments.shape}"
        )
    theta = _check_theta(model, theta)
    with np.errstate(over="ignore", invalid="ignore"):
        return _euler(model, theta, increments, T / increments.shape[1], raise_on_overflow=False)


def simulate_coupled(model: SdeModel, theta, increments: np.ndarray, m: int, T: float
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Fine and coarse terminal values on the same batch of fine grids."""
    fine = simulate_terminals(model, theta, increments, T)
    coarse = simulate_terminals(model, theta, coarsen_increments(increments, m), T)
    return fine, coarse


def euler_terminal(model: SdeModel, theta, grid: BrownianGrid) -> np.ndarray:
    """
    X_T after grid.steps explicit Euler steps with drift b + sum_j theta_j sigma_j.
    theta = 0 gives the plain scheme, bitwise.
    """
    if grid.dim != model.dim_noise:
        raise InvalidArgumentError(f"grid has q={grid.dim}, model has q={model.dim_noise}")
    theta = _check_theta(model, theta)
    if theta is not None and theta.ndim != 1:
        raise InvalidArgumentError("euler_terminal takes a single theta vector")
    with np.errstate(over="ignore", invalid="ignore"):
        x = _euler(model, theta, grid.increments[None, :, :], grid.dt, raise_on_overflow=True)
    return x[0]


def euler_pair(model: SdeModel, theta, fine_grid: BrownianGrid, m: int) -> TerminalPair:
    level = round(math.log(fine_grid.steps) / math.log(m)) if fine_grid.steps > 1 else 0
    if level < 1 or m ** level != fine_grid.steps:
        raise InvalidArgumentError(f"{fine_grid.steps} steps is not m^l with l >= 1 for m={m}")
    return TerminalPair(
        fine_value=euler_terminal(model, theta, fine_grid),
        coarse_value=euler_terminal(model, theta, coarsen(fine_grid, m)),
        level=level,
        refinement=m,
    )


def euler_path(model: SdeModel, theta, grid: BrownianGrid) -> np.ndarray:
    """Debug hook: the whole Euler path, shape (steps + 1, d)."""
    theta = _check_theta(model, theta)
    path = np.empty((grid.steps + 1, model.dim_state))
    path[0] = model.x0
    for k in range(grid.steps):
        sub = BrownianGrid.from_increments(grid.increments[k:k + 1], grid.dt)
        shifted = SdeModel(
            dim_state=model.dim_state,
            dim_noise=model.dim_noise,
            drift=model.drift,
            diffusion=model.diffusion,
            x0=path[k],
            horizon=grid.dt,
        )
        path[k + 1] = euler_terminal(shifted, theta, sub)
    return path
