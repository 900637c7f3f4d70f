from __future__ import annotations

import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# ============================================
# DEFAULTS
# ============================================
DEFAULT_BOX_HALF_WIDTH = 10.0
DEFAULT_STOP_ITERS = 1000
DEFAULT_MAX_STEP = 1.0
DEFAULT_ORACLE_STEPS = 256
DEFAULT_GRID_SPACING = 0.05
BENCHMARK_PRICE = 49.898585


# ============================================
# STOCHASTIC APPROXIMATION SCHEMAS
# ============================================
class GainSchedule(BaseModel):
    """gamma_i = gamma0 / (i + i0)^rho for the 1-based iterate i; gamma0=1, rho=1, i0=1 gives 1/(i+1)."""
    gamma0: float = Field(1.0, gt=0)
    rho: float = 1.0
    i0: int = Field(1, ge=1)

    model_config = ConfigDict(frozen=True)

    @field_validator("rho")
    @classmethod
    def rho_in_range(cls, v: float) -> float:
        # sum gamma_i = inf and sum gamma_i^2 < inf
        if not (0.5 < v <= 1.0):
            raise ValueError(f"rho must lie in (1/2, 1], got {v}")
        return v

    def gain(self, i: int) -> float:
        return self.gamma0 / float(i + self.i0) ** self.rho


class CompactBox(BaseModel):
    """Product of intervals [lo_j, hi_j] with 0 in the interior."""
    lo: List[float]
    hi: List[float]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def zero_in_interior(self) -> "CompactBox":
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be non-empty and of equal length")
        for j, (lo, hi) in enumerate(zip(self.lo, self.hi)):
            if not (lo < 0.0 < hi):
                raise ValueError(f"coordinate {j}: need lo < 0 < hi, got [{lo}, {hi}]")
        return self

    @classmethod
    def symmetric(cls, half_width: float, q: int) -> "CompactBox":
        return cls(lo=[-half_width] * q, hi=[half_width] * q)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_array(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float)

    def contains(self, theta: np.ndarray) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lo_array) and np.all(theta <= self.hi_array))

    def contains_interior(self, theta: np.ndarray) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta > self.lo_array) and np.all(theta < self.hi_array))


# ============================================
# MLMC SCHEMAS
# ============================================
class LevelPlan(BaseModel):
    m: int = Field(ge=2)
    L: int = Field(ge=1)
    n: int
    alpha: float = Field(ge=0.5, le=1.0)
    T: float = Field(gt=0)
    a: List[float]
    N: List[int]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_levels(self) -> "LevelPlan":
        if self.n != self.m ** self.L:
            raise ValueError(f"n must equal m^L = {self.m ** self.L}, got {self.n}")
        if len(self.a) != self.L + 1 or len(self.N) != self.L + 1:
            raise ValueError(f"a and N need L+1 = {self.L + 1} entries")
        if any(w <= 0 for w in self.a):
            raise ValueError("weights a_l must be positive")
        if any(k < 1 for k in self.N):
            raise ValueError("sample sizes N_l must be positive")
        return self

    def steps(self, level: int) -> int:
        return self.m ** level


class SaConfig(BaseModel):
    gain: GainSchedule = Field(default_factory=GainSchedule)
    box: CompactBox = Field(default_factory=lambda: CompactBox.symmetric(DEFAULT_BOX_HALF_WIDTH, 1))
    theta0: List[float] = Field(default_factory=lambda: [0.0])
    stop_iters: int = Field(DEFAULT_STOP_ITERS, ge=0)
    averaging: bool = True
    algorithm: Literal["projected", "chen"] = "projected"
    warm_start: bool = False
    chen_k0: float = Field(1.0, gt=0)
    chen_literal: bool = False
    normalize_gain: bool = True
    max_step: float = Field(DEFAULT_MAX_STEP, ge=0)  # 0 disables the limit

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def theta0_inside(self) -> "SaConfig":
        if len(self.theta0) != self.box.dim:
            raise ValueError(f"theta0 has {len(self.theta0)} entries, box has {self.box.dim}")
        if not self.box.contains_interior(np.asarray(self.theta0)):
            raise ValueError(f"theta0 {self.theta0} is not in the interior of the box")
        if self.algorithm == "chen" and max(abs(t) for t in self.theta0) > self.chen_k0:
            raise ValueError(f"theta0 {self.theta0} is outside the first Chen compact")
        return self

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def step_limit(self) -> Optional[float]:
        return self.max_step if self.max_step > 0 else None


class LevelReport(BaseModel):
    level: int
    N: int
    n_used: int
    sample_mean: float
    sample_variance: float
    standard_error: float
    theta_final: List[float]
    overflow_count: int = 0
    adapted_iters: int = 0
    skipped_updates: int = 0
    euler_steps: int = 0


class EstimatorReport(BaseModel):
    method: str
    estimate: float
    per_level: List[LevelReport]
    euler_steps_total: int
    wall_seconds: float
    seed: int
    plan: LevelPlan
    total_variance: float
    standard_error: float

    @property
    def overflow_count(self) -> int:
        return sum(level.overflow_count for level in self.per_level)

    @property
    def skipped_updates(self) -> int:
        return sum(level.skipped_updates for level in self.per_level)

    @property
    def theta_hat(self) -> List[List[float]]:
        return [level.theta_final for level in self.per_level]


class ComplexityReport(BaseModel):
    steps_standard: int
    steps_ais: int
    ratio: float
    overhead_bound: int
    optimal_standard: float
    optimal_ais: float


# ============================================
# ORACLE SCHEMAS
# ============================================
class BsParams(BaseModel):
    s0: float = Field(gt=0)
    K: float = Field(gt=0)
    r: float
    sigma: float = Field(gt=0)
    T: float = Field(gt=0)

    model_config = ConfigDict(frozen=True)


BENCHMARK_PARAMS = BsParams(s0=130.0, K=100.0, r=math.log(1.1), sigma=0.6, T=1.0)


class VarianceSurface(BaseModel):
    theta_grid: List[List[float]]
    values: List[float]
    std_errors: List[float]
    samples_per_point: int
    level: Optional[int] = None  # None stands for the limit objective v

    @model_validator(mode="after")
    def check_surface(self) -> "VarianceSurface":
        if not self.theta_grid:
            raise ValueError("surface needs at least one grid point")
        if not (len(self.theta_grid) == len(self.values) == len(self.std_errors)):
            raise ValueError("grid, values and std_errors must have equal length")
        for prev, cur in zip(self.theta_grid, self.theta_grid[1:]):
            if not tuple(prev) < tuple(cur):
                raise ValueError(f"grid points must be strictly increasing: {prev} then {cur}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("surface values must be finite")
        if any(s < 0 for s in self.std_errors):
            raise ValueError("standard errors must be non-negative")
        return self


class WeakErrorFit(BaseModel):
    step_counts: List[int]
    biases: List[float]
    std_errors: List[float]
    slope: float
    intercept: float
    slope_stderr: float
    alpha: float
    c_psi: float

    @model_validator(mode="after")
    def check_fit(self) -> "WeakErrorFit":
        if len(self.step_counts) < 3:
            raise ValueError("a weak-error fit needs at least 3 step counts")
        if not math.isfinite(self.slope):
            raise ValueError("fitted slope is not finite")
        return self


# ============================================
# BENCH SCHEMAS
# ============================================
class RunConfig(BaseModel):
    method: Literal["standard", "ais", "ais-chen"] = "ais"

    # model
    model: Literal["black-scholes"] = "black-scholes"
    s0: float = Field(gt=0)
    K: float = Field(gt=0)
    r: float
    sigma: float = Field(gt=0)
    T: float = Field(gt=0)
    payoff: Literal["call"] = "call"

    # plan
    m: int = Field(ge=2)
    L: int = Field(ge=1)
    alpha: float = Field(1.0, ge=0.5, le=1.0)
    a0: float = Field(1.0, gt=0)

    # stochastic approximation
    gamma0: float = Field(1.0, gt=0)
    rho: float = 1.0
    i0: int = Field(1, ge=1)
    I: int = Field(DEFAULT_STOP_ITERS, ge=0)
    box_half_width: float = Field(DEFAULT_BOX_HALF_WIDTH, gt=0)
    theta0: float = 0.0
    averaging: bool = True
    warm_start: bool = False
    chen_k0: float = Field(1.0, gt=0)
    chen_literal: bool = False
    normalize_gain: bool = True
    max_step: float = Field(DEFAULT_MAX_STEP, ge=0)

    # experiment
    repetitions: int = Field(50, ge=1)
    seed: int = Field(0, ge=0)
    output: Optional[str] = None
    benchmark: Optional[float] = None
    sweep_levels: List[int] = Field(default_factory=lambda: [2, 3, 4, 5])
    calibration_level: int = Field(3, ge=0)
    oracle_samples: int = Field(100_000, ge=2)
    oracle_steps: int = Field(DEFAULT_ORACLE_STEPS, ge=1)
    grid_spacing: float = Field(DEFAULT_GRID_SPACING, gt=0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("rho")
    @classmethod
    def rho_in_range(cls, v: float) -> float:
        if not (0.5 < v <= 1.0):
            raise ValueError(f"rho must lie in (1/2, 1], got {v}")
        return v

    @model_validator(mode="after")
    def check_cross_fields(self) -> "RunConfig":
        if not (-self.box_half_width < self.theta0 < self.box_half_width):
            raise ValueError("theta0 must lie in the interior of the box")
        if any(level < 1 for level in self.sweep_levels):
            raise ValueError("sweep_levels must be >= 1")
        return self

    def bs_params(self) -> BsParams:
        return BsParams(s0=self.s0, K=self.K, r=self.r, sigma=self.sigma, T=self.T)

    def sa_config(self) -> SaConfig:
        return SaConfig(
            gain=GainSchedule(gamma0=self.gamma0, rho=self.rho, i0=self.i0),
            box=CompactBox.symmetric(self.box_half_width, 1),
            theta0=[self.theta0],
            stop_iters=self.I,
            averaging=self.averaging,
            algorithm="chen" if self.method == "ais-chen" else "projected",
            warm_start=self.warm_start,
            chen_k0=self.chen_k0,
            chen_literal=self.chen_literal,
            normalize_gain=self.normalize_gain,
            max_step=self.max_step,
        )


class SweepRow(BaseModel):
    method: str
    m: int
    L: int
    n: int
    I: int
    rep: int
    estimate: float
    abs_error: Optional[float] = None
    theta_hat: List[List[float]] = Field(default_factory=list)
    euler_steps: int
    wall_seconds: float
    seed: int

    @model_validator(mode="after")
    def n_is_power(self) -> "SweepRow":
        if self.n != self.m ** self.L:
            raise ValueError(f"n must equal m^L = {self.m ** self.L}, got {self.n}")
        return self


class SweepSummary(BaseModel):
    method: str
    L: int
    n: int
    rmse: float
    total_wall_seconds: float
    total_euler_steps: int
    degraded_count: int = 0


class CalibrationResult(BaseModel):
    level: int
    iterates: List[List[float]]
    averages: List[List[float]]
    theta_final: List[float]
    oracle_theta: Optional[List[float]] = None
    distance: Optional[float] = None
    skipped_updates: int = 0
