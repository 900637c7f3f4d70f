from typing import Iterable, Iterator

import numpy as np

# spawn_key prefixes keep the stream families apart
ESTIMATOR_STREAM = 0
ORACLE_STREAM = 1
CALIBRATION_STREAM = 2


# ============================================
# RANDOM STREAMS
# ============================================
def substream(seed: int, *key: int) -> np.random.Generator:
    """
    Deterministic PCG64 stream for (seed, *key).
    Distinct keys give statistically independent streams.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))
    )


def level_stream(seed: int, level: int) -> np.random.Generator:
    return substream(seed, ESTIMATOR_STREAM, level)


def replication_seed(base_seed: int, levels: int, rep: int) -> int:
    """Seed of replication `rep` of a sweep point with `levels` levels."""
    state = np.random.SeedSequence([int(base_seed), int(levels), int(rep)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


# ============================================
# SUMMARY STATISTICS
# ============================================
def mean_and_variance(values: np.ndarray) -> tuple:
    """Sample mean and unbiased sample variance (variance is 0 for fewer than 2 values)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1)) if values.size > 1 else 0.0
    return mean, var


def rmse(estimates: Iterable[float], benchmark: float) -> float:
    """sqrt((1/M) sum (estimate_j - benchmark)^2)."""
    residuals = np.asarray(list(estimates), dtype=float) - benchmark
    if residuals.size == 0:
        raise ValueError("rmse of an empty sample")
    return float(np.sqrt(np.mean(residuals ** 2)))


# ============================================
# CHUNKING
# ============================================
# float64 entries per simulated chunk of Brownian increments
CHUNK_ELEMENTS = 1 << 21


def chunk_size(steps: int, width: int) -> int:
    """Grids per chunk for grids of `steps` x `width` increments."""
    return max(1, CHUNK_ELEMENTS // (steps * width))


def iter_chunks(total: int, size: int) -> Iterator[int]:
    done = 0
    while done < total:
        k = min(size, total - done)
        yield k
        done += k
