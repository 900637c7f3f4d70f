import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from exceptions import ExportError
from schemas import SweepRow, VarianceSurface, WeakErrorFit

logger = logging.getLogger(__name__)

SWEEP_HEADER = [
    "method", "m", "L", "n", "I", "rep", "estimate", "abs_error",
    "theta_hat", "euler_steps", "wall_seconds", "seed",
]
TRAJECTORY_HEADER = ["iter", "theta", "theta_avg"]
SURFACE_HEADER = ["level", "theta", "value", "std_error"]
WEAK_ERROR_HEADER = ["n", "bias", "std_error", "slope", "slope_stderr", "alpha", "c_psi"]

PathLike = Union[str, Path]


def format_real(x: float) -> str:
    return format(float(x), ".17g")


def format_point(theta: Sequence[float]) -> str:
    return ":".join(format_real(c) for c in theta)


def format_theta_hat(theta_hat: Sequence[Sequence[float]]) -> str:
    """Per-level tilts joined with ';', coordinates with ':'."""
    return ";".join(format_point(theta) for theta in theta_hat)


def parse_theta_hat(text: str) -> List[List[float]]:
    if not text:
        return []
    return [[float(c) for c in level.split(":")] for level in text.split(";")]


def _write(path: PathLike, header: List[str], records: Iterable[List[str]]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            count = 0
            for record in records:
                writer.writerow(record)
                count += 1
    except OSError as e:
        raise ExportError(f"cannot write results ({e.strerror})", str(path)) from e
    logger.info(f"Wrote {count} rows to {path}")
    return path


# ============================================
# SWEEP ROWS
# ============================================
def sweep_record(row: SweepRow) -> List[str]:
    return [
        row.method,
        str(row.m),
        str(row.L),
        str(row.n),
        str(row.I),
        str(row.rep),
        format_real(row.estimate),
        "" if row.abs_error is None else format_real(row.abs_error),
        format_theta_hat(row.theta_hat),
        str(row.euler_steps),
        format_real(row.wall_seconds),
        str(row.seed),
    ]


def emit_csv(rows: Iterable[SweepRow], path: PathLike) -> Path:
    """Write sweep rows under SWEEP_HEADER in the order given."""
    return _write(path, SWEEP_HEADER, (sweep_record(row) for row in rows))


def read_csv(path: PathLike) -> List[SweepRow]:
    path = Path(path)
    try:
        with path.open(newline="") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames
            records = list(reader)
    except OSError as e:
        raise ExportError(f"cannot read results ({e.strerror})", str(path)) from e
    if header != SWEEP_HEADER:
        raise ExportError(f"unexpected header {header}", str(path))

    return [
        SweepRow(
            method=r["method"],
            m=int(r["m"]),
            L=int(r["L"]),
            n=int(r["n"]),
            I=int(r["I"]),
            rep=int(r["rep"]),
            estimate=float(r["estimate"]),
            abs_error=float(r["abs_error"]) if r["abs_error"] else None,
            theta_hat=parse_theta_hat(r["theta_hat"]),
            euler_steps=int(r["euler_steps"]),
            wall_seconds=float(r["wall_seconds"]),
            seed=int(r["seed"]),
        )
        for r in records
    ]


# ============================================
# CALIBRATION AND ORACLE OUTPUT
# ============================================
def emit_trajectory_csv(iterates: np.ndarray, averages: np.ndarray, path: PathLike) -> Path:
    records = (
        [str(i), format_point(theta), format_point(avg)]
        for i, (theta, avg) in enumerate(zip(iterates, averages))
    )
    return _write(path, TRAJECTORY_HEADER, records)


def emit_surface_csv(surfaces: Iterable[VarianceSurface], path: PathLike) -> Path:
    """One row per grid point; the limit surface has level 'limit'."""
    def records():
        for surface in surfaces:
            level = "limit" if surface.level is None else str(surface.level)
            for theta, value, se in zip(surface.theta_grid, surface.values, surface.std_errors):
                yield [level, format_point(theta), format_real(value), format_real(se)]

    return _write(path, SURFACE_HEADER, records())


def emit_weak_error_csv(fit: WeakErrorFit, path: PathLike) -> Path:
    """One row per step count; the fitted slope, alpha and C_psi repeat on every row."""
    shared = [format_real(fit.slope), format_real(fit.slope_stderr), format_real(fit.alpha),
              format_real(fit.c_psi)]
    records = (
        [str(n), format_real(bias), format_real(se)] + shared
        for n, bias, se in zip(fit.step_counts, fit.biases, fit.std_errors)
    )
    return _write(path, WEAK_ERROR_HEADER, records)
