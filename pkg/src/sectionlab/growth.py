"""Growth-function estimation and admissibility spot checks.

The growth function of a section family compares how fast the truncated
sums grow at a point against the closed-form prediction max(1, omega/rho).
Estimates are taken over a tail window of truncation indices so that a
single rogue partial sum cannot dominate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bessel import LogComplex, _distance_to_real_rays
from .geometry import WindowBox
from .height import height_many
from .series import (CallableCoefficients, Section, SeriesSpec,
                     _tail_window, convergence_level,
                     section_prefix_log_magnitudes)

__all__ = [
    "AdmissibilityReport",
    "GrowthEstimate",
    "admissibility_check",
    "format_growth_records",
    "growth_estimate",
    "growth_sweep",
]

_FLAGS = ("match", "excluded-exceptional", "near-boundary")

# a tail of partial sums sitting below this magnitude is treated as the
# exceptional "sections converge to zero" case and flagged, not scored
_TINY_LOG = math.log(1e-12)

_RAY_TOL = 1e-9
_BOUNDARY_BAND = 0.1


@dataclass(frozen=True)
class GrowthEstimate:
    """Tail-window growth measurement at one point."""

    z: complex
    mu_hat: float
    window: range
    predicted: float
    flag: str

    def __post_init__(self):
        if not (self.mu_hat >= 0.0):
            raise ValueError("mu_hat must be non-negative")
        if not (self.predicted >= 0.0):
            raise ValueError("predicted must be non-negative")
        if len(self.window) == 0:
            raise ValueError("window must be nonempty")
        if self.flag not in _FLAGS:
            raise ValueError(f"unknown flag {self.flag!r}")


def _tail_exponents(spec: SeriesSpec, window: range) -> np.ndarray:
    lam = np.array([spec.exponent(n) for n in window], dtype=np.float64)
    if np.any(lam <= 0.0):
        raise ValueError("growth exponents must be positive over the tail window")
    return lam


def _estimates_for_batch(spec: SeriesSpec, zs: np.ndarray, n_max: int,
                         rho: float) -> list[GrowthEstimate]:
    window = _tail_window(n_max)
    lam = _tail_exponents(spec, window)
    prefix = section_prefix_log_magnitudes(Section(spec, n_max), zs)
    tail = prefix[window.start:, :]
    with np.errstate(invalid="ignore"):
        mu = np.exp(np.max(tail / lam[:, None], axis=0))
    mu = np.where(np.isnan(mu), 0.0, mu)
    tail_top = np.max(tail, axis=0)
    omega = height_many(spec.family, zs)

    out = []
    for j, z in enumerate(zs):
        z = complex(z)
        ratio = omega[j] / rho if rho > 0.0 else math.inf
        if spec.family == "kapteyn" and _distance_to_real_rays(z) <= _RAY_TOL:
            flag = "excluded-exceptional"
        elif tail_top[j] < _TINY_LOG:
            flag = "excluded-exceptional"
        elif abs(ratio - 1.0) < _BOUNDARY_BAND:
            flag = "near-boundary"
        else:
            flag = "match"
        out.append(GrowthEstimate(z=z, mu_hat=float(mu[j]), window=window,
                                  predicted=max(1.0, ratio), flag=flag))
    return out


def growth_estimate(spec: SeriesSpec, z: complex, n_max: int) -> GrowthEstimate:
    """Measure the tail-window growth ratio at one point.

    mu_hat is the largest |f_n(z)|^(1/lambda_n) over n in the window
    [n_max/2, n_max], computed entirely in log form.  The prediction is
    max(1, omega(z)/rho) with rho taken from convergence_level at the
    same truncation depth.
    """
    if n_max < 64:
        raise ValueError("n_max must be at least 64")
    rho = convergence_level(spec, n_max)
    zs = np.array([complex(z)], dtype=np.complex128)
    return _estimates_for_batch(spec, zs, n_max, rho)[0]


def growth_sweep(spec: SeriesSpec, window: WindowBox, nx: int, ny: int,
                 n_max: int, threads: int = 1) -> list[GrowthEstimate]:
    """Growth estimates over a row-major grid, ordered by grid index.

    Results are independent of the thread count; points are only
    partitioned into contiguous batches.
    """
    if n_max < 64:
        raise ValueError("n_max must be at least 64")
    pts = window.grid(nx, ny)
    rho = convergence_level(spec, n_max)
    threads = max(1, int(threads))
    if threads == 1 or pts.shape[0] <= 1:
        return _estimates_for_batch(spec, pts, n_max, rho)
    blocks = np.array_split(pts, min(threads, pts.shape[0]))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda block: _estimates_for_batch(spec, block, n_max, rho), blocks))
    return [est for part in parts for est in part]


def format_growth_records(estimates) -> str:
    """One structured text record per grid point."""
    lines = []
    for e in estimates:
        lines.append(
            f"z={e.z.real:+.12e}{e.z.imag:+.12e}j"
            f" mu_hat={e.mu_hat:.12e}"
            f" predicted={e.predicted:.12e}"
            f" flag={e.flag}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# admissibility spot check

@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of a grid sweep against the explicit growth bound."""

    ok: bool
    bound: float
    observed: float
    witness_z: complex | None
    witness_n: int | None
    height_radius: float
    coefficient_level: float


def _absolute_spec(spec: SeriesSpec) -> SeriesSpec:
    """Same family and exponents, coefficients replaced by |a_k|."""
    def plain(k: int) -> complex:
        return abs(spec.coefficient(k))

    def logform(k: int) -> LogComplex:
        return LogComplex(spec.coefficient_log(k).log_mag, 0.0)

    stream = CallableCoefficients(plain, logform, "absolute")
    return SeriesSpec(family=spec.family, coefficients=stream,
                      exponents=spec.exponents)


def admissibility_check(spec: SeriesSpec, window: WindowBox, n_max: int,
                        grid: int) -> AdmissibilityReport:
    """Check the tail growth bound eta + max(1, R/rho_a) + 0.1 on a grid.

    R is the largest height over the grid and rho_a the convergence
    level of the absolute-coefficient series.  eta accounts for a
    leading exponent below zero, which contributes one extra unit of
    growth on the left edge of the strip.
    """
    if n_max < 64:
        raise ValueError("n_max must be at least 64")
    if grid < 2:
        raise ValueError("grid must have at least 2 points per side")
    pts = window.grid(grid, grid)
    tail = _tail_window(n_max)
    lam = _tail_exponents(spec, tail)

    omega = height_many(spec.family, pts)
    radius = float(np.max(omega))
    rho_a = convergence_level(_absolute_spec(spec), n_max)
    eta = 1.0 if (spec.family == "dirichlet" and spec.exponent(0) < 0.0) else 0.0
    scale = radius / rho_a if rho_a > 0.0 else math.inf
    bound = eta + max(1.0, scale) + 0.1

    prefix = section_prefix_log_magnitudes(Section(spec, n_max), pts)
    with np.errstate(invalid="ignore"):
        vals = np.exp(prefix[tail.start:, :] / lam[:, None])
    vals = np.where(np.isnan(vals), 0.0, vals)
    observed = float(np.max(vals))
    if observed <= bound:
        return AdmissibilityReport(True, bound, observed, None, None,
                                   radius, rho_a)
    wi, wj = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return AdmissibilityReport(False, bound, observed,
                               complex(pts[wj]), tail.start + int(wi),
                               radius, rho_a)
