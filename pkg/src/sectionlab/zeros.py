"""Zero location by argument-principle counting on rectangles.

The winding number of a section around a box boundary counts enclosed
zeros.  Boxes are split recursively until each holds a single zero,
which Newton iteration then polishes; everything runs on phase data
from the log-form evaluators, so magnitude overflow cannot corrupt a
count.  On top of that sit the clustering and sector-density
statistics.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bessel import wrap_phase, wrap_phase_many
from .geometry import WindowBox
from .series import (Section, section_derivative_log_many, section_eval_log,
                     section_eval_log_many)

__all__ = [
    "CoveringStats",
    "LocatedZero",
    "SectorDensity",
    "ZeroReport",
    "clustering_stats",
    "find_zeros",
    "sector_density",
    "sector_density_prediction",
    "serialize_zero_report",
    "winding_count",
]

_TWO_PI = 2.0 * math.pi

# boundary sampling: refine until each phase step is below this
_MAX_STEP = 0.5 * math.pi
# parameter spacing below this means a zero is pinned to the boundary
_MIN_SPACING = 2.0 ** -40
_INFLATE = 1.0 + 2.0 ** -20
_MAX_INFLATE = 8

_RESIDUAL_FACTOR = 1e-9
_PROBE_RADIUS = 1e-5
_NEWTON_STEPS = 80

# split-fraction ladder tried when child windings disagree with the parent
_SPLIT_LADDER = (
    (0.5, 0.5),
    (0.5 + 1 / 64, 0.5), (0.5 - 1 / 64, 0.5),
    (0.5, 0.5 + 1 / 64), (0.5, 0.5 - 1 / 64),
    (0.5 + 1 / 32, 0.5 - 1 / 32), (0.5 - 1 / 32, 0.5 + 1 / 32),
    (0.5 + 3 / 64, 0.5 + 3 / 64), (0.5 - 3 / 64, 0.5 - 3 / 64),
)


class _BoundaryZero(Exception):
    """A zero sits on (or numerically on) the sampled box boundary."""


@dataclass(frozen=True)
class LocatedZero:
    z: complex
    residual: float
    multiplicity: int
    resolved: bool = True


@dataclass(frozen=True)
class ZeroReport:
    zeros: tuple[LocatedZero, ...]
    total_winding: int
    boxes_resolved: int
    params: dict = field(compare=False)

    def __post_init__(self):
        if sum(z.multiplicity for z in self.zeros) != self.total_winding:
            raise ValueError("zero multiplicities do not add up to the winding total")


@dataclass(frozen=True)
class CoveringStats:
    covering_radius: float
    mean_distance: float
    distances: tuple[float, ...]


@dataclass(frozen=True)
class SectorDensity:
    theta: float
    delta: float
    r_values: tuple[float, ...]
    counts: tuple[int, ...]
    slope: float

    def __post_init__(self):
        if any(b < a for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("sector counts must be non-decreasing in r")


# ---------------------------------------------------------------------------
# winding number

def _boundary_points(box: WindowBox, ts: np.ndarray) -> np.ndarray:
    """Map parameters in [0, 4) to boundary points, counterclockwise."""
    w = box.width
    h = box.height
    out = np.empty(ts.shape, dtype=np.complex128)
    e = np.floor(ts).astype(np.int64)
    u = ts - e
    lo, hi = box.lo, box.hi
    m0 = e == 0
    out[m0] = lo + u[m0] * w
    m1 = e == 1
    out[m1] = complex(hi.real, lo.imag) + 1j * u[m1] * h
    m2 = e == 2
    out[m2] = hi - u[m2] * w
    m3 = e >= 3
    out[m3] = complex(lo.real, hi.imag) - 1j * u[m3] * h
    return out


def _point_at(box: WindowBox, t: float) -> complex:
    return complex(_boundary_points(box, np.array([t]))[0])


def _segment_origin_distance(z0: complex, z1: complex) -> float:
    seg = z1 - z0
    den = abs(seg) ** 2
    if den == 0.0:
        return abs(z0)
    u = -(z0.real * seg.real + z0.imag * seg.imag) / den
    u = min(1.0, max(0.0, u))
    return abs(z0 + u * seg)


def _top_live_index(section: Section) -> int:
    spec = section.spec
    for k in range(section.n, -1, -1):
        if spec.coefficient_log(k).log_mag > -math.inf:
            return k
    return 0


def _phase_rate_bound(section: Section, n_top: int, z0: complex,
                      z1: complex) -> float:
    """Upper bound on |d arg f / ds| from the fastest basis term.

    Needed because refinement driven by measured phase steps alone can
    alias: where the dominant term spins through nearly 2 pi between
    samples the measured step looks tiny.  Cancellation-driven swings
    near a boundary zero are localized and do show up in measured
    steps, so they are left to the refinement loop.
    """
    spec = section.spec
    if spec.family == "dirichlet":
        return max(abs(spec.exponent(0)), abs(spec.exponent(section.n)))
    d = _segment_origin_distance(z0, z1)
    d = max(d, 1e-12 * (1.0 + abs(z0) + abs(z1)))
    if spec.family == "power":
        return n_top / d
    if spec.family == "kapteyn":
        return n_top * (1.0 + 1.0 / d)
    return n_top / d + 1.2          # neumann


# keep each seeded interval's worst-case phase change under this
_BUDGET = 0.25 * math.pi


def _seed_params(section: Section, n_top: int, box: WindowBox) -> list[float]:
    """Boundary parameters dense enough that no interval hides a turn."""
    base = [e + j / 16 for e in range(4) for j in range(16)] + [4.0]
    out = [base[0]]
    for t0, t1 in zip(base, base[1:]):
        stack = [(t0, t1)]
        while stack:
            a, b = stack.pop()
            za, zb = _point_at(box, a), _point_at(box, b)
            if (b - a) >= _MIN_SPACING and \
                    _phase_rate_bound(section, n_top, za, zb) * abs(zb - za) >= _BUDGET:
                m = 0.5 * (a + b)
                stack.append((m, b))
                stack.append((a, m))
            else:
                out.append(b)
    return out


def _boundary_phases(section: Section, box: WindowBox):
    """Adaptively sampled boundary phases with all steps below pi/2."""
    n_top = _top_live_index(section)
    ts = _seed_params(section, n_top, box)
    ph = list(_phases_or_raise(section, _boundary_points(box, np.array(ts[:-1]))))
    # close the loop with the starting sample
    ph.append(ph[0])
    while True:
        deltas = wrap_phase_many(np.diff(np.array(ph)))
        bad = np.abs(deltas) >= _MAX_STEP
        if not bad.any():
            return np.array(ts), np.array(ph), deltas
        mids = []
        for i in np.flatnonzero(bad):
            if ts[i + 1] - ts[i] < _MIN_SPACING:
                raise _BoundaryZero
            mids.append(0.5 * (ts[i] + ts[i + 1]))
        mph = _phases_or_raise(section, _boundary_points(box, np.array(mids)))
        for t, p in zip(mids, mph):
            j = bisect.bisect_left(ts, t)
            ts.insert(j, t)
            ph.insert(j, p)


def _phases_or_raise(section: Section, zs: np.ndarray) -> np.ndarray:
    lm, ph = section_eval_log_many(section, zs)
    if np.any(np.isneginf(lm)):
        raise _BoundaryZero
    return ph


def _winding_with_retries(section: Section, box: WindowBox) -> tuple[int, WindowBox]:
    """Winding number, inflating the box away from boundary zeros."""
    last = None
    for attempt in range(_MAX_INFLATE + 1):
        trial = box if attempt == 0 else box.inflate(_INFLATE ** attempt)
        try:
            _, _, deltas = _boundary_phases(section, trial)
        except _BoundaryZero as exc:
            last = exc
            continue
        total = math.fsum(deltas.tolist())
        count = round(total / _TWO_PI)
        if abs(total / _TWO_PI - count) >= 0.25:
            last = _BoundaryZero()
            continue
        return int(count), trial
    raise RuntimeError(
        f"winding count kept hitting a boundary zero on {box.lo}..{box.hi}"
    ) from last


def winding_count(section: Section, box: WindowBox) -> int:
    """Number of zeros of the section inside the box, by argument principle.

    A zero pinned to the boundary triggers deterministic inflation by
    powers of (1 + 2^-20); the count then refers to the inflated box.
    """
    count, _ = _winding_with_retries(section, box)
    return count


# ---------------------------------------------------------------------------
# Newton polishing

def _log_ratio_step(section: Section, z: complex) -> complex | None:
    """f(z)/f'(z) without overflow; None when the derivative vanishes."""
    zs = np.array([z], dtype=np.complex128)
    flm, fph = section_eval_log_many(section, zs)
    if np.isneginf(flm[0]):
        return 0j
    dlm, dph = section_derivative_log_many(section, zs)
    if np.isneginf(dlm[0]):
        return None
    gap = float(flm[0] - dlm[0])
    if gap > 700.0:
        return None
    return math.exp(gap) * complex(math.cos(fph[0] - dph[0]),
                                   math.sin(fph[0] - dph[0]))


def _polish(section: Section, box: WindowBox) -> tuple[complex, float] | None:
    """Newton-polish the single zero of the box from its center."""
    z = box.center
    leash = box.inflate(2.0)
    settled = False
    for _ in range(_NEWTON_STEPS):
        step = _log_ratio_step(section, z)
        if step is None:
            return None
        z_new = z - step
        if not leash.contains(z_new):
            return None
        small = abs(step) <= 1e-15 * (1.0 + abs(z_new))
        z = z_new
        if small and settled:
            break
        settled = small
    else:
        return None
    if not box.contains(z):
        return None
    return _certify(section, z)


def _certify(section: Section, z: complex) -> tuple[complex, float] | None:
    """Residual test against the section's scale on a tiny circle."""
    r = _PROBE_RADIUS * (1.0 + abs(z))
    ring = z + r * np.exp(2j * math.pi * np.arange(8) / 8.0)
    lm, _ = section_eval_log_many(section, ring)
    scale_lm = float(np.max(lm))
    here = section_eval_log(section, z)
    if not here.log_mag <= math.log(_RESIDUAL_FACTOR) + scale_lm:
        return None
    residual = math.exp(here.log_mag) if math.isfinite(here.log_mag) else 0.0
    return z, residual


# ---------------------------------------------------------------------------
# recursive subdivision

def _split_box(section: Section, box: WindowBox, count: int):
    """Children of the box whose windings add up to the parent count."""
    for fx, fy in _SPLIT_LADDER:
        kids = box.split(fx, fy)
        resolved = [_winding_with_retries(section, kid) for kid in kids]
        if sum(c for c, _ in resolved) == count:
            return [(c, used) for (c, used), kid in zip(resolved, kids) if c > 0]
    raise RuntimeError(
        f"child windings never matched the parent on {box.lo}..{box.hi}")


def _process_box(section: Section, box: WindowBox, count: int, depth: int,
                 max_depth: int):
    """One subdivision step: (terminal records, child work items)."""
    if count == 1:
        hit = _polish(section, box)
        if hit is not None:
            z, residual = hit
            return [LocatedZero(z, residual, 1)], []
    if depth >= max_depth:
        here = section_eval_log(section, box.center)
        residual = math.exp(min(here.log_mag, 709.0))
        return [LocatedZero(box.center, residual, count, resolved=False)], []
    kids = _split_box(section, box, count)
    return [], [(kid, c, depth + 1) for c, kid in kids]


def _merge_close(zeros: list[LocatedZero], tol: float) -> list[LocatedZero]:
    """Merge zeros within tol of each other, adding multiplicities."""
    zeros = sorted(zeros, key=lambda lz: (lz.z.real, lz.z.imag))
    merged: list[LocatedZero] = []
    for lz in zeros:
        for i, kept in enumerate(merged):
            if abs(kept.z - lz.z) <= tol:
                m = kept.multiplicity + lz.multiplicity
                center = (kept.z * kept.multiplicity
                          + lz.z * lz.multiplicity) / m
                merged[i] = LocatedZero(center,
                                        max(kept.residual, lz.residual), m,
                                        kept.resolved and lz.resolved)
                break
        else:
            merged.append(lz)
    merged.sort(key=lambda lz: (lz.z.real, lz.z.imag))
    return merged


def _dedup_overlap(zeros: list[LocatedZero], tol: float) -> list[LocatedZero]:
    """Drop repeats of the same zero found by overlapping covers.

    Unlike _merge_close this keeps one representative per cluster
    instead of adding multiplicities, since the duplicates come from
    boxes that cover the same zero twice.
    """
    zeros = sorted(zeros, key=lambda lz: (lz.z.real, lz.z.imag))
    kept: list[LocatedZero] = []
    for lz in zeros:
        for i, rep in enumerate(kept):
            if abs(rep.z - lz.z) <= tol:
                if lz.multiplicity > rep.multiplicity:
                    kept[i] = lz
                break
        else:
            kept.append(lz)
    return kept


def find_zeros(section: Section, box: WindowBox, max_depth: int = 40,
               threads: int = 1) -> ZeroReport:
    """All zeros of the section in the box, polished and deduplicated.

    Boxes that still hold several zeros at max_depth come back as
    cluster records flagged unresolved, never silently dropped.  The
    result is identical for any thread count.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be positive")
    total, outer = _winding_with_retries(section, box)
    records: list[LocatedZero] = []
    boxes_resolved = 0
    level: list[tuple[WindowBox, int, int]] = []
    if total > 0:
        level = [(outer, total, 0)]
    threads = max(1, int(threads))
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while level:
            work = [(b, c, d) for b, c, d in level]
            if pool is None:
                results = [_process_box(section, b, c, d, max_depth)
                           for b, c, d in work]
            else:
                results = list(pool.map(
                    lambda item: _process_box(section, *item[:3],
                                              max_depth=max_depth), work))
            level = []
            for terminal, children in results:
                records.extend(terminal)
                boxes_resolved += len(terminal)
                level.extend(children)
    finally:
        if pool is not None:
            pool.shutdown()
    merged = _merge_close(records, 1e-8 * outer.diagonal)
    params = {
        "label": section.spec.label,
        "family": section.spec.family,
        "n": section.n,
        "window": (outer.lo, outer.hi),
        "max_depth": max_depth,
    }
    return ZeroReport(tuple(merged), total, boxes_resolved, params)


# ---------------------------------------------------------------------------
# clustering statistics

def clustering_stats(report: ZeroReport, boundary) -> CoveringStats:
    """Distance from each boundary vertex to its nearest reported zero.

    The covering radius (the largest such distance) shrinking with the
    truncation order is the numerical signature of zeros clustering on
    the boundary curve.
    """
    verts = list(boundary.points)
    if not verts:
        raise ValueError("boundary polyline has no vertices")
    if not report.zeros:
        return CoveringStats(math.inf, math.inf, tuple(math.inf for _ in verts))
    zs = np.array([lz.z for lz in report.zeros])
    dists = tuple(float(np.min(np.abs(zs - v))) for v in verts)
    return CoveringStats(max(dists), sum(dists) / len(dists), dists)


# ---------------------------------------------------------------------------
# sector densities

def _arc_bbox(r0: float, r1: float, a0: float, a1: float) -> WindowBox:
    """Bounding box of {r e^{ia} : r0 <= r <= r1, a0 <= a <= a1}."""
    xs, ys = [], []
    for r in (r0, r1):
        for a in (a0, a1):
            xs.append(r * math.cos(a))
            ys.append(r * math.sin(a))
    k = math.ceil(a0 / (0.5 * math.pi))
    while k * 0.5 * math.pi <= a1:
        a = k * 0.5 * math.pi
        for r in (r0, r1):
            xs.append(r * math.cos(a))
            ys.append(r * math.sin(a))
        k += 1
    pad = 1e-7 * (1.0 + r1)
    return WindowBox(complex(min(xs) - pad, min(ys) - pad),
                     complex(max(xs) + pad, max(ys) + pad))


def sector_density(section: Section, theta: float, delta: float, r_list,
                   max_depth: int = 40, threads: int = 1) -> SectorDensity:
    """Cumulative zero counts along a ray sector and their linear slope.

    Zeros are collected from boxes tiled over radial chunks of the
    sector, merged, then clipped to the exact sector by an angle test.
    """
    r_values = [float(r) for r in r_list]
    if len(r_values) < 2:
        raise ValueError("need at least two radii to fit a slope")
    if any(b <= a for a, b in zip(r_values, r_values[1:])) or r_values[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    if not 0.0 < delta < 0.5 * math.pi:
        raise ValueError("sector half-width must be in (0, pi/2)")

    found: list[LocatedZero] = []
    r_prev = 0.0
    for r in r_values:
        chunk = _arc_bbox(r_prev, r, theta - delta, theta + delta)
        rep = find_zeros(section, chunk, max_depth=max_depth, threads=threads)
        found.extend(rep.zeros)
        r_prev = r
    merged = _dedup_overlap(found, 1e-8 * 2.0 * math.hypot(r_values[-1], r_values[-1]))

    kept = []
    for lz in merged:
        if abs(wrap_phase(math.atan2(lz.z.imag, lz.z.real) - theta)) <= delta \
                and abs(lz.z) <= r_values[-1]:
            kept.append(lz)
    counts = tuple(
        sum(lz.multiplicity for lz in kept if abs(lz.z) <= r) for r in r_values)

    rs = np.array(r_values)
    ns = np.array(counts, dtype=np.float64)
    rbar = rs.mean()
    denom = float(np.sum((rs - rbar) ** 2))
    slope = float(np.sum((rs - rbar) * (ns - ns.mean())) / denom)
    return SectorDensity(theta, delta, tuple(r_values), counts, slope)


def _support_slope(section: Section, phi: float) -> float:
    """One-sided angular derivative of the zero-counting support term."""
    spec = section.spec
    fam = spec.family
    s = math.sin(phi)
    c = math.cos(phi)
    live = [k for k in range(section.n + 1)
            if spec.coefficient_log(k).log_mag > -math.inf]
    if not live:
        raise ValueError("section has no nonzero coefficients")
    n_low, n_high = live[0], live[-1]
    if fam in ("kapteyn", "neumann"):
        if s == 0.0:
            raise ValueError("flank angle sits on a density corner")
        scale = float(n_high) if fam == "kapteyn" else 1.0
        return scale * c * math.copysign(1.0, s)
    if fam == "dirichlet":
        if c == 0.0:
            raise ValueError("flank angle sits on a density corner")
        lam = spec.exponent(n_low) if c > 0.0 else spec.exponent(n_high)
        return lam * s
    raise ValueError(f"no density prediction for family {fam!r}")


def sector_density_prediction(section: Section, theta: float,
                              delta: float) -> float | None:
    """Predicted linear density for the sector, None when unavailable.

    The prediction is the difference of the one-sided support slopes at
    the two flank angles over 2 pi.  Power sections concentrate their
    zero measure on isolated rays, so no linear-in-r density exists for
    them and the caller gets None.
    """
    if section.spec.family == "power":
        return None
    hi = _support_slope(section, theta + delta)
    lo = _support_slope(section, theta - delta)
    return (hi - lo) / _TWO_PI


# ---------------------------------------------------------------------------
# serialization

def serialize_zero_report(report: ZeroReport) -> str:
    """Versioned structured-text form of a zero report."""
    p = report.params
    lo, hi = p["window"]
    lines = [
        "sectionlab-zeros v1",
        f"label = {p['label']}",
        f"family = {p['family']}",
        f"n = {p['n']}",
        f"window = {lo.real:.17g},{lo.imag:.17g},{hi.real:.17g},{hi.imag:.17g}",
        f"total_winding = {report.total_winding}",
        f"boxes_resolved = {report.boxes_resolved}",
        f"count = {len(report.zeros)}",
        "# re im residual multiplicity status",
    ]
    for lz in report.zeros:
        status = "ok" if lz.resolved else "unresolved"
        lines.append(f"{lz.z.real:+.17e} {lz.z.imag:+.17e} "
                     f"{lz.residual:.6e} {lz.multiplicity} {status}")
    return "\n".join(lines) + "\n"
