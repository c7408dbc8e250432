"""Height functions for the four series families, sublevel-set boundaries,
and the Kepler/Lagrange convergence-radius solver.

The height of a family measures how fast section terms can grow at z:
exp(-Re z) for Dirichlet sums, |z| for power and Bessel-coefficient sums,
and the scaled-argument height Omega for Kapteyn sums.  Sublevel sets
{height < r} are where sections of convergence level r stay bounded.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import WindowBox

FAMILIES = ("power", "dirichlet", "neumann", "kapteyn")

# everything on the real rays |x| >= 1 maps to height exactly 1; both
# square-root branches agree there so the value is forced by continuity
_RAY_IMAG_TOL = 1e-12


def omega_kapteyn(z: complex) -> float:
    """Scaled-argument height |z * exp(sqrt(1-z^2)) / (1 + sqrt(1-z^2))|.

    Principal branch of the square root; points with |Im z| < 1e-12 and
    |Re z| >= 1 snap to exactly 1.0, the continuity value on the rays.
    """
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("argument must be finite")
    if abs(z.imag) < _RAY_IMAG_TOL and abs(z.real) >= 1.0:
        return 1.0
    if z == 0.0:
        return 0.0
    s = cmath.sqrt(1.0 - z * z)
    return abs(z * cmath.exp(s) / (1.0 + s))


def omega_kapteyn_many(zs: np.ndarray) -> np.ndarray:
    """Vectorized omega_kapteyn."""
    zs = np.asarray(zs, dtype=np.complex128)
    s = np.sqrt(1.0 - zs * zs)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(zs * np.exp(s) / (1.0 + s))
    out = np.where(zs == 0.0, 0.0, out)
    snap = (np.abs(zs.imag) < _RAY_IMAG_TOL) & (np.abs(zs.real) >= 1.0)
    return np.where(snap, 1.0, out)


def height(family: str, z: complex) -> float:
    """Family height at z: exp(-Re z), |z|, |z|, or omega_kapteyn(z)."""
    if family == "power" or family == "neumann":
        return abs(complex(z))
    if family == "dirichlet":
        return math.exp(-complex(z).real)
    if family == "kapteyn":
        return omega_kapteyn(z)
    raise ValueError(f"unknown series family: {family!r}")


def height_many(family: str, zs: np.ndarray) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.complex128)
    if family == "power" or family == "neumann":
        return np.abs(zs)
    if family == "dirichlet":
        return np.exp(-zs.real)
    if family == "kapteyn":
        return omega_kapteyn_many(zs)
    raise ValueError(f"unknown series family: {family!r}")


@dataclass(frozen=True)
class HeightField:
    """The height function of one series family, as a callable field."""

    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown series family: {self.family!r}")

    def __call__(self, z: complex) -> float:
        return height(self.family, z)

    def sample(self, zs: np.ndarray) -> np.ndarray:
        return height_many(self.family, zs)


@dataclass(frozen=True)
class BoundaryPolyline:
    """One connected component of a traced level curve {height = level}."""

    level: float
    points: tuple
    closed: bool = False

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# marching squares

# segment endpoints per corner-sign case, as pairs of cell-edge names;
# cases 5 and 10 are saddles resolved by the sign at the cell center
_CASE_SEGMENTS = {
    0: (),
    1: (("left", "bottom"),),
    2: (("bottom", "right"),),
    3: (("left", "right"),),
    4: (("right", "top"),),
    6: (("bottom", "top"),),
    7: (("left", "top"),),
    8: (("left", "top"),),
    9: (("bottom", "top"),),
    11: (("right", "top"),),
    12: (("left", "right"),),
    13: (("bottom", "right"),),
    14: (("left", "bottom"),),
    15: (),
}


def trace_boundary(family: str, level: float, window: WindowBox,
                   resolution: int) -> list[BoundaryPolyline]:
    """Marching-squares trace of {height = level} over the window.

    Inside means height < level, sampled on a resolution-by-resolution
    vertex grid; crossing positions are linearly interpolated.  Returns
    one polyline per connected component, sorted by first vertex; an
    empty list when the level set misses the window.
    """
    if level <= 0:
        raise ValueError("level must be positive")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    xs = np.linspace(window.lo.real, window.hi.real, resolution)
    ys = np.linspace(window.lo.imag, window.hi.imag, resolution)
    zgrid = xs[None, :] + 1j * ys[:, None]
    v = height_many(family, zgrid.ravel()).reshape(resolution, resolution) - level
    inside = v < 0.0

    # interpolated crossing points, keyed by grid edge
    pts: dict[tuple, complex] = {}

    def edge_point(kind, j, i):
        key = (kind, j, i)
        p = pts.get(key)
        if p is None:
            if kind == "h":
                v0, v1 = v[j, i], v[j, i + 1]
                t = v0 / (v0 - v1)
                p = complex(xs[i] + t * (xs[i + 1] - xs[i]), ys[j])
            else:
                v0, v1 = v[j, i], v[j + 1, i]
                t = v0 / (v0 - v1)
                p = complex(xs[i], ys[j] + t * (ys[j + 1] - ys[j]))
            pts[key] = p
        return key

    cell_has = inside[:-1, :-1] | inside[:-1, 1:] | inside[1:, :-1] | inside[1:, 1:]
    cell_all = inside[:-1, :-1] & inside[:-1, 1:] & inside[1:, :-1] & inside[1:, 1:]
    active = np.argwhere(cell_has & ~cell_all)

    adjacency: dict[tuple, list] = {}

    def add_segment(k1, k2):
        adjacency.setdefault(k1, []).append(k2)
        adjacency.setdefault(k2, []).append(k1)

    for j, i in active:
        j = int(j)
        i = int(i)
        case = (int(inside[j, i]) + 2 * int(inside[j, i + 1])
                + 4 * int(inside[j + 1, i + 1]) + 8 * int(inside[j + 1, i]))
        if case == 5 or case == 10:
            center = height(family, complex((xs[i] + xs[i + 1]) / 2,
                                            (ys[j] + ys[j + 1]) / 2)) - level
            center_in = center < 0.0
            if case == 5:
                segs = ((("bottom", "right"), ("left", "top")) if center_in
                        else (("left", "bottom"), ("right", "top")))
            else:
                segs = ((("left", "bottom"), ("right", "top")) if center_in
                        else (("bottom", "right"), ("left", "top")))
        else:
            segs = _CASE_SEGMENTS[case]
        names = {
            "bottom": ("h", j, i),
            "top": ("h", j + 1, i),
            "left": ("v", j, i),
            "right": ("v", j, i + 1),
        }
        for a, b in segs:
            ka = edge_point(*names[a])
            kb = edge_point(*names[b])
            add_segment(ka, kb)

    # walk components: open paths from their endpoints first, then loops;
    # all choices keyed on sorted edge ids so the output is deterministic
    visited = set()
    components = []

    def walk(start):
        path = [start]
        visited.add(start)
        prev = None
        cur = start
        while True:
            nxt = None
            for cand in sorted(adjacency[cur]):
                if cand != prev and cand not in visited:
                    nxt = cand
                    break
            if nxt is None:
                closed = start in adjacency[cur] and len(path) > 2
                return path, closed
            path.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt

    endpoints = sorted(k for k, nb in adjacency.items() if len(set(nb)) == 1)
    for k in endpoints:
        if k not in visited:
            path, closed = walk(k)
            components.append((path, closed))
    for k in sorted(adjacency):
        if k not in visited:
            path, closed = walk(k)
            components.append((path, closed))

    out = []
    for path, closed in components:
        vertices = tuple(pts[k] for k in path)
        out.append(BoundaryPolyline(level=float(level), points=vertices, closed=closed))
    out.sort(key=lambda p: (p.points[0].real, p.points[0].imag))
    return out


# ---------------------------------------------------------------------------
# Kepler/Lagrange convergence radius

def _radius_objective(w: complex, m: float) -> complex:
    # eliminating z = 1/cos(w) from {z cos w = 1, w = M + z sin w}
    # leaves F(w) = w - M - tan(w)
    return w - m - cmath.tan(w)


def lagrange_radius(mean_anomaly: float) -> float:
    """Smallest |z| solving z*cos(w) = 1, w = M + z*sin(w).

    This is the convergence radius of the Lagrange expansion of the
    eccentric anomaly in powers of the eccentricity.  Damped Newton on
    the eliminated one-variable system from a grid of starting points;
    smallest modulus among converged roots wins.
    """
    m = float(mean_anomaly)
    if not math.isfinite(m):
        raise ValueError("mean anomaly must be finite")
    best = math.inf
    for k in range(-8, 9):
        for j in range(-8, 9):
            w = complex(m + k * math.pi / 8, j * 0.25)
            root = _newton_root(w, m)
            if root is None:
                continue
            c = cmath.cos(root)
            if abs(c) <= 1e-9:
                continue
            best = min(best, abs(1.0 / c))
    if not math.isfinite(best):
        raise RuntimeError(f"radius solve found no root for mean anomaly {m}")
    return best


def _newton_root(w: complex, m: float):
    f = _radius_objective(w, m)
    for _ in range(200):
        t = cmath.tan(w)
        fp = -t * t
        if fp == 0.0 or not (math.isfinite(fp.real) and math.isfinite(fp.imag)):
            return None
        step = f / fp
        # backtracking: halve until the residual actually drops
        lam = 1.0
        wn = w - step
        fn = _radius_objective(wn, m)
        halvings = 0
        while abs(fn) >= (1.0 - 0.25 * lam) * abs(f) and halvings < 50:
            lam *= 0.5
            wn = w - lam * step
            fn = _radius_objective(wn, m)
            halvings += 1
        if halvings >= 50:
            return None
        moved = abs(wn - w)
        w, f = wn, fn
        if moved < 1e-14 * (1.0 + abs(w)):
            if abs(f) <= 1e-10 * (1.0 + abs(w)):
                return w
            return None
    return None
