"""Integer-order Bessel functions J_n of a complex argument, plain and log form.

Two regimes: the ascending power series where it converges without
cancellation trouble (|z| small relative to the order), and Miller's
backward recurrence with the even-order normalization identity

    J_0(z) + 2*J_2(z) + 2*J_4(z) + ... = 1

everywhere else.  The identity holds for every complex z, so one code path
covers the plane.  Every (order, argument) lane is evaluated independently
by a compiled scalar loop; results never depend on how lanes are batched,
which keeps multi-threaded callers bit-reproducible.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

_PI = math.pi
_TWO_PI = 2.0 * math.pi
_LN2 = math.log(2.0)
_NEG_INF = float("-inf")


def wrap_phase(x: float) -> float:
    """Reduce an angle to the half-open interval (-pi, pi]."""
    y = math.remainder(x, _TWO_PI)
    if y <= -_PI:
        y += _TWO_PI
    return y


def wrap_phase_many(x: np.ndarray) -> np.ndarray:
    """Vectorized wrap_phase."""
    y = np.remainder(np.asarray(x, dtype=np.float64) + _PI, _TWO_PI) - _PI
    return np.where(y == -_PI, _PI, y)


@dataclass(frozen=True)
class LogComplex:
    """A complex number stored as (log magnitude, phase).

    log_mag is the natural log of the magnitude, with -inf encoding an
    exact zero (phase fixed at 0.0 there).  phase lies in (-pi, pi].
    The representation survives magnitudes far outside double range.
    """

    log_mag: float
    phase: float

    @staticmethod
    def from_complex(v: complex) -> "LogComplex":
        v = complex(v)
        if v == 0.0:
            return LogComplex(_NEG_INF, 0.0)
        # math.atan2 rather than cmath.phase: the latter can raise on
        # mixed huge/subnormal components
        return LogComplex(math.log(abs(v)), wrap_phase(math.atan2(v.imag, v.real)))

    @property
    def is_zero(self) -> bool:
        return self.log_mag == _NEG_INF

    def to_complex(self) -> complex:
        """Collapse to a double complex.

        Magnitudes beyond double range come back as a signed infinite
        complex (never NaN); magnitudes below range underflow to 0.
        """
        if self.is_zero:
            return 0.0 + 0.0j
        mag = math.exp(self.log_mag) if self.log_mag < 710.0 else math.inf
        c, s = math.cos(self.phase), math.sin(self.phase)
        if math.isinf(mag):
            re = math.copysign(math.inf, c) if c != 0.0 else 0.0
            im = math.copysign(math.inf, s) if s != 0.0 else 0.0
            return complex(re, im)
        return complex(mag * c, mag * s)

    def __complex__(self) -> complex:
        return self.to_complex()

    def times(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero or other.is_zero:
            return LogComplex(_NEG_INF, 0.0)
        return LogComplex(self.log_mag + other.log_mag,
                          wrap_phase(self.phase + other.phase))

    def root_magnitude(self, k: float) -> float:
        """|value|^(1/k) as a float; 0.0 for an exact zero."""
        if self.is_zero:
            return 0.0
        return math.exp(self.log_mag / k)


@dataclass(frozen=True)
class AsymptoticParams:
    """Principal-branch quantities behind the large-order approximation.

    sqrt_term = sqrt(1 - z^2), w = log((1 + sqrt_term)/z) - sqrt_term,
    both on principal branches.  Undefined on the real rays |x| >= 1
    (branch cuts collide) and at z = 0; construction rejects those.
    """

    w: complex
    sqrt_term: complex

    @staticmethod
    def for_argument(z: complex) -> "AsymptoticParams":
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValueError("argument must be finite")
        if z == 0.0:
            raise ValueError("argument must be nonzero")
        if z.imag == 0.0 and abs(z.real) >= 1.0:
            raise ValueError("asymptotic parameters are undefined on the real rays |x| >= 1")
        s = cmath.sqrt(1.0 - z * z)
        w = cmath.log((1.0 + s) / z) - s
        return AsymptoticParams(w=w, sqrt_term=s)


# ---------------------------------------------------------------------------
# compiled per-lane kernels


@njit(cache=True, nogil=True)
def _wrap_nb(x):
    y = x % _TWO_PI
    if y > _PI:
        y -= _TWO_PI
    return y


@njit(cache=True, nogil=True)
def _series_lane(n, w):
    # ascending series; caller guarantees w != 0 and |w| small enough
    # that the term peak stays within double range
    aw = abs(w)
    kmax = 60 + int(aw) + int(aw * aw / (2.0 * (n + 1.0)))
    m = -0.25 * (w * w)
    c = 1.0 + 0.0j
    s = 1.0 + 0.0j
    for j in range(1, kmax + 1):
        c = c * m / (j * (n + j))
        s = s + c
    if s == 0.0:
        return _NEG_INF, 0.0
    lead = n * cmath.log(0.5 * w)
    lm = lead.real - math.lgamma(n + 1.0) + math.log(abs(s))
    ph = _wrap_nb(lead.imag + cmath.phase(s))
    return lm, ph


@njit(cache=True, nogil=True)
def _sum_weight(m, mode):
    # normalization weight for order m: the even-order identity sums to 1,
    # the two exponential identities sum to exp(-iz) resp. exp(+iz); the
    # latter have no cancellation when |Im z| is large
    if mode == 0:
        if m == 0:
            return 1.0 + 0.0j
        if m % 2 == 0:
            return 2.0 + 0.0j
        return 0.0 + 0.0j
    r = m % 4
    if mode == 1:   # weights (-i)^m
        if r == 0:
            wt = 1.0 + 0.0j
        elif r == 1:
            wt = -1.0j
        elif r == 2:
            wt = -1.0 + 0.0j
        else:
            wt = 1.0j
    else:           # weights (+i)^m
        if r == 0:
            wt = 1.0 + 0.0j
        elif r == 1:
            wt = 1.0j
        elif r == 2:
            wt = -1.0 + 0.0j
        else:
            wt = -1.0j
    if m > 0:
        wt *= 2.0
    return wt


@njit(cache=True, nogil=True)
def _miller_lane(n, w, nstart, mode):
    # one backward-recurrence pass; returns the normalized target in log
    # form plus the normalized magnitude of the order-(n+1) neighbor,
    # which sets the local scale when the target sits near a zero
    inv = 1.0 / w
    jp = 0.0 + 0.0j           # trial J at order m+1
    jc = 1.0 + 0.0j           # trial J at order m
    scale = 0.0               # log of the exact power-of-two rescales so far
    ssum = 0.0 + 0.0j
    tgt = 0.0 + 0.0j
    tgt_scale = 0.0
    nb = 0.0 + 0.0j
    nb_scale = 0.0
    m = nstart
    ssum += _sum_weight(m, mode) * jc
    while m > 0:
        jn = (2.0 * m) * inv * jc - jp
        jp = jc
        jc = jn
        m -= 1
        if abs(jc.real) + abs(jc.imag) > 7e249:
            f = 2.0 ** -512
            jc *= f
            jp *= f
            ssum *= f
            scale += 512.0 * _LN2
        if m == n:
            tgt = jc
            tgt_scale = scale
        elif m == n + 1:
            nb = jc
            nb_scale = scale
        ssum += _sum_weight(m, mode) * jc
    if ssum == 0.0:
        return 0.0, 0.0, 0.0, False
    # identity value the sum is normalized against
    if mode == 0:
        corr_lm = 0.0
        corr_ph = 0.0
    elif mode == 1:   # exp(-iz)
        corr_lm = w.imag
        corr_ph = -w.real
    else:             # exp(+iz)
        corr_lm = -w.imag
        corr_ph = w.real
    ls = math.log(abs(ssum)) + scale
    ps = cmath.phase(ssum)
    if tgt == 0.0:
        lm = _NEG_INF
        ph = 0.0
    else:
        lm = math.log(abs(tgt)) + tgt_scale - ls + corr_lm
        ph = _wrap_nb(cmath.phase(tgt) - ps + corr_ph)
    if nb == 0.0:
        nb_lm = _NEG_INF
    else:
        nb_lm = math.log(abs(nb)) + nb_scale - ls + corr_lm
    return lm, ph, nb_lm, True


@njit(cache=True, nogil=True)
def _bessel_lane(n, w):
    if w == 0.0:
        if n == 0:
            return 0.0, 0.0, True
        return _NEG_INF, 0.0, True
    aw = abs(w)
    # the 600 cap keeps the series' peak term inside double range
    if aw <= 2.0 or (4.0 * aw <= n and aw <= 600.0):
        lm, ph = _series_lane(n, w)
        return lm, ph, True
    # the even-order normalization cancels catastrophically once terms
    # reach e^{|Im w|}; past that, normalize against exp(-+iw) instead
    if abs(w.imag) <= 8.0:
        mode = 0
    elif w.imag > 0.0:
        mode = 1
    else:
        mode = 2
    nstart = n + int(math.ceil(10.0 + 1.5 * aw))
    lm0, ph0, nb0, ok0 = _miller_lane(n, w, nstart, mode)
    lm1, ph1, nb1 = lm0, ph0, nb0
    for _ in range(4):
        nstart *= 2
        lm1, ph1, nb1, ok1 = _miller_lane(n, w, nstart, mode)
        if ok0 and ok1:
            if lm0 == _NEG_INF and lm1 == _NEG_INF:
                return lm1, ph1, True
            # compare at the scale of max(target runs, neighbor): a target
            # sitting on a zero of J_n still converges relative to J_{n+1}
            ref = lm1
            if lm0 > ref:
                ref = lm0
            if nb1 > ref:
                ref = nb1
            v0 = cmath.exp(complex(lm0 - ref, ph0)) if lm0 > _NEG_INF else 0.0 + 0.0j
            v1 = cmath.exp(complex(lm1 - ref, ph1)) if lm1 > _NEG_INF else 0.0 + 0.0j
            if abs(v0 - v1) <= 1e-12:
                return lm1, ph1, True
        lm0, ph0, nb0, ok0 = lm1, ph1, nb1, ok1
    return lm1, ph1, False


@njit(cache=True, nogil=True)
def _bessel_lanes(orders, ws, out_lm, out_ph, out_ok):
    for i in range(orders.shape[0]):
        lm, ph, ok = _bessel_lane(orders[i], ws[i])
        out_lm[i] = lm
        out_ph[i] = ph
        out_ok[i] = ok


# ---------------------------------------------------------------------------
# python-level API


def _check_order(n, minimum: int = 0) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ValueError("order must be an integer")
    n = int(n)
    if n < minimum:
        raise ValueError(f"order must be >= {minimum}")
    return n


def _check_argument(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("argument must be finite")
    return z


def bessel_lanes_log(orders: np.ndarray, ws: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate J_{orders[i]}(ws[i]) lane by lane in log form.

    Returns (log magnitudes, phases).  Raises if any lane fails to
    converge after the recurrence-start doublings.
    """
    orders = np.ascontiguousarray(orders, dtype=np.int64)
    ws = np.ascontiguousarray(ws, dtype=np.complex128)
    if orders.shape != ws.shape or orders.ndim != 1:
        raise ValueError("orders and arguments must be equal-length 1-d arrays")
    lm = np.empty(orders.shape[0], dtype=np.float64)
    ph = np.empty(orders.shape[0], dtype=np.float64)
    ok = np.empty(orders.shape[0], dtype=np.bool_)
    _bessel_lanes(orders, ws, lm, ph, ok)
    if not ok.all():
        bad = int(np.argmin(ok))
        raise RuntimeError(
            f"Bessel recurrence failed to stabilize for order {orders[bad]} "
            f"at argument {ws[bad]}")
    return lm, ph


def bessel_j_log(n: int, z: complex) -> LogComplex:
    """J_n(z) in log form."""
    n = _check_order(n)
    z = _check_argument(z)
    lm, ph = bessel_lanes_log(np.array([n]), np.array([z]))
    return LogComplex(float(lm[0]), float(ph[0]))


def bessel_j(n: int, z: complex) -> complex:
    """J_n(z) for integer n >= 0 and finite complex z."""
    return bessel_j_log(n, z).to_complex()


def _distance_to_real_rays(z: complex) -> float:
    # distance to {x real : |x| >= 1}
    if abs(z.real) >= 1.0:
        return abs(z.imag)
    return min(math.hypot(z.real - 1.0, z.imag), math.hypot(z.real + 1.0, z.imag))


def bessel_j_scaled(n: int, z: complex) -> LogComplex:
    """J_n(n*z) in log form: the scaled-argument lane used by Kapteyn sums.

    For large orders away from the real rays |x| >= 1 the result is
    cross-checked against the closed-form asymptotic (J_n(n z) has no
    zeros off the real axis, so a wild disagreement means a broken
    evaluation, not a near-zero dip).
    """
    n = _check_order(n, minimum=1)
    z = _check_argument(z)
    out = bessel_j_log(n, n * z)
    if n >= 64 and z != 0.0 and _distance_to_real_rays(z) > 0.05:
        approx = carlini_meissel(n, z)
        if not out.is_zero and abs(out.log_mag - approx.log_mag) > max(0.5, 64.0 / n):
            raise RuntimeError(
                f"scaled Bessel value at order {n}, argument {z} disagrees with "
                "its asymptotic approximation beyond plausibility")
    return out


def carlini_meissel(n: int, z: complex) -> LogComplex:
    """Closed-form large-order approximation to J_n(n*z), in log form.

    Value: exp(-n*w) / (sqrt(2*pi*n) * (1 - z^2)^(1/4)) with principal
    branches throughout.  Rejects z on the real rays |x| >= 1 and z = 0.
    """
    n = _check_order(n, minimum=1)
    p = AsymptoticParams.for_argument(z)
    q = cmath.log(1.0 - complex(z) * complex(z))
    lm = -n * p.w.real - 0.5 * math.log(_TWO_PI * n) - 0.25 * q.real
    ph = wrap_phase(-n * p.w.imag - 0.25 * q.imag)
    return LogComplex(lm, ph)


def bessel_j_derivative(n: int, z: complex) -> complex:
    """d/dz J_n(z) via J_n' = (J_{n-1} - J_{n+1})/2, with J_{-1} = -J_1."""
    n = _check_order(n)
    z = _check_argument(z)
    if n == 0:
        return -bessel_j(1, z)
    lm, ph = bessel_lanes_log(np.array([n - 1, n + 1]), np.array([z, z]))
    a = LogComplex(float(lm[0]), float(ph[0])).to_complex()
    b = LogComplex(float(lm[1]), float(ph[1])).to_complex()
    return 0.5 * (a - b)


def warmup() -> None:
    """Force kernel compilation so timed callers do not pay for it."""
    bessel_lanes_log(np.array([0, 1, 12]), np.array([0.5j, 1.0 + 0.0j, 30.0 + 4.0j]))
