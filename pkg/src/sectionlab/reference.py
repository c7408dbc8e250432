"""Slow extended-precision reference values.

Deliberately independent of the fast evaluators: plain ascending series
with exact integer factorial denominators under mpmath arithmetic, no
recurrences, no asymptotics.  Working precision is padded by the number
of digits the series loses to cancellation (roughly 0.45*(|z| - |Im z|)
digits for Bessel arguments near the real axis).
"""

from __future__ import annotations

import math

import mpmath
from mpmath import mp


def _bessel_dps(z: complex, extra: int = 0) -> int:
    cancel = max(0.0, abs(z) - abs(z.imag))
    return 50 + int(0.45 * cancel) + 15 + extra


def bessel_j_reference_log(n: int, z: complex, extra_dps: int = 0) -> tuple[float, float]:
    """(log magnitude, phase) of J_n(z); log magnitude is -inf at an exact zero."""
    if n < 0:
        raise ValueError("order must be >= 0")
    z = complex(z)
    if z == 0.0:
        return (0.0 if n == 0 else float("-inf")), 0.0
    with mp.workdps(_bessel_dps(z, extra_dps)):
        half = mpmath.mpc(z) / 2
        h2 = half * half
        num = half ** n
        den = math.factorial(n)          # exact integer, grows as k!*(n+k)!
        total = num / den
        k = 0
        kmin = int(abs(z) / 2) + 4
        while True:
            k += 1
            num = -num * h2
            den = den * k * (n + k)
            term = num / den
            total += term
            if k > kmin and abs(term) < abs(total) * mpmath.mpf(10) ** (-mp.dps + 5):
                break
            if k > 6000:
                raise RuntimeError("reference series failed to terminate")
        if total == 0:
            return float("-inf"), 0.0
        return float(mpmath.log(abs(total))), float(mpmath.arg(total))


def bessel_j_reference(n: int, z: complex, extra_dps: int = 0) -> complex:
    lm, ph = bessel_j_reference_log(n, z, extra_dps)
    if lm == float("-inf"):
        return 0.0 + 0.0j
    mag = math.exp(lm) if lm < 710.0 else math.inf
    return complex(mag * math.cos(ph), mag * math.sin(ph))


def omega_reference(z: complex, dps: int = 50) -> float:
    """High-precision scaled-argument height |z*exp(sqrt(1-z^2))/(1+sqrt(1-z^2))|.

    Pure formula on principal branches; no special-casing of the real
    rays, so keep z off them.
    """
    z = complex(z)
    if z == 0.0:
        return 0.0
    with mp.workdps(dps):
        zz = mpmath.mpc(z)
        s = mpmath.sqrt(1 - zz * zz)
        return float(abs(zz * mpmath.exp(s) / (1 + s)))
