"""Series families, their sections, and convergence-level estimation.

A SeriesSpec bundles a family tag with a coefficient stream (and, for
generalized Dirichlet sums, an exponent stream); a Section is the finite
sum of its first n+1 terms.  Term shapes per family:

    power      a_k * z^k
    dirichlet  a_k * exp(-lambda_k * z)
    neumann    a_k * J_k(z)
    kapteyn    a_k * J_k(k*z)

Sections are accumulated in compensated form; Bessel-based families run
entirely in log representation so coefficients and values far outside
double range still combine correctly.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bessel import LogComplex, bessel_lanes_log, wrap_phase, wrap_phase_many
from .height import FAMILIES

_NEG_INF = float("-inf")
_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# coefficient streams

class CoefficientStream:
    """Pure index -> complex coefficient map."""

    formula = "custom"

    def coefficient(self, n: int) -> complex:
        raise NotImplementedError

    def coefficient_log(self, n: int) -> LogComplex:
        return LogComplex.from_complex(self.coefficient(n))

    def config_items(self) -> list:
        return []

    def describe(self) -> str:
        items = ", ".join(f"{k}={v}" for k, v in self.config_items())
        return f"{self.formula}({items})" if items else self.formula


class GeometricCoefficients(CoefficientStream):
    """a_n = scale * ratio^n."""

    formula = "geometric"

    def __init__(self, ratio, scale=1.0):
        self.ratio = complex(ratio)
        self.scale = complex(scale)
        if self.ratio == 0:
            raise ValueError("geometric ratio must be nonzero")

    def coefficient(self, n: int) -> complex:
        v = self.coefficient_log(n).to_complex()
        return v

    def coefficient_log(self, n: int) -> LogComplex:
        if self.scale == 0:
            return LogComplex(_NEG_INF, 0.0)
        base = LogComplex.from_complex(self.ratio)
        lead = LogComplex.from_complex(self.scale)
        return LogComplex(lead.log_mag + n * base.log_mag,
                          wrap_phase(lead.phase + n * base.phase))

    def config_items(self):
        items = [("ratio", _format_complex(self.ratio))]
        if self.scale != 1.0:
            items.append(("scale", _format_complex(self.scale)))
        return items


class KeplerLagrangeCoefficients(CoefficientStream):
    """Coefficients of the eccentricity power series for E - M."""

    formula = "kepler-lagrange"

    def __init__(self, mean_anomaly: float):
        self.mean_anomaly = float(mean_anomaly)
        self._cache = [0.0]

    def coefficient(self, n: int) -> complex:
        while len(self._cache) <= n:
            self._cache.append(
                kepler_lagrange_coefficient(self.mean_anomaly, len(self._cache)))
        return complex(self._cache[n])

    def config_items(self):
        return [("mean_anomaly", repr(self.mean_anomaly))]


class KeplerKapteynCoefficients(CoefficientStream):
    """a_n = 2*sin(n*M)/n, the Bessel expansion weights for E - M."""

    formula = "kepler-kapteyn"

    def __init__(self, mean_anomaly: float):
        self.mean_anomaly = float(mean_anomaly)

    def coefficient(self, n: int) -> complex:
        if n == 0:
            return 0.0 + 0.0j
        return complex(kepler_kapteyn_coefficient(self.mean_anomaly, n))

    def config_items(self):
        return [("mean_anomaly", repr(self.mean_anomaly))]


class ZetaCoefficients(CoefficientStream):
    """a_0 = 0, a_n = 1: zeta partial sums once paired with log exponents."""

    formula = "zeta"

    def coefficient(self, n: int) -> complex:
        return 0.0 + 0.0j if n == 0 else 1.0 + 0.0j


class SeededUniformCoefficients(CoefficientStream):
    """a_n = u_n * ratio^n with u_n uniform draws from a seeded generator.

    Draws are materialized lazily but strictly in index order, so a_n is
    a pure function of (seed, low, high, n).
    """

    formula = "seeded-random-uniform"

    def __init__(self, seed: int, low=-1.0, high=1.0, ratio=1.0):
        self.seed = int(seed)
        self.low = float(low)
        self.high = float(high)
        self.ratio = float(ratio)
        if not self.low < self.high:
            raise ValueError("need low < high")
        if self.ratio <= 0:
            raise ValueError("envelope ratio must be positive")
        self._rng = random.Random(self.seed)
        self._draws: list = []

    def _draw(self, n: int) -> float:
        while len(self._draws) <= n:
            self._draws.append(self._rng.uniform(self.low, self.high))
        return self._draws[n]

    def coefficient(self, n: int) -> complex:
        return complex(self._draw(n) * self.ratio ** n)

    def coefficient_log(self, n: int) -> LogComplex:
        u = self._draw(n)
        if u == 0.0:
            return LogComplex(_NEG_INF, 0.0)
        return LogComplex(math.log(abs(u)) + n * math.log(self.ratio),
                          0.0 if u > 0 else math.pi)

    def config_items(self):
        items = [("seed", str(self.seed)), ("low", repr(self.low)),
                 ("high", repr(self.high))]
        if self.ratio != 1.0:
            items.append(("ratio", repr(self.ratio)))
        return items


class ExplicitCoefficients(CoefficientStream):
    """A finite list; indices past the end are zero."""

    formula = "explicit"

    def __init__(self, values):
        self.values = tuple(complex(v) for v in values)
        if not self.values:
            raise ValueError("need at least one coefficient")

    def coefficient(self, n: int) -> complex:
        return self.values[n] if n < len(self.values) else 0.0 + 0.0j

    def config_items(self):
        return [("coefficients", ", ".join(_format_complex(v) for v in self.values))]


class CallableCoefficients(CoefficientStream):
    """Wrap an arbitrary index->complex function (experiments, tests).

    An optional log-form companion lets streams exceed double range.
    Not part of the config catalog.
    """

    def __init__(self, fn, log_fn=None, label="custom"):
        self._fn = fn
        self._log_fn = log_fn
        self.formula = label

    def coefficient(self, n: int) -> complex:
        if self._fn is not None:
            return complex(self._fn(n))
        return self.coefficient_log(n).to_complex()

    def coefficient_log(self, n: int) -> LogComplex:
        if self._log_fn is not None:
            return self._log_fn(n)
        return LogComplex.from_complex(self.coefficient(n))


# ---------------------------------------------------------------------------
# exponent streams (generalized Dirichlet only)

class ExponentStream:
    def exponent(self, n: int) -> float:
        raise NotImplementedError

    def config_items(self) -> list:
        return []


class LogExponents(ExponentStream):
    """lambda_0 = -1, lambda_n = log n: the zeta-section exponents.

    The index-0 slot needs a value strictly below log 1 = 0; any
    negative constant works since its coefficient is zero in the zeta
    stream.  -1 keeps eta = 1 in admissibility bounds honest.
    """

    def exponent(self, n: int) -> float:
        return -1.0 if n == 0 else math.log(n)


class LinearExponents(ExponentStream):
    def exponent(self, n: int) -> float:
        return float(n)


class ExplicitExponents(ExponentStream):
    def __init__(self, values):
        self.values = tuple(float(v) for v in values)
        if len(self.values) < 1:
            raise ValueError("need at least one exponent")
        for a, b in zip(self.values, self.values[1:]):
            if not a < b:
                raise ValueError("exponents must be strictly increasing")

    def exponent(self, n: int) -> float:
        if n >= len(self.values):
            raise ValueError(f"exponent stream has only {len(self.values)} entries")
        return self.values[n]

    def config_items(self):
        return [("exponents", ", ".join(repr(v) for v in self.values))]


# ---------------------------------------------------------------------------
# spec and section

@dataclass(frozen=True)
class SeriesSpec:
    """One series: family tag, coefficient stream, optional exponents."""

    family: str
    coefficients: CoefficientStream
    exponents: ExponentStream | None = None
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown series family: {self.family!r}")
        if self.family == "dirichlet":
            if self.exponents is None:
                raise ValueError("dirichlet specs need an exponent stream")
            # strictly-increasing check on a materialized prefix
            probe = 40
            if isinstance(self.exponents, ExplicitExponents):
                probe = len(self.exponents.values)
            prev = None
            for k in range(probe):
                lam = self.exponents.exponent(k)
                if prev is not None and not lam > prev:
                    raise ValueError("dirichlet exponents must strictly increase")
                prev = lam
        elif self.exponents is not None:
            raise ValueError("only dirichlet specs carry exponents")
        if not self.label:
            object.__setattr__(self, "label", self.coefficients.formula)

    def coefficient(self, n: int) -> complex:
        return self.coefficients.coefficient(n)

    def coefficient_log(self, n: int) -> LogComplex:
        return self.coefficients.coefficient_log(n)

    def exponent(self, n: int) -> float:
        if self.family == "dirichlet":
            return self.exponents.exponent(n)
        return float(n)

    def section(self, n: int) -> "Section":
        return Section(self, n)

    def describe(self) -> str:
        return f"{self.family}/{self.coefficients.describe()}"


@dataclass(frozen=True)
class Section:
    """The truncated sum f_n = sum_{k<=n} a_k phi_k."""

    spec: SeriesSpec
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise ValueError("truncation index must be a non-negative integer")

    def __call__(self, z: complex) -> complex:
        return section_eval(self, z)


@dataclass(frozen=True)
class KeplerParams:
    """Mean anomaly plus the eccentricity argument of the Kepler series."""

    mean_anomaly: float
    epsilon: complex

    def __post_init__(self):
        if not math.isfinite(self.mean_anomaly):
            raise ValueError("mean anomaly must be finite real")


# ---------------------------------------------------------------------------
# Kepler coefficients

def kepler_lagrange_coefficient(mean_anomaly: float, n: int) -> float:
    """Coefficient of epsilon^n in the Lagrange expansion of E - M.

    (1/(2^(n-1) n!)) * sum_{0<=k<=n/2} (-1)^k C(n,k) (n-2k)^(n-1) sin((n-2k)M).
    Binomial weights stay in exact integer arithmetic; each term does a
    single conversion to float.
    """
    if n < 1:
        raise ValueError("coefficient index must be >= 1")
    m0 = float(mean_anomaly)
    denom = (1 << (n - 1)) * math.factorial(n)
    total = 0.0
    comp = 0.0
    for k in range(0, n // 2 + 1):
        m = n - 2 * k
        if m == 0:
            continue
        weight = math.comb(n, k) * m ** (n - 1)
        term = float(Fraction(weight, denom)) * math.sin(m * m0)
        if k % 2 == 1:
            term = -term
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
    return total + comp


def kepler_kapteyn_coefficient(mean_anomaly: float, n: int) -> float:
    """Coefficient of J_n(n*epsilon) in the Bessel expansion: 2 sin(n M)/n."""
    if n < 1:
        raise ValueError("coefficient index must be >= 1")
    return 2.0 * math.sin(n * float(mean_anomaly)) / n


# ---------------------------------------------------------------------------
# spec builders

def geometric_spec(ratio, scale=1.0, family: str = "power", label: str = "") -> SeriesSpec:
    return SeriesSpec(family=family, coefficients=GeometricCoefficients(ratio, scale),
                      label=label or "geometric")


def kepler_lagrange_spec(mean_anomaly: float, label: str = "") -> SeriesSpec:
    return SeriesSpec(family="power",
                      coefficients=KeplerLagrangeCoefficients(mean_anomaly),
                      label=label or "kepler-lagrange")


def kepler_kapteyn_spec(mean_anomaly: float, label: str = "") -> SeriesSpec:
    return SeriesSpec(family="kapteyn",
                      coefficients=KeplerKapteynCoefficients(mean_anomaly),
                      label=label or "kepler-kapteyn")


def zeta_spec(label: str = "") -> SeriesSpec:
    return SeriesSpec(family="dirichlet", coefficients=ZetaCoefficients(),
                      exponents=LogExponents(), label=label or "zeta")


def seeded_uniform_spec(seed: int, family: str = "power", low=-1.0, high=1.0,
                        ratio=1.0, label: str = "") -> SeriesSpec:
    return SeriesSpec(family=family,
                      coefficients=SeededUniformCoefficients(seed, low, high, ratio),
                      label=label or f"seeded-uniform-{seed}")


def explicit_spec(family: str, coefficients, exponents=None, label: str = "") -> SeriesSpec:
    exp_stream = ExplicitExponents(exponents) if exponents is not None else None
    return SeriesSpec(family=family, coefficients=ExplicitCoefficients(coefficients),
                      exponents=exp_stream, label=label or "explicit")


# ---------------------------------------------------------------------------
# compensated scaled accumulation

class ScaledSumBatch:
    """Per-lane compensated sums of terms given in log form.

    Each lane keeps mantissa sums (Neumaier-compensated, split into real
    and imaginary parts) next to an integer power-of-two exponent, so the
    running value is (re + i*im) * 2^exp2.  Rescales multiply by exact
    powers of two; the exponent trajectory of a lane depends only on that
    lane's own terms, never on batch composition.
    """

    _RESCALE_BITS = 400

    def __init__(self, size: int):
        self.exp2 = np.zeros(size, dtype=np.int64)
        self.re = np.zeros(size)
        self.im = np.zeros(size)
        self.cre = np.zeros(size)
        self.cim = np.zeros(size)
        self.empty = np.ones(size, dtype=bool)

    def add(self, log_mag: np.ndarray, phase: np.ndarray) -> None:
        live = log_mag > _NEG_INF
        if not live.any():
            return
        texp = np.zeros_like(self.exp2)
        texp[live] = np.floor(log_mag[live] / _LN2).astype(np.int64)

        adopt = self.empty & live
        if adopt.any():
            self.exp2[adopt] = texp[adopt]
            self.empty[adopt] = False

        need = live & ~adopt & (texp - self.exp2 > self._RESCALE_BITS)
        if need.any():
            shift = (self.exp2[need] - texp[need]).astype(np.int64)
            for arr in (self.re, self.im, self.cre, self.cim):
                arr[need] = np.ldexp(arr[need], shift)
            self.exp2[need] = texp[need]

        mant = np.exp(log_mag[live] - self.exp2[live] * _LN2)
        tre = mant * np.cos(phase[live])
        tim = mant * np.sin(phase[live])
        self._neumaier(live, tre, tim)

    def _neumaier(self, mask, tre, tim):
        s = self.re[mask]
        t = s + tre
        self.cre[mask] += np.where(np.abs(s) >= np.abs(tre), (s - t) + tre, (tre - t) + s)
        self.re[mask] = t
        s = self.im[mask]
        t = s + tim
        self.cim[mask] += np.where(np.abs(s) >= np.abs(tim), (s - t) + tim, (tim - t) + s)
        self.im[mask] = t

    def _totals(self):
        return self.re + self.cre, self.im + self.cim

    def log_magnitude(self) -> np.ndarray:
        re, im = self._totals()
        mag = np.hypot(re, im)
        with np.errstate(divide="ignore"):
            out = np.log(mag) + self.exp2 * _LN2
        return np.where(self.empty | (mag == 0.0), _NEG_INF, out)

    def phase(self) -> np.ndarray:
        re, im = self._totals()
        out = wrap_phase_many(np.arctan2(im, re))
        return np.where(self.empty | ((re == 0.0) & (im == 0.0)), 0.0, out)

    def complex_value(self) -> np.ndarray:
        """Collapse to double complex; overflow becomes signed infinity."""
        re, im = self._totals()
        lm = self.log_magnitude()
        ph = self.phase()
        out = np.empty(re.shape, dtype=np.complex128)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            shift = np.clip(self.exp2, -2098, 2098).astype(np.int32)
            out.real = np.ldexp(re, shift)
            out.imag = np.ldexp(im, shift)
        big = lm > 709.0
        if big.any():
            c = np.cos(ph[big])
            s = np.sin(ph[big])
            out.real[big] = np.where(c != 0.0, np.copysign(np.inf, c), 0.0)
            out.imag[big] = np.where(s != 0.0, np.copysign(np.inf, s), 0.0)
        tiny = lm < -745.0
        if tiny.any():
            out[tiny] = 0.0
        return out


# ---------------------------------------------------------------------------
# term logs per family

def _coefficient_log_arrays(spec: SeriesSpec, n: int):
    clm = np.empty(n + 1)
    cph = np.empty(n + 1)
    for k in range(n + 1):
        lc = spec.coefficient_log(k)
        clm[k] = lc.log_mag
        cph[k] = lc.phase
    return clm, cph


def _basis_term_logs(spec: SeriesSpec, ks: np.ndarray, zs: np.ndarray):
    """Log form of phi_k(z) for each k in ks (rows) and z in zs (columns)."""
    K = ks.shape[0]
    B = zs.shape[0]
    fam = spec.family
    if fam == "power":
        with np.errstate(divide="ignore", invalid="ignore"):
            la = np.log(np.abs(zs))
            ar = np.arctan2(zs.imag, zs.real)
            kk = ks.astype(np.float64)[:, None]
            lm = kk * la[None, :]
        lm[ks == 0, :] = 0.0          # z^0 = 1 even at z = 0
        ph = wrap_phase_many(kk * ar[None, :])
        ph[ks == 0, :] = 0.0
        return lm, ph
    if fam == "dirichlet":
        lam = np.array([spec.exponent(int(k)) for k in ks])[:, None]
        lm = -lam * zs.real[None, :]
        ph = wrap_phase_many(-lam * zs.imag[None, :])
        return lm, ph
    if fam == "neumann":
        orders = np.repeat(ks, B)
        args = np.tile(zs, K)
        lm, ph = bessel_lanes_log(orders, args)
        return lm.reshape(K, B), ph.reshape(K, B)
    if fam == "kapteyn":
        orders = np.repeat(ks, B)
        args = (ks.astype(np.complex128)[:, None] * zs[None, :]).ravel()
        lm, ph = bessel_lanes_log(orders, args)
        return lm.reshape(K, B), ph.reshape(K, B)
    raise ValueError(f"unknown series family: {fam!r}")


def _accumulate_log(spec: SeriesSpec, n: int, zs: np.ndarray,
                    record_prefix: bool = False):
    ks = np.arange(n + 1, dtype=np.int64)
    clm, cph = _coefficient_log_arrays(spec, n)
    blm, bph = _basis_term_logs(spec, ks, zs)
    acc = ScaledSumBatch(zs.shape[0])
    prefix = np.empty((n + 1, zs.shape[0])) if record_prefix else None
    for k in range(n + 1):
        with np.errstate(invalid="ignore"):
            lm = clm[k] + blm[k]
        # -inf coefficient on -inf basis term produces nan; the term is zero
        lm = np.where(np.isnan(lm), _NEG_INF, lm)
        ph = wrap_phase_many(cph[k] + bph[k])
        acc.add(lm, ph)
        if record_prefix:
            prefix[k] = acc.log_magnitude()
    return acc, prefix


def _plain_eval(spec: SeriesSpec, n: int, zs: np.ndarray):
    """Direct compensated summation for power/dirichlet terms.

    Returns (values, ok); lanes that overflowed anywhere report ok=False
    and must be redone in log form.
    """
    B = zs.shape[0]
    sre = np.zeros(B)
    sim = np.zeros(B)
    cre = np.zeros(B)
    cim = np.zeros(B)

    def add(t):
        nonlocal sre, sim
        tre, tim = t.real, t.imag
        s = sre
        tt = s + tre
        np.add(cre, np.where(np.abs(s) >= np.abs(tre), (s - tt) + tre, (tre - tt) + s),
               out=cre)
        sre = tt
        s = sim
        tt = s + tim
        np.add(cim, np.where(np.abs(s) >= np.abs(tim), (s - tt) + tim, (tim - tt) + s),
               out=cim)
        sim = tt

    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        if spec.family == "power":
            p = np.ones(B, dtype=np.complex128)
            for k in range(n + 1):
                a = spec.coefficient(k)
                if a != 0.0:
                    add(a * p)
                if k < n:
                    p = p * zs
        else:
            for k in range(n + 1):
                a = spec.coefficient(k)
                if a != 0.0:
                    lam = spec.exponent(k)
                    add(a * np.exp(-lam * zs))
    out = (sre + cre) + 1j * (sim + cim)
    ok = np.isfinite(out.real) & np.isfinite(out.imag)
    return out, ok


def section_eval_many(section: Section, zs) -> np.ndarray:
    """Section values at an array of points.

    Power/Dirichlet sums run in plain compensated arithmetic, falling
    back to log form per point on overflow (overflowed values come back
    as signed infinities, never NaN); Bessel families always run in log
    form.
    """
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    spec, n = section.spec, section.n
    if spec.family in ("power", "dirichlet"):
        out, ok = _plain_eval(spec, n, zs)
        if not ok.all():
            acc, _ = _accumulate_log(spec, n, zs[~ok])
            out[~ok] = acc.complex_value()
        return out
    acc, _ = _accumulate_log(spec, n, zs)
    return acc.complex_value()


def section_eval(section: Section, z: complex) -> complex:
    return complex(section_eval_many(section, np.array([z]))[0])


def section_eval_log_many(section: Section, zs) -> tuple[np.ndarray, np.ndarray]:
    """(log magnitude, phase) of section values; robust at any magnitude."""
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    acc, _ = _accumulate_log(section.spec, section.n, zs)
    return acc.log_magnitude(), acc.phase()


def section_eval_log(section: Section, z: complex) -> LogComplex:
    lm, ph = section_eval_log_many(section, np.array([z]))
    return LogComplex(float(lm[0]), float(ph[0]))


def section_prefix_log_magnitudes(section: Section, zs) -> np.ndarray:
    """Matrix of log|f_k(z)| for every prefix k <= n (rows) and z (columns)."""
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    _, prefix = _accumulate_log(section.spec, section.n, zs, record_prefix=True)
    return prefix


# ---------------------------------------------------------------------------
# derivatives

def _log_difference(lm1, ph1, lm2, ph2):
    """Log form of v1 - v2, all arrays elementwise."""
    ref = np.maximum(lm1, lm2)
    live = ref > _NEG_INF
    out_lm = np.full(lm1.shape, _NEG_INF)
    out_ph = np.zeros(lm1.shape)
    if live.any():
        a = np.where(lm1[live] > _NEG_INF,
                     np.exp(lm1[live] - ref[live]) * np.exp(1j * ph1[live]), 0.0)
        b = np.where(lm2[live] > _NEG_INF,
                     np.exp(lm2[live] - ref[live]) * np.exp(1j * ph2[live]), 0.0)
        d = a - b
        mag = np.abs(d)
        with np.errstate(divide="ignore"):
            out_lm[live] = np.where(mag == 0.0, _NEG_INF, np.log(mag) + ref[live])
        out_ph[live] = np.where(mag == 0.0, 0.0,
                                wrap_phase_many(np.arctan2(d.imag, d.real)))
    return out_lm, out_ph


def _derivative_term_logs(spec: SeriesSpec, n: int, zs: np.ndarray):
    """Log form of d/dz [a_k phi_k](z) for k = 0..n."""
    B = zs.shape[0]
    ks = np.arange(n + 1, dtype=np.int64)
    clm, cph = _coefficient_log_arrays(spec, n)
    fam = spec.family
    if fam == "power":
        # k * a_k * z^(k-1)
        lm = np.full((n + 1, B), _NEG_INF)
        ph = np.zeros((n + 1, B))
        if n >= 1:
            sub = ks[1:]
            with np.errstate(divide="ignore"):
                la = np.log(np.abs(zs))
            ar = np.arctan2(zs.imag, zs.real)
            kk = sub.astype(np.float64)[:, None]
            base_lm = (kk - 1.0) * la[None, :]
            base_lm[sub == 1, :] = 0.0
            base_ph = wrap_phase_many((kk - 1.0) * ar[None, :])
            base_ph[sub == 1, :] = 0.0
            lm[1:] = clm[1:, None] + np.log(kk) + base_lm
            ph[1:] = wrap_phase_many(cph[1:, None] + base_ph)
        return lm, ph
    if fam == "dirichlet":
        lam = np.array([spec.exponent(int(k)) for k in ks])
        lm = np.full((n + 1, B), _NEG_INF)
        ph = np.zeros((n + 1, B))
        live = lam != 0.0
        with np.errstate(divide="ignore"):
            lam_lm = np.where(live, np.log(np.abs(lam)), 0.0)
        lam_ph = np.where(lam > 0, math.pi, 0.0)    # multiplier is -lambda_k
        lm[live] = (clm[live] + lam_lm[live])[:, None] - lam[live, None] * zs.real[None, :]
        ph[live] = wrap_phase_many((cph[live] + lam_ph[live])[:, None]
                                   - lam[live, None] * zs.imag[None, :])
        return lm, ph
    # Bessel families: a_k (J_{k-1} - J_{k+1})/2, times k and scaled
    # argument for the kapteyn case; J_{-1} = -J_1
    if fam == "neumann":
        lo = np.abs(ks - 1)
        hi = ks + 1
        orders = np.concatenate([np.repeat(lo, B), np.repeat(hi, B)])
        args = np.tile(zs, 2 * (n + 1))
        lm_all, ph_all = bessel_lanes_log(orders, args)
        lo_lm = lm_all[:(n + 1) * B].reshape(n + 1, B)
        lo_ph = ph_all[:(n + 1) * B].reshape(n + 1, B)
        hi_lm = lm_all[(n + 1) * B:].reshape(n + 1, B)
        hi_ph = ph_all[(n + 1) * B:].reshape(n + 1, B)
        if n >= 0:
            lo_ph[0] = wrap_phase_many(lo_ph[0] + math.pi)   # J_{-1} = -J_1
        d_lm, d_ph = _log_difference(lo_lm, lo_ph, hi_lm, hi_ph)
        lm = clm[:, None] + d_lm - _LN2
        ph = wrap_phase_many(cph[:, None] + d_ph)
        return lm, ph
    if fam == "kapteyn":
        lm = np.full((n + 1, B), _NEG_INF)
        ph = np.zeros((n + 1, B))
        if n >= 1:
            # k >= 1, so the lower order k-1 never goes negative here
            sub = ks[1:]
            lo = sub - 1
            hi = sub + 1
            args_one = (sub.astype(np.complex128)[:, None] * zs[None, :]).ravel()
            orders = np.concatenate([np.repeat(lo, B), np.repeat(hi, B)])
            args = np.concatenate([args_one, args_one])
            lm_all, ph_all = bessel_lanes_log(orders, args)
            m = sub.shape[0] * B
            lo_lm = lm_all[:m].reshape(sub.shape[0], B)
            lo_ph = ph_all[:m].reshape(sub.shape[0], B)
            hi_lm = lm_all[m:].reshape(sub.shape[0], B)
            hi_ph = ph_all[m:].reshape(sub.shape[0], B)
            d_lm, d_ph = _log_difference(lo_lm, lo_ph, hi_lm, hi_ph)
            kk = sub.astype(np.float64)[:, None]
            lm[1:] = clm[1:, None] + np.log(kk) + d_lm - _LN2
            ph[1:] = wrap_phase_many(cph[1:, None] + d_ph)
        return lm, ph
    raise ValueError(f"unknown series family: {fam!r}")


def section_derivative_log_many(section: Section, zs) -> tuple[np.ndarray, np.ndarray]:
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    lm, ph = _derivative_term_logs(section.spec, section.n, zs)
    acc = ScaledSumBatch(zs.shape[0])
    for k in range(section.n + 1):
        acc.add(lm[k], ph[k])
    return acc.log_magnitude(), acc.phase()


def section_derivative_many(section: Section, zs) -> np.ndarray:
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    lm, ph = section_derivative_log_many(section, zs)
    mag = np.where(lm > _NEG_INF, np.exp(np.minimum(lm, 709.0)), 0.0)
    out = mag * np.exp(1j * ph)
    big = lm > 709.0
    if big.any():
        c = np.cos(ph[big])
        s = np.sin(ph[big])
        out.real[big] = np.where(c != 0.0, np.copysign(np.inf, c), 0.0)
        out.imag[big] = np.where(s != 0.0, np.copysign(np.inf, s), 0.0)
    return out


def section_derivative(section: Section, z: complex) -> complex:
    return complex(section_derivative_many(section, np.array([z]))[0])


# ---------------------------------------------------------------------------
# convergence level and abscissa estimation

def _tail_window(n_max: int) -> range:
    return range(n_max // 2, n_max + 1)


def convergence_level(spec: SeriesSpec, n_max: int) -> float:
    """Tail-window estimate of the convergence level rho.

    Power/Kapteyn: 1/limsup |a_n|^(1/n).  Neumann: 1/limsup (e/2n)|a_n|^(1/n).
    Dirichlet: exp(-sigma_c) via the Cahen abscissa estimate.  A tail of
    all-zero coefficients gives rho = +inf (degenerate, finite sum).
    """
    if n_max < 32:
        raise ValueError("need n_max >= 32 for a tail window")
    if spec.family == "dirichlet":
        return math.exp(-cahen_abscissa(spec, n_max))
    best = 0.0
    for k in _tail_window(n_max):
        lm = spec.coefficient_log(k).log_mag
        if lm == _NEG_INF:
            continue
        expr = lm / k
        if spec.family == "neumann":
            expr += 1.0 - math.log(2.0 * k)
        best = max(best, math.exp(expr))
    if best == 0.0:
        return math.inf
    return 1.0 / best


def cahen_abscissa(spec: SeriesSpec, n_max: int) -> float:
    """Tail-window estimate of limsup log|f_n(0)| / lambda_n.

    Per the classical formula this equals max(0, sigma_c): the
    convergence abscissa clipped at zero.  Callers needing a genuinely
    negative sigma_c must shift coefficients by e^(-lambda_k s0) and
    undo the shift themselves.
    """
    if spec.family != "dirichlet":
        raise ValueError("Cahen abscissa applies to dirichlet specs")
    if n_max < 32:
        raise ValueError("need n_max >= 32 for a tail window")
    window = _tail_window(n_max)
    lo = window[0]
    # partial sums of coefficients, compensated
    sre = sim = cre = cim = 0.0
    best = None
    for k in range(0, n_max + 1):
        a = spec.coefficient(k)
        for part, val in (("re", a.real), ("im", a.imag)):
            if part == "re":
                t = sre + val
                cre += (sre - t) + val if abs(sre) >= abs(val) else (val - t) + sre
                sre = t
            else:
                t = sim + val
                cim += (sim - t) + val if abs(sim) >= abs(val) else (val - t) + sim
                sim = t
        if k >= lo:
            lam = spec.exponent(k)
            if lam <= 0.0:
                continue
            mag = math.hypot(sre + cre, sim + cim)
            if mag == 0.0:
                continue
            expr = math.log(mag) / lam
            best = expr if best is None else max(best, expr)
    if best is None:
        raise ValueError("all tail partial sums vanish; abscissa estimate undefined")
    return best


# ---------------------------------------------------------------------------
# plain-text config format

_CATALOG = ("geometric", "kepler-lagrange", "kepler-kapteyn", "zeta",
            "seeded-random-uniform", "explicit")


def _format_complex(v: complex) -> str:
    v = complex(v)
    if v.imag == 0.0:
        return repr(v.real)
    return repr(v)


@dataclass(frozen=True)
class ParsedConfig:
    spec: SeriesSpec
    default_n: int | None


def parse_spec_config(text: str, seed_override: int | None = None) -> ParsedConfig:
    """Parse the key = value series description format.

    Unknown keys are rejected; a seeded-random-uniform config without a
    seed needs seed_override (the CLI --seed flag).
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in entries:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value

    known = {"family", "formula", "label", "n", "seed", "low", "high", "ratio",
             "scale", "mean_anomaly", "coefficients", "exponents"}
    extra = set(entries) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")

    family = entries.get("family")
    formula = entries.get("formula")
    if family is None or formula is None:
        raise ValueError("config needs both family and formula")
    if formula not in _CATALOG:
        raise ValueError(f"unknown formula {formula!r}; catalog: {_CATALOG}")
    label = entries.get("label", "")

    def fnum(key, default=None):
        if key not in entries:
            if default is None:
                raise ValueError(f"{formula} config needs {key}")
            return default
        return float(entries[key])

    exponents = None
    if "exponents" in entries:
        exponents = [float(v) for v in entries["exponents"].split(",") if v.strip()]

    if formula == "geometric":
        spec = SeriesSpec(family=family,
                          coefficients=GeometricCoefficients(
                              complex(entries["ratio"].replace(" ", "")),
                              complex(entries.get("scale", "1").replace(" ", ""))),
                          exponents=ExplicitExponents(exponents) if exponents else None,
                          label=label or "geometric")
    elif formula == "kepler-lagrange":
        spec = SeriesSpec(family=family,
                          coefficients=KeplerLagrangeCoefficients(fnum("mean_anomaly")),
                          exponents=ExplicitExponents(exponents) if exponents else None,
                          label=label or "kepler-lagrange")
    elif formula == "kepler-kapteyn":
        spec = SeriesSpec(family=family,
                          coefficients=KeplerKapteynCoefficients(fnum("mean_anomaly")),
                          exponents=ExplicitExponents(exponents) if exponents else None,
                          label=label or "kepler-kapteyn")
    elif formula == "zeta":
        if family != "dirichlet":
            raise ValueError("zeta formula requires the dirichlet family")
        if exponents is not None:
            raise ValueError("zeta formula fixes its own exponents")
        spec = zeta_spec(label=label)
    elif formula == "seeded-random-uniform":
        seed = entries.get("seed")
        if seed is None:
            if seed_override is None:
                raise ValueError("seeded-random-uniform needs a seed "
                                 "(config key or --seed)")
            seed = seed_override
        stream = SeededUniformCoefficients(int(seed), fnum("low", -1.0),
                                           fnum("high", 1.0), fnum("ratio", 1.0))
        spec = SeriesSpec(family=family, coefficients=stream,
                          exponents=ExplicitExponents(exponents) if exponents else None,
                          label=label or f"seeded-uniform-{seed}")
    else:
        values = [complex(v.replace(" ", "")) for v in
                  entries["coefficients"].split(",") if v.strip()]
        spec = SeriesSpec(family=family, coefficients=ExplicitCoefficients(values),
                          exponents=ExplicitExponents(exponents) if exponents else None,
                          label=label or "explicit")

    default_n = int(entries["n"]) if "n" in entries else None
    return ParsedConfig(spec=spec, default_n=default_n)


def load_spec_config(path, seed_override: int | None = None) -> ParsedConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec_config(fh.read(), seed_override=seed_override)


def serialize_spec_config(spec: SeriesSpec, n: int | None = None) -> str:
    lines = [f"family = {spec.family}",
             f"formula = {spec.coefficients.formula}"]
    for key, value in spec.coefficients.config_items():
        lines.append(f"{key} = {value}")
    if isinstance(spec.exponents, ExplicitExponents):
        for key, value in spec.exponents.config_items():
            lines.append(f"{key} = {value}")
    if spec.label:
        lines.append(f"label = {spec.label}")
    if n is not None:
        lines.append(f"n = {int(n)}")
    return "\n".join(lines) + "\n"
