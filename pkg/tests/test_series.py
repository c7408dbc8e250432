"""Series sections: evaluation, derivatives, Kepler coefficients, levels."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectionlab.bessel import LogComplex, bessel_j, bessel_j_scaled
from sectionlab import series as se
from sectionlab.series import (CallableCoefficients, ExplicitExponents,
                               KeplerParams, LogExponents, Section, SeriesSpec,
                               cahen_abscissa, convergence_level, explicit_spec,
                               geometric_spec, kepler_kapteyn_coefficient,
                               kepler_kapteyn_spec, kepler_lagrange_coefficient,
                               kepler_lagrange_spec, parse_spec_config,
                               section_derivative, section_derivative_many,
                               section_eval, section_eval_log,
                               section_eval_log_many, section_eval_many,
                               section_prefix_log_magnitudes,
                               seeded_uniform_spec, serialize_spec_config,
                               zeta_spec)

import oracles

# frozen oracle outputs
ZETA_10_AT_2 = 1.5497677311665408          # 1968329/1270080
KAPTEYN_COEFF_25 = -0.07671394197305108    # 2 sin(5)/25


class TestSectionEval:
    def test_power_unit_coefficients(self):
        sec = explicit_spec("power", [1, 1, 1, 1]).section(3)
        assert section_eval(sec, 2.0) == 15.0

    def test_zeta_partial_sum(self):
        got = section_eval(zeta_spec().section(10), 2.0)
        want = oracles.exact_rational_sum(Fraction(1, k * k) for k in range(1, 11))
        assert want == Fraction(1968329, 1270080)
        assert abs(got - float(want)) < 1e-15
        assert abs(got - ZETA_10_AT_2) < 1e-15

    def test_kapteyn_kepler_section_solves_kepler(self):
        eps = 0.3
        E = oracles.kepler_eccentric_anomaly(0.2, eps)
        sec = kepler_kapteyn_spec(0.2).section(25)
        assert abs(section_eval(sec, eps) - (E - 0.2)) < 1e-8

    def test_matches_brute_force_sum(self):
        spec = explicit_spec("neumann", [0.5, -1.0, 2.0, 0.25])
        z = 1.3 - 0.4j
        want = sum(spec.coefficient(k) * bessel_j(k, z) for k in range(4))
        assert abs(section_eval(spec.section(3), z) - want) < 1e-12 * abs(want)

    def test_kapteyn_constant_term_uses_unit_basis(self):
        # phi_0 = J_0(0*z) = 1 identically; log-form round trip costs an ulp
        spec = explicit_spec("kapteyn", [3.5, 1.0])
        assert abs(section_eval(spec.section(0), 0.7j) - 3.5) <= 1e-15 * 3.5

    def test_overflow_is_signed_infinity(self):
        sec = geometric_spec(2.0).section(300)
        v = section_eval(sec, 10.0)
        assert math.isinf(v.real) and not math.isnan(v.imag)
        lm, ph = section_eval_log_many(sec, np.array([10.0 + 0j]))
        # dominated by the top term: |a_n z^n| = 20^300
        assert abs(lm[0] - 300 * math.log(20.0)) < 1.0

    def test_log_and_plain_agree(self):
        sec = kepler_kapteyn_spec(0.2).section(25)
        zs = np.array([0.3 + 0j, 0.1 - 0.2j, 0.8j])
        plain = section_eval_many(sec, zs)
        lm, ph = section_eval_log_many(sec, zs)
        vals = np.exp(lm) * np.exp(1j * ph)
        assert np.all(np.abs(vals - plain) <= 1e-12 * np.abs(plain))

    def test_prefix_magnitudes_end_at_full_sum(self):
        sec = zeta_spec().section(24)
        zs = np.array([0.5 + 0.2j, 2.0 + 0j])
        prefix = section_prefix_log_magnitudes(sec, zs)
        lm, _ = section_eval_log_many(sec, zs)
        assert prefix.shape == (25, 2)
        assert np.allclose(prefix[-1], lm, rtol=0, atol=1e-12)

    def test_batch_composition_is_invisible(self):
        for spec, z in [(geometric_spec(0.8), 1.1 + 0.3j),
                        (kepler_kapteyn_spec(0.2), 0.4 - 0.7j)]:
            sec = spec.section(12)
            batch = section_eval_many(sec, np.array([0.1 + 0j, z, 2.0 - 1j]))
            single = section_eval_many(sec, np.array([z]))
            assert batch[1] == single[0]


class TestDerivative:
    def test_power_example(self):
        sec = explicit_spec("power", [1, 1, 1, 1]).section(3)
        assert section_derivative(sec, 2.0) == 17.0

    def test_kapteyn_at_origin(self):
        spec = kepler_kapteyn_spec(0.9)
        a1 = spec.coefficient(1)
        got = section_derivative(spec.section(30), 0.0)
        assert abs(got - a1 / 2) < 1e-15 * abs(a1)

    @pytest.mark.parametrize("spec,n", [
        (explicit_spec("power", [1, -2, 0.5, 1j, 3]), 4),
        (zeta_spec(), 17),
        (explicit_spec("neumann", [0.3, 1.0, -0.7, 2.2]), 3),
        (kepler_kapteyn_spec(0.2), 20),
    ])
    def test_finite_difference_agreement(self, spec, n):
        rng = np.random.default_rng(11)
        sec = spec.section(n)
        for _ in range(10):
            z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            h = 1e-6 * max(1.0, abs(z))
            fd = (section_eval(sec, z + h) - section_eval(sec, z - h)) / (2 * h)
            got = section_derivative(sec, z)
            if abs(fd) < 1e-6:
                continue
            assert abs(got - fd) <= 1e-6 * max(abs(fd), 1.0), (spec.family, z)


class TestKeplerCoefficients:
    def test_lagrange_first_is_sine(self):
        for m in (0.2, 1.0, 2.5):
            assert abs(kepler_lagrange_coefficient(m, 1) - math.sin(m)) < 1e-15

    def test_lagrange_second(self):
        for m in (0.2, 1.0):
            assert abs(kepler_lagrange_coefficient(m, 2) - math.sin(2 * m) / 2) < 1e-15

    def test_lagrange_series_solves_kepler(self):
        eps = 0.3
        E = oracles.kepler_eccentric_anomaly(0.2, eps)
        total = sum(kepler_lagrange_coefficient(0.2, k) * eps ** k
                    for k in range(1, 26))
        assert abs(total - (E - 0.2)) < 1e-8

    def test_kapteyn_values(self):
        assert kepler_kapteyn_coefficient(math.pi / 2, 1) == 2.0
        for n in (1, 2, 9):
            assert abs(kepler_kapteyn_coefficient(math.pi, n)) < 1e-12
        assert abs(kepler_kapteyn_coefficient(0.2, 25) - KAPTEYN_COEFF_25) < 1e-17

    def test_rejects_index_zero(self):
        with pytest.raises(ValueError):
            kepler_lagrange_coefficient(0.2, 0)
        with pytest.raises(ValueError):
            kepler_kapteyn_coefficient(0.2, 0)

    def test_cross_check_inside_both_domains(self):
        # both Kepler expansions converge for these arguments
        lag = kepler_lagrange_spec(0.2).section(40)
        kap = kepler_kapteyn_spec(0.2).section(40)
        for eps in (0.5, -0.45, 0.3 + 0.3j, 0.5j, -0.2 - 0.4j):
            a = section_eval(lag, eps)
            b = section_eval(kap, eps)
            assert abs(a - b) < 1e-6

    def test_kepler_residual_along_real_eccentricity(self):
        sec = kepler_kapteyn_spec(0.2).section(60)
        for eps in np.linspace(0.0, 0.3, 7):
            E = 0.2 + section_eval(sec, complex(eps)).real
            assert abs(0.2 - E + eps * math.sin(E)) <= 1e-8

    def test_params_type_validation(self):
        KeplerParams(0.2, 0.3 + 0.1j)
        with pytest.raises(ValueError):
            KeplerParams(math.nan, 0.1)


class TestInvariants:
    @pytest.mark.parametrize("spec,n", [
        (explicit_spec("power", [1.0, -0.5, 2.0, 0.125]), 3),
        (zeta_spec(), 12),
        (explicit_spec("neumann", [1.0, 0.25, -1.5]), 2),
        (kepler_kapteyn_spec(0.7), 15),
    ])
    def test_conjugate_symmetry_for_real_coefficients(self, spec, n):
        rng = np.random.default_rng(2)
        sec = spec.section(n)
        for _ in range(6):
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            v = section_eval(sec, z)
            w = section_eval(sec, z.conjugate())
            assert abs(w - v.conjugate()) <= 1e-12 * max(abs(v), 1e-12)

    def test_linearity(self):
        a = [1.0, 2.0, -1.0, 0.5]
        b = [0.5j, -1.0, 3.0, 2.0 - 1j]
        alpha, beta = 2.0 - 0.5j, -1.5
        mixed = [alpha * x + beta * y for x, y in zip(a, b)]
        z = 0.7 - 1.2j
        va = section_eval(explicit_spec("power", a).section(3), z)
        vb = section_eval(explicit_spec("power", b).section(3), z)
        vm = section_eval(explicit_spec("power", mixed).section(3), z)
        assert abs(vm - (alpha * va + beta * vb)) <= 1e-12 * max(abs(vm), 1.0)

    def test_section_equals_term_sum(self):
        spec = kepler_kapteyn_spec(0.2)
        z = 0.4 + 0.1j
        want = 0j
        for k in range(1, 9):
            want += spec.coefficient(k) * bessel_j_scaled(k, z).to_complex()
        got = section_eval(spec.section(8), z)
        assert abs(got - want) <= 1e-13 * abs(want)


class TestConvergenceLevel:
    def test_geometric_two(self):
        rho = convergence_level(geometric_spec(2.0), 128)
        assert abs(rho - 0.5) <= 1e-6

    def test_kapteyn_kepler_level_one(self):
        rho = convergence_level(kepler_kapteyn_spec(0.2), 400)
        assert abs(rho - 1.0) <= 0.05

    def test_neumann_scaled_order_coefficients(self):
        # |a_n| = (2n/e)^n / 5^n realizes convergence level 5
        def logfn(n):
            if n == 0:
                return LogComplex(float("-inf"), 0.0)
            return LogComplex(n * (math.log(2.0 * n) - 1.0 - math.log(5.0)), 0.0)
        spec = SeriesSpec(family="neumann",
                          coefficients=CallableCoefficients(None, logfn, "scaled-order"))
        rho = convergence_level(spec, 400)
        assert abs(rho - 5.0) <= 0.25

    def test_degenerate_tail_is_infinite(self):
        spec = explicit_spec("power", [1.0, 2.0, 3.0])
        assert convergence_level(spec, 64) == math.inf

    def test_needs_tail(self):
        with pytest.raises(ValueError):
            convergence_level(geometric_spec(2.0), 16)


class TestCahenAbscissa:
    def test_zeta_tends_to_one(self):
        got = cahen_abscissa(zeta_spec(), 100000)
        assert abs(got - 1.0) <= 1e-3

    def test_alternating_is_zero(self):
        spec = SeriesSpec(family="dirichlet",
                          coefficients=CallableCoefficients(
                              lambda k: (-1.0) ** k, None, "alternating"),
                          exponents=LogExponents())
        assert cahen_abscissa(spec, 2000) == 0.0

    def test_constant_only_is_zero(self):
        spec = SeriesSpec(family="dirichlet",
                          coefficients=CallableCoefficients(
                              lambda k: 1.0 if k == 0 else 0.0, None, "constant"),
                          exponents=LogExponents())
        assert cahen_abscissa(spec, 500) == 0.0

    def test_vanishing_tail_reported(self):
        spec = SeriesSpec(family="dirichlet",
                          coefficients=CallableCoefficients(
                              lambda k: 0.0, None, "null"),
                          exponents=LogExponents())
        with pytest.raises(ValueError):
            cahen_abscissa(spec, 100)

    def test_wrong_family_rejected(self):
        with pytest.raises(ValueError):
            cahen_abscissa(geometric_spec(0.5), 100)


class TestSpecValidation:
    def test_dirichlet_needs_exponents(self):
        with pytest.raises(ValueError):
            SeriesSpec(family="dirichlet", coefficients=se.ZetaCoefficients())

    def test_only_dirichlet_carries_exponents(self):
        with pytest.raises(ValueError):
            SeriesSpec(family="power", coefficients=se.ZetaCoefficients(),
                       exponents=LogExponents())

    def test_exponents_must_increase(self):
        with pytest.raises(ValueError):
            ExplicitExponents([0.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            explicit_spec("dirichlet", [1, 1, 1], exponents=[2.0, 1.0, 3.0])

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            explicit_spec("pade", [1, 2])

    def test_negative_truncation(self):
        with pytest.raises(ValueError):
            Section(geometric_spec(0.5), -1)


class TestSeededStream:
    def test_reproducible(self):
        a = seeded_uniform_spec(123)
        b = seeded_uniform_spec(123)
        assert [a.coefficient(k) for k in range(20)] == \
               [b.coefficient(k) for k in range(20)]

    def test_seed_changes_draws(self):
        a = seeded_uniform_spec(123)
        b = seeded_uniform_spec(124)
        assert [a.coefficient(k) for k in range(8)] != \
               [b.coefficient(k) for k in range(8)]

    def test_out_of_order_access(self):
        a = seeded_uniform_spec(9, low=0.2, high=1.0)
        v5 = a.coefficient(5)
        b = seeded_uniform_spec(9, low=0.2, high=1.0)
        for k in range(5):
            b.coefficient(k)
        assert b.coefficient(5) == v5

    def test_envelope_ratio(self):
        spec = seeded_uniform_spec(7, ratio=0.75)
        rho = convergence_level(spec, 256)
        assert abs(rho - 1.0 / 0.75) < 0.05


class TestConfigFormat:
    def test_round_trip_kepler(self):
        text = serialize_spec_config(kepler_kapteyn_spec(0.2), 25)
        parsed = parse_spec_config(text)
        assert parsed.default_n == 25
        assert parsed.spec.family == "kapteyn"
        assert parsed.spec.coefficient(25) == kepler_kapteyn_spec(0.2).coefficient(25)

    def test_round_trip_explicit_dirichlet(self):
        spec = explicit_spec("dirichlet", [0.5, 0.5], exponents=[-1.0, 1.0])
        parsed = parse_spec_config(serialize_spec_config(spec)).spec
        assert parsed.exponent(0) == -1.0 and parsed.exponent(1) == 1.0
        z = 0.3 + 2j
        assert abs(section_eval(parsed.section(1), z)
                   - section_eval(spec.section(1), z)) < 1e-15

    def test_round_trip_geometric_complex_ratio(self):
        spec = geometric_spec(0.5 + 0.25j, scale=2.0)
        parsed = parse_spec_config(serialize_spec_config(spec)).spec
        assert parsed.coefficient(7) == spec.coefficient(7)

    def test_comments_and_blanks(self):
        text = "# a comment\n\nfamily = power   # inline\nformula = geometric\nratio = 0.5\n"
        assert parse_spec_config(text).spec.family == "power"

    def test_seed_override(self):
        text = "family = power\nformula = seeded-random-uniform\nlow = -1\nhigh = 1\n"
        with pytest.raises(ValueError):
            parse_spec_config(text)
        spec = parse_spec_config(text, seed_override=42).spec
        assert spec.coefficient(3) == seeded_uniform_spec(42).coefficient(3)

    def test_rejects_unknown_keys_and_formulas(self):
        with pytest.raises(ValueError):
            parse_spec_config("family = power\nformula = geometric\nratio = 1\nfoo = 1\n")
        with pytest.raises(ValueError):
            parse_spec_config("family = power\nformula = taylor\n")
        with pytest.raises(ValueError):
            parse_spec_config("family = power\nformula = zeta\n")
        with pytest.raises(ValueError):
            parse_spec_config("family = power\nformula = geometric\nratio = 1\nratio = 2\n")
