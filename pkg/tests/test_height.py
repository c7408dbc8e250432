"""Height functions, level-curve tracing, and the convergence-radius solver."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectionlab.geometry import WindowBox
from sectionlab.height import (BoundaryPolyline, HeightField, height,
                               lagrange_radius, omega_kapteyn,
                               omega_kapteyn_many, trace_boundary)

import oracles

# frozen oracle outputs
OMEGA_I = 1.7037640923281592        # e^sqrt(2) / (1 + sqrt(2))
OMEGA_HALF = 0.6370338448808183
RADIUS_HALF_PI = 0.6627434193491815
RADIUS_FIFTH = 0.8488970056541312
RADIUS_ONE = 0.6866683518466962

WINDOW = WindowBox(-2 - 2j, 2 + 2j)


def point_in_polygon(z: complex, vertices) -> bool:
    # even-odd ray casting against the closed polygon
    inside = False
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        if (a.imag > z.imag) != (b.imag > z.imag):
            x = a.real + (z.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            if x > z.real:
                inside = not inside
    return inside


class TestOmega:
    def test_at_origin(self):
        assert omega_kapteyn(0.0) == 0.0

    def test_exactly_one_on_rays(self):
        for x in (1.0, -1.0, 1.5, -3.7, 100.0):
            assert omega_kapteyn(x) == 1.0
        assert omega_kapteyn(complex(2.0, 1e-13)) == 1.0

    def test_imaginary_unit(self):
        want = math.exp(math.sqrt(2)) / (1 + math.sqrt(2))
        assert abs(omega_kapteyn(1j) - want) < 1e-15
        assert abs(omega_kapteyn(1j) - OMEGA_I) < 1e-15

    def test_interior_point(self):
        assert abs(omega_kapteyn(0.5) - OMEGA_HALF) < 1e-15
        assert abs(omega_kapteyn(0.5) - oracles.omega_reference(0.5)) < 1e-14

    def test_continuity_toward_rays(self):
        for x in (1.5, -2.0):
            d3 = abs(omega_kapteyn(complex(x, 1e-3)) - 1.0)
            d6 = abs(omega_kapteyn(complex(x, 1e-6)) - 1.0)
            assert d6 < d3 < 0.05
            assert d6 < 1e-4

    @given(z=st.complex_numbers(max_magnitude=5.0, allow_nan=False,
                                allow_infinity=False, allow_subnormal=False))
    @settings(max_examples=80, deadline=None)
    def test_symmetry(self, z):
        v = omega_kapteyn(z)
        assert abs(omega_kapteyn(z.conjugate()) - v) <= 1e-12 * max(v, 1.0)
        assert abs(omega_kapteyn(-z) - v) <= 1e-12 * max(v, 1.0)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        zs = rng.uniform(-3, 3, 100) + 1j * rng.uniform(-3, 3, 100)
        zs[:5] = [0.0, 1.0, -2.0, 0.5, 1j]
        got = omega_kapteyn_many(zs)
        # numpy and cmath elementary functions may differ in the last ulp
        for z, g in zip(zs, got):
            s = omega_kapteyn(complex(z))
            assert abs(g - s) <= 1e-15 * max(s, 1e-300)

    def test_no_interior_local_max_off_axis(self):
        # empirical surrogate for properness: every interior grid point
        # has a strictly larger neighbor
        xs = np.linspace(-2, 2, 41)
        ys = np.linspace(0.1, 2.0, 41)
        grid = omega_kapteyn_many((xs[None, :] + 1j * ys[:, None]).ravel()).reshape(41, 41)
        interior = grid[1:-1, 1:-1]
        neighbors = np.stack([grid[:-2, 1:-1], grid[2:, 1:-1],
                              grid[1:-1, :-2], grid[1:-1, 2:]])
        assert (neighbors.max(axis=0) > interior).all()


class TestHeightDispatch:
    def test_values(self):
        assert height("power", 3 + 4j) == 5.0
        assert height("neumann", 3 + 4j) == 5.0
        assert height("dirichlet", 0.0) == 1.0
        assert height("dirichlet", -1.0) == math.exp(1.0)
        assert abs(height("kapteyn", 0.5) - OMEGA_HALF) < 1e-15

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            height("taylor", 1.0)
        with pytest.raises(ValueError):
            HeightField("fourier")

    def test_field_wrapper(self):
        f = HeightField("kapteyn")
        assert f(0.5) == height("kapteyn", 0.5)
        zs = np.array([0.5, 1j, 2.0])
        assert np.array_equal(f.sample(zs), omega_kapteyn_many(zs))


class TestTraceBoundary:
    def test_unit_circle(self):
        polys = trace_boundary("power", 1.0, WINDOW, 256)
        assert len(polys) == 1 and polys[0].closed
        radial = np.abs(np.array(polys[0].points))
        assert np.max(np.abs(radial - 1.0)) <= 1e-2

    def test_vertex_tolerance(self):
        # |height(v) - r| <= 2 * cell diagonal * local gradient bound
        res = 128
        cell = WINDOW.width / (res - 1)
        diag = math.hypot(cell, cell)
        for poly in trace_boundary("kapteyn", 0.9, WINDOW, res):
            for v in poly.points[::7]:
                h = 1e-4
                gx = (omega_kapteyn(v + h) - omega_kapteyn(v - h)) / (2 * h)
                gy = (omega_kapteyn(v + h * 1j) - omega_kapteyn(v - h * 1j)) / (2 * h)
                grad = math.hypot(gx, gy)
                assert abs(omega_kapteyn(v) - 0.9) <= 2.0 * diag * max(grad, 1e-6)

    def test_kapteyn_unit_level_passes_through_pm1(self):
        polys = trace_boundary("kapteyn", 1.0, WINDOW, 512)
        assert len(polys) == 1 and polys[0].closed
        pts = np.array(polys[0].points)
        cell = WINDOW.width / 511
        assert np.min(np.abs(pts - 1.0)) < cell
        assert np.min(np.abs(pts + 1.0)) < cell

    def test_kapteyn_sublevel_oval_nested(self):
        unit = trace_boundary("kapteyn", 1.0, WINDOW, 512)[0]
        polys = trace_boundary("kapteyn", 0.75, WINDOW, 512)
        assert len(polys) == 1 and polys[0].closed
        oval = np.array(polys[0].points)
        # bounded oval strictly inside the unit-level curve
        assert np.max(np.abs(oval)) < 1.0
        for v in polys[0].points[::16]:
            assert point_in_polygon(v, unit.points)

    def test_miss_is_empty(self):
        assert trace_boundary("power", 10.0, WINDOW, 64) == []

    def test_filtration_on_grid(self):
        zs = WINDOW.grid(40, 40)
        h = np.abs(zs)
        for r, rp in [(0.5, 1.0), (1.0, 1.7)]:
            assert np.all((h < r) <= (h < rp))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            trace_boundary("power", -1.0, WINDOW, 64)
        with pytest.raises(ValueError):
            trace_boundary("power", 1.0, WINDOW, 8)


class TestLagrangeRadius:
    def test_laplace_limit(self):
        assert abs(lagrange_radius(math.pi / 2) - RADIUS_HALF_PI) < 1e-9

    def test_fifth(self):
        assert abs(lagrange_radius(0.2) - RADIUS_FIFTH) < 1e-9

    def test_unit_anomaly(self):
        assert abs(lagrange_radius(1.0) - RADIUS_ONE) < 1e-9

    def test_symmetry_and_periodicity(self):
        for m in (0.2, 1.0, 2.5):
            r = lagrange_radius(m)
            assert abs(lagrange_radius(-m) - r) < 1e-9
            assert abs(lagrange_radius(m + 2 * math.pi) - r) < 1e-9

    def test_laplace_limit_is_minimal(self):
        r0 = lagrange_radius(math.pi / 2)
        for m in (0.3, 0.8, 1.2, 2.0, 2.8):
            assert lagrange_radius(m) >= r0 - 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            lagrange_radius(math.inf)
