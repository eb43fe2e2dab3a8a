import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.hermite_e import hermeval
from scipy.special import ndtr

from nstest.gaussian_analysis import curvature_factor, psi_integral
from nstest.grid_lab import (
    CheckResult,
    GridField,
    ResolutionError,
    apply_heat,
    apply_ou_1d,
    coarea_check,
    dashed_matched_fixture,
    default_fixtures,
    discrete_ns,
    gradient_magnitude,
    level_grid,
    ou_gauss_hermite,
    perimeter_1d,
    perimeter_2d,
    rasterize,
    required_resolution,
    smoothness_check,
    superlevel_set,
    symmetric_difference_measure,
    threshold_search,
    verify_fixture,
)
from nstest.noise_model import heat_torus, ns_estimate, ornstein_uhlenbeck
from nstest.rng import Stream
from nstest.set_model import (
    Ball,
    Box,
    DashedLine,
    Empty,
    Euclidean,
    HalfSpace,
    IntervalUnion,
    SpaceMismatchError,
    Torus,
)

HALF = IntervalUnion(((0.0, 0.5),))
DISK = Ball(Torus(2), (0.5, 0.5), 0.25)
OU_HALF = HalfSpace(Euclidean(1), (1.0,), 0.0)


def he(k):
    coeffs = [0] * k + [1]
    return lambda x: hermeval(x, coeffs)


def torus_distance_to_boundary(x):
    # Signed distance to the boundary of [0, 1/2), positive inside.
    return np.minimum(x, 0.5 - x) * (x < 0.5) - np.minimum(x - 0.5, 1.0 - x) * (x >= 0.5)


class TestRasterize:
    def test_interval_n4(self):
        f = rasterize(IntervalUnion(((0.25, 0.75),)), 4)
        np.testing.assert_array_equal(f.centers(), [0.125, 0.375, 0.625, 0.875])
        np.testing.assert_array_equal(f.values, [0, 1, 1, 0])

    def test_empty(self):
        assert not rasterize(Empty(Torus(2)), 64).values.any()

    def test_dashed(self):
        assert rasterize(DashedLine(0.01), 10_000).values.sum() == 5000

    def test_ou_window(self):
        f = rasterize(OU_HALF, 1200)
        assert f.h == pytest.approx(0.01)
        assert f.centers()[0] == pytest.approx(-5.995)
        assert f.integrate(f.values) == pytest.approx(0.5, abs=1e-9)

    def test_unsupported(self):
        with pytest.raises(SpaceMismatchError):
            rasterize(Ball(Torus(3), (0.5,) * 3, 0.2), 64)
        with pytest.raises(SpaceMismatchError):
            rasterize(Ball(Euclidean(2), (0.0, 0.0), 1.0), 64)
        with pytest.raises(ValueError):
            rasterize(OU_HALF, 64, width=4.0)


class TestHeat:
    def test_constant(self):
        f = GridField(np.full((256, 256), 0.3))
        np.testing.assert_allclose(apply_heat(f, 1e-3).values, 0.3, atol=1e-15)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.05))
    def test_mass_and_range(self, seed, t):
        v = np.random.default_rng(seed).random(256)
        out = apply_heat(GridField(v), t).values
        assert abs(out.mean() - v.mean()) <= 1e-12
        assert out.min() >= v.min() and out.max() <= v.max()

    def test_semigroup(self):
        f = rasterize(DISK, 256)
        for t in (2e-3, 1e-2):
            twice = apply_heat(apply_heat(f, t), t).values
            np.testing.assert_allclose(twice, apply_heat(f, 2 * t).values, atol=1e-10, rtol=0)

    def test_half_line_closed_form(self):
        t = 1e-4
        g = apply_heat(rasterize(HALF, 1 << 14), t)
        d = torus_distance_to_boundary(g.centers())
        np.testing.assert_allclose(g.values, ndtr(d / math.sqrt(2 * t)), atol=1e-4)

    def test_resolution_rule(self):
        assert required_resolution(1e-5) == 2237
        with pytest.raises(ResolutionError, match="2237"):
            apply_heat(rasterize(DISK, 1024), 1e-5)
        apply_heat(rasterize(DISK, 2237), 1e-5)

    def test_domain(self):
        with pytest.raises(SpaceMismatchError):
            apply_heat(rasterize(OU_HALF, 256), 0.1)


class TestOU:
    def test_constant(self):
        f = GridField(np.full(512, 0.7), "ou", 6.0)
        np.testing.assert_allclose(apply_ou_1d(f, 0.3).values, 0.7, atol=1e-14)

    @pytest.mark.parametrize("t", [0.05, 0.3, 2.0])
    def test_half_line_closed_form(self, t):
        f = rasterize(OU_HALF, 4096)
        g = apply_ou_1d(f, t)
        x = f.centers()
        expected = ndtr(math.exp(-t) * x / math.sqrt(-math.expm1(-2 * t)))
        np.testing.assert_allclose(g.values, expected, atol=1e-6)
        # Centres sit at +-h/2 around the origin, so the origin value is their mean.
        mid = len(x) // 2
        assert (g.values[mid - 1] + g.values[mid]) / 2 == pytest.approx(0.5, abs=1e-12)

    def test_semigroup(self):
        f = rasterize(Box(Euclidean(1), (-0.5,), (1.0,)), 4096)
        for t in (0.1, 0.4):
            twice = apply_ou_1d(apply_ou_1d(f, t), t).values
            np.testing.assert_allclose(twice, apply_ou_1d(f, 2 * t).values, atol=1e-6)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_gauss_hermite_eigenfunctions(self, k):
        # P_t He_k = e^{-kt} He_k for the probabilists' Hermite polynomials.
        x = np.linspace(-3, 3, 61)
        t = 0.4
        np.testing.assert_allclose(ou_gauss_hermite(he(k), x, t), math.exp(-k * t) * he(k)(x), atol=1e-12)

    def test_exact_and_gauss_hermite_on_smooth_field(self):
        f = rasterize(OU_HALF, 4096)
        x = f.centers()
        field = f.with_values(he(3)(x))
        inner = np.abs(x) <= 2
        target = math.exp(-1.2) * he(3)(x[inner])
        for quad in ("exact", "gauss-hermite"):
            out = apply_ou_1d(field, 0.4, quadrature=quad).values
            np.testing.assert_allclose(out[inner], target, atol=2e-5)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            ou_gauss_hermite(he(1), np.zeros(3), 0.1, nodes=32)

    def test_range(self):
        f = rasterize(Box(Euclidean(1), (-0.5,), (1.0,)), 1024)
        g = apply_ou_1d(f, 0.05).values
        assert g.min() >= 0.0 and g.max() <= 1.0


class TestGradient:
    def test_constant(self):
        assert not gradient_magnitude(GridField(np.full((32, 32), 0.4))).values.any()

    def test_sine(self):
        N = 1024
        x = (np.arange(N) + 0.5) / N
        grad = gradient_magnitude(GridField(np.sin(2 * np.pi * x))).values
        h = 1 / N
        assert grad.max() == pytest.approx(2 * np.pi, abs=(2 * np.pi) ** 3 * h**2)
        np.testing.assert_allclose(grad, np.abs(2 * np.pi * np.cos(2 * np.pi * x)), atol=1e-3)

    def test_ramp(self):
        f = GridField(np.zeros(600), "ou", 6.0)
        ramp = f.with_values(0.1 * f.centers() + 0.5)
        np.testing.assert_allclose(gradient_magnitude(ramp).values, 0.1, rtol=1e-12)

    def test_2d_norm(self):
        N = 256
        c = (np.arange(N) + 0.5) / N
        xx, yy = np.meshgrid(c, c, indexing="ij")
        f = GridField(np.sin(2 * np.pi * xx) + np.sin(2 * np.pi * yy))
        exact = 2 * np.pi * np.hypot(np.cos(2 * np.pi * xx), np.cos(2 * np.pi * yy))
        np.testing.assert_allclose(gradient_magnitude(f).values, exact, atol=1e-3)


class TestDiscreteNs:
    def test_empty(self):
        assert discrete_ns(Empty(Torus(1)), 1e-4, 1 << 12) == 0.0

    def test_interval(self):
        assert discrete_ns(HALF, 1e-4, 1 << 16) == pytest.approx(0.0225676, abs=1e-5)

    def test_dashed_at_own_scale(self):
        ns = discrete_ns(DashedLine(0.01), 0.01, 10_000)
        assert 0.2 <= ns <= 1.0
        assert ns < 2 * math.sqrt(0.01 / math.pi) * 100

    def test_ou_half_line(self):
        t = 0.5
        assert discrete_ns(OU_HALF, t, 1 << 12) == pytest.approx(math.acos(math.exp(-t)) / math.pi, abs=1e-4)

    @pytest.mark.parametrize("region, t, N", [
        (HALF, 1e-4, 1 << 13),
        (DISK, 1e-4, 1024),
        (Box(Euclidean(1), (-0.5,), (1.0,)), 0.25, 1 << 11),
    ])
    def test_refinement(self, region, t, N):
        a, b = discrete_ns(region, t, N), discrete_ns(region, t, 2 * N)
        assert abs(a - b) < 0.01 * b

    @pytest.mark.parametrize("model, region, t, N", [
        (heat_torus(1), HALF, 1e-4, 1 << 14),
        (heat_torus(2), DISK, 1e-4, 1024),
        (ornstein_uhlenbeck(1), OU_HALF, 0.5, 1 << 12),
    ])
    def test_matches_monte_carlo(self, model, region, t, N):
        est = ns_estimate(model, region, t, 10**6, Stream(17), workers=4)
        assert abs(discrete_ns(region, t, N, model) - est.mean) <= 3 * est.std_error

    def test_model_mismatch(self):
        with pytest.raises(SpaceMismatchError):
            discrete_ns(HALF, 1e-4, 1 << 12, ornstein_uhlenbeck(1))


class TestLevelSets:
    def test_superlevel(self):
        f = rasterize(HALF, 64)
        np.testing.assert_array_equal(superlevel_set(f, 0.5).values, f.values)
        g = apply_heat(rasterize(DISK, 256), 1e-3)
        half = g.with_values(0.5 * g.values)
        assert not superlevel_set(half, half.values.max() + 1e-9).values.any()
        with pytest.raises(ValueError):
            superlevel_set(f, 1.0)

    def test_superlevel_duality(self):
        g = apply_heat(rasterize(DISK, 256), 1e-3)
        for s in (0.2, 0.5, 0.77):
            up = superlevel_set(g, s).values
            down = superlevel_set(g.with_values(1 - g.values), 1 - s + 1e-12).values
            mismatch = np.count_nonzero(down != 1 - up)
            assert mismatch <= np.count_nonzero(np.isclose(g.values, s, atol=1e-11))

    def test_symmetric_difference(self):
        a = rasterize(IntervalUnion(((0.0, 0.5),)), 1000)
        b = rasterize(IntervalUnion(((0.1, 0.6),)), 1000)
        assert symmetric_difference_measure(a, a) == 0
        assert symmetric_difference_measure(a, a.with_values(1 - a.values)) == 1
        assert symmetric_difference_measure(a, b) == pytest.approx(0.2)
        with pytest.raises(SpaceMismatchError):
            symmetric_difference_measure(a, rasterize(HALF, 500))

    def test_perimeter_1d(self):
        assert perimeter_1d(rasterize(IntervalUnion(((0.2, 0.5),)), 1000), 0.5) == 2
        assert perimeter_1d(rasterize(DashedLine(0.01), 10_000), 0.5) == 100
        x = (np.arange(1000) + 0.5) / 1000
        bump = GridField(ndtr((x - 0.3) / 0.05) * ndtr((0.7 - x) / 0.05))
        assert perimeter_1d(bump, 0.5) == 2

    def test_perimeter_1d_tie(self):
        f = GridField(np.array([0.0, 0.5, 1.0, 0.5]))
        assert perimeter_1d(f, 0.5) == 2

    def test_perimeter_1d_ou(self):
        # One crossing at the origin weighs phi(0).
        f = rasterize(OU_HALF, 4096)
        g = apply_ou_1d(f, 0.3)
        assert perimeter_1d(g, 0.5) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-9)

    def test_perimeter_2d_band(self):
        band = Box(Torus(2), (0.0, 0.25), (1.0, 0.75))
        g = apply_heat(rasterize(band, 256), 1e-3)
        assert perimeter_2d(g, 0.5) == pytest.approx(2.0, rel=0.02)

    @pytest.mark.parametrize("t, N", [(1e-4, 1024), (1e-5, 2304)])
    def test_perimeter_2d_disk(self, t, N):
        g = apply_heat(rasterize(DISK, N), t)
        assert perimeter_2d(g, 0.5) == pytest.approx(2 * math.pi * 0.25, rel=0.02)

    def test_perimeter_2d_empty_level(self):
        g = apply_heat(rasterize(DISK, 256), 1e-3)
        assert perimeter_2d(g, 0.9999999) == 0.0
        assert perimeter_2d(GridField(np.zeros((32, 32))), 0.5) == 0.0

    def test_against_skimage(self):
        measure = pytest.importorskip("skimage.measure")
        g = apply_heat(rasterize(DISK, 512), 1e-3)
        for s in (0.1, 0.5, 0.9):
            length = sum(np.sum(np.hypot(*np.diff(c, axis=0).T)) for c in measure.find_contours(g.values, s))
            assert perimeter_2d(g, s) == pytest.approx(length / 512, rel=1e-12)

    def test_periodic_closure(self):
        # A disk centred on a corner of the unit square wraps onto all four corners.
        corner = Ball(Torus(2), (0.0, 0.0), 0.25)
        g = apply_heat(rasterize(corner, 512), 1e-3)
        centred = apply_heat(rasterize(DISK, 512), 1e-3)
        assert perimeter_2d(g, 0.5) == pytest.approx(perimeter_2d(centred, 0.5), rel=1e-12)

    def test_saddle_rule(self):
        # Checkerboard cell: corners a, d high and b, c low; the centre average
        # 0.5 >= s joins a and d, giving the two short diagonal cuts.
        v = np.array([[1.0, 0.0], [0.0, 1.0]])
        f = GridField(np.kron(v, np.ones((1, 1))))
        assert perimeter_2d(f, 0.4) == pytest.approx(perimeter_2d(f, 0.6), rel=1e-12)


class TestLevelGrid:
    def test_weights_sum(self):
        levels, w = level_grid(512)
        assert levels.size == 512
        assert w.sum() == pytest.approx(math.sqrt(2 / math.pi), abs=1e-9)


class TestChecks:
    def test_check_result(self):
        assert CheckResult("x", 1.02, 1.0, 0.02, 0.0).passed
        assert not CheckResult("x", 1.03, 1.0, 0.02, 0.0).passed
        assert CheckResult("x", 1.0, 0.0, 0.0, 1.0).passed
        d = CheckResult("x", 1.0, 2.0, 0.1).to_dict()
        assert d["slack"] == 1.0 and d["pass"]

    def test_coarea_interval(self):
        r = coarea_check(HALF, 1e-4, 1 << 16)
        assert r.passed, r.to_dict()
        assert r.details["relative_gap"] < 0.03

    def test_coarea_empty(self):
        r = coarea_check(Empty(Torus(1)), 1e-4, 1 << 12)
        assert r.passed
        assert r.details["by_levels"] == r.details["by_gradient"] == r.details["ns"] == 0

    def test_smoothness_half_line_tight(self):
        r = smoothness_check(HALF, 1e-4, 1 << 14)
        assert r.passed
        assert abs(r.details["relative_slack"]) <= 0.005

    def test_smoothness_constant(self):
        r = smoothness_check(Empty(Torus(2)), 1e-3, 256)
        assert r.passed and r.check("bakry_ledoux").lhs == 0.0

    def test_smoothness_ou_half_line(self):
        # g = Phi(a x) with a = e^{-t} / sqrt(1 - e^{-2t}) = c_1(t): the bound is attained.
        t = 0.5
        r = smoothness_check(OU_HALF, t, 1 << 12)
        assert r.details["c_R"] == pytest.approx(math.exp(-t) / math.sqrt(-math.expm1(-2 * t)))
        assert r.passed
        assert abs(r.details["relative_slack"]) < 1e-3

    def test_threshold_interval(self):
        t = 1e-4
        for eta in (0.1, 0.2):
            cert = threshold_search(HALF, t, eta, 1 << 14)
            assert cert.passed
            assert eta <= cert.s <= 1 - eta
            assert cert.sym_diff <= cert.ns / eta
            assert cert.perimeter == 2
            expected_rhs = curvature_factor(0, t) * cert.ns / psi_integral(eta, 1 - eta)
            assert cert.bound_rhs == pytest.approx(expected_rhs, rel=1e-12)

    def test_threshold_empty(self):
        cert = threshold_search(Empty(Torus(1)), 1e-4, 0.2, 1 << 12)
        assert cert.passed and cert.perimeter == 0 and cert.sym_diff == 0

    def test_threshold_dashed_collapse(self):
        fx = dashed_matched_fixture()
        cert = threshold_search(fx.region, fx.t, 0.2, fx.N)
        assert cert.passed
        assert cert.perimeter < 0.1 * fx.region.exact_perimeter()

    def test_threshold_eta_domain(self):
        with pytest.raises(ValueError):
            threshold_search(HALF, 1e-4, 0.5, 1 << 12)

    def test_curve_csv(self):
        cert = threshold_search(HALF, 1e-4, 0.2, 1 << 12)
        lines = cert.curve_csv().strip().split("\n")
        assert lines[0] == "fixture,eta,s,perimeter,sym_diff"
        assert len(lines) == 1 + cert.details["levels_scanned"]

    def test_zero_tolerance_fails(self):
        fx = next(f for f in default_fixtures() if f.name == "disk")
        reports = verify_fixture(fx, tolerance=0.0)
        assert not all(r.passed for r in reports)

    def test_reports_serialize(self):
        fx = next(f for f in default_fixtures() if f.name == "ou-interval")
        for r in verify_fixture(fx):
            json.dumps(r.to_dict())

    def test_model_mismatch(self):
        with pytest.raises(SpaceMismatchError):
            coarea_check(HALF, 1e-4, 1 << 12, ornstein_uhlenbeck(1))
