import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funnelcbf.funnel import (
    FunnelBoundary,
    SafeSetClass,
    barrier_gradient_output,
    barrier_point,
    barrier_time_derivative,
    barrier_value,
    central_difference,
    constant_funnel,
    constant_reference,
    default_grid,
    exponential_funnel,
    gronwall_envelope_holds,
    in_safe_set,
    validate_funnel,
)

Y0 = np.array([8.0, 4.0, 0.0])  # y_r(0) of the vessel reference


class TestValidateFunnel:
    def test_benchmark_funnel_is_valid(self, bench_funnel, usv_grid):
        rep = validate_funnel(bench_funnel, usv_grid)
        assert rep.valid
        # |psi_dot|/psi peaks at t=0: 2.6/1.5
        assert rep.worst_ratio == pytest.approx(2.6 / 1.5, rel=1e-12)
        assert rep.worst_ratio_time == 0.0
        assert rep.worst_ratio < 2.0

    def test_too_small_growth_constant_is_reported(self, usv_grid):
        rep = validate_funnel(exponential_funnel(1.3, 2.0, 0.2, 1.5, usv_grid), usv_grid)
        assert not rep.valid
        assert rep.worst_ratio_time == 0.0

    def test_constant_funnel(self, usv_grid):
        rep = validate_funnel(constant_funnel(1.0, 0.1, usv_grid), usv_grid)
        assert rep.valid and rep.worst_ratio == 0.0

    def test_nonpositive_psi(self):
        grid = default_grid(0, 1)
        rep = validate_funnel(constant_funnel(-1.0, 1.0, grid), grid)
        assert not rep.valid and rep.min_psi == -1.0

    def test_grid_must_increase(self, bench_funnel):
        with pytest.raises(ValueError):
            validate_funnel(bench_funnel, [0.0, 0.2, 0.1])
        with pytest.raises(ValueError):
            validate_funnel(bench_funnel, [])

    def test_growth_constant_positive(self):
        with pytest.raises(ValueError):
            constant_funnel(1.0, 0.0, [0.0, 1.0])

    def test_cached_bounds(self, bench_funnel):
        assert bench_funnel.psi_sup == pytest.approx(1.5)
        assert bench_funnel.psi_inf == pytest.approx(1.3 * math.exp(-20) + 0.2)
        assert bench_funnel.rate_sup == pytest.approx(2.6 / 1.5)

    def test_finite_difference_fallback(self, usv_grid):
        fd = FunnelBoundary.from_functions(lambda t: 1.3 * math.exp(-2 * t) + 0.2, 2.0, usv_grid)
        assert fd.psi_dot(0.5) == pytest.approx(-2.6 * math.exp(-1.0), abs=1e-8)

    def test_gronwall_envelope(self, bench_funnel, usv_grid):
        assert gronwall_envelope_holds(bench_funnel, usv_grid)
        # a jump that grows faster than exp(c t) breaks it
        grid = default_grid(0, 1)
        jumpy = FunnelBoundary(lambda t: 1.0 if t < 0.5 else 3.0, lambda t: 0.0, 0.1, 1.0, 3.0, 0.0)
        assert not gronwall_envelope_holds(jumpy, grid)


class TestBarrier:
    def test_values(self, bench_funnel, usv_ref):
        assert barrier_value(0, Y0 + [0.0, 0, 0], bench_funnel, usv_ref) == pytest.approx(1.125)
        assert barrier_value(0, Y0 + [0.9, 0, 0], bench_funnel, usv_ref) == pytest.approx(0.72)
        assert barrier_value(0, Y0 + [1.5, 0, 0], bench_funnel, usv_ref) == pytest.approx(0.0, abs=1e-15)

    def test_gradient_is_minus_error(self, usv_ref):
        np.testing.assert_allclose(barrier_gradient_output(0, Y0 + [0.9, 0, 0], usv_ref), [-0.9, 0, 0], atol=1e-15)

    def test_time_derivative_example(self, bench_funnel, usv_ref):
        # 1.5 * (-2.6) + <[0.9,0,0], [-0.8, 0, 2.2207]>
        assert barrier_time_derivative(0, Y0 + [0.9, 0, 0], bench_funnel, usv_ref) == pytest.approx(-4.62, abs=1e-12)

    def test_barrier_point_bundle(self, bench_funnel, usv_ref):
        p = barrier_point(0, Y0 + [0.9, 0, 0], bench_funnel, usv_ref)
        assert p.b == pytest.approx(0.72)
        assert p.d_t == pytest.approx(-4.62)
        assert p.error_norm_ratio == pytest.approx(0.6)

    def test_reference_derivative_matches_fd(self, usv_ref, usv_grid):
        assert usv_ref.derivative_mismatch(usv_grid[::10]) < 1e-8
        np.testing.assert_allclose(usv_ref.y_r_dot(0.0), [-0.8, 0.0, 9 * math.pi ** 2 / 40], atol=1e-12)

    def test_fd_consistency_random_points(self, bench_funnel, usv_ref, rng):
        h = 1e-5
        for _ in range(200):
            t = rng.uniform(0, 10)
            y = usv_ref.y_r(t) + rng.normal(size=3)
            grad = barrier_gradient_output(t, y, usv_ref)
            fd = np.array([
                (barrier_value(t, y + h * ei, bench_funnel, usv_ref) - barrier_value(t, y - h * ei, bench_funnel, usv_ref)) / (2 * h)
                for ei in np.eye(3)
            ])
            np.testing.assert_allclose(grad, fd, atol=1e-6)
            fd_t = central_difference(lambda s: barrier_value(s, y, bench_funnel, usv_ref), t, h)
            assert abs(barrier_time_derivative(t, y, bench_funnel, usv_ref) - fd_t) < 1e-6


class TestSafeSet:
    def test_classes(self, bench_funnel, usv_ref):
        assert in_safe_set(0, Y0 + [0.9, 0, 0], bench_funnel, usv_ref) is SafeSetClass.INTERIOR
        assert in_safe_set(0, Y0 + [1.5, 0, 0], bench_funnel, usv_ref) is SafeSetClass.BOUNDARY
        assert in_safe_set(0, Y0 + [1.6, 0, 0], bench_funnel, usv_ref) is SafeSetClass.EXTERIOR

    def test_negative_tol(self, bench_funnel, usv_ref):
        with pytest.raises(ValueError):
            in_safe_set(0, Y0, bench_funnel, usv_ref, tol=-1.0)


_GRID = default_grid(0, 10)
_FUNNEL = exponential_funnel(1.3, 2.0, 0.2, 2.0, _GRID)
_REF = constant_reference([0.3, -0.2], _GRID)
finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 10), y1=finite, y2=finite)
def test_positive_barrier_iff_interior(t, y1, y2):
    y = np.array([y1, y2])
    b = barrier_value(t, y, _FUNNEL, _REF)
    cls = in_safe_set(t, y, _FUNNEL, _REF, tol=0.0)
    assert (b > 0) == (cls is SafeSetClass.INTERIOR) or abs(b) < 1e-12


@settings(max_examples=100, deadline=None)
@given(
    scale=st.floats(0.1, 5), rate=st.floats(0.01, 5), floor=st.floats(0.05, 2),
)
def test_exponential_funnels_need_c_at_least_peak_rate(scale, rate, floor):
    grid = default_grid(0, 5, 0.05)
    peak = rate * scale / (scale + floor)  # attained at t=0
    assert validate_funnel(exponential_funnel(scale, rate, floor, peak * 1.001, grid), grid).valid
    assert not validate_funnel(exponential_funnel(scale, rate, floor, peak * 0.99, grid), grid).valid
    assert gronwall_envelope_holds(exponential_funnel(scale, rate, floor, peak * 1.001, grid), grid)
