import math

import numpy as np
import pytest

from funnelcbf.control import GainInterval
from funnelcbf.funnel import circular_reference, constant_funnel, constant_reference, default_grid, exponential_funnel
from funnelcbf.plants import ModelBounds, NormalFormPlant, estimate_bounds, integrator_plant, linear_demo_plant
from funnelcbf.sim import Trajectory
from funnelcbf.verify import (
    ClassKeLinear,
    alpha_from_bounds,
    invariance_check,
    endpoint_consistency_check,
    epsilon_bound,
    epsilon_details,
    input_norm_bound,
    input_norm_bound_direct,
    kcbf_margin,
    kcbf_membership,
    witness_alpha,
    witness_check,
    inclusion_check,
)

GRID = default_grid(0, 5)
UNIT = constant_funnel(1.0, 1.0, GRID)
ZERO_REF = constant_reference([0.0, 0.0], GRID)


def _bounds(f_bar=1.0, g=1.0):
    return ModelBounds(f_bar=f_bar, g_underbar=g, q_bar=0.0, output_radius=1.0)


@pytest.fixture(scope="module")
def demo():
    boundary = exponential_funnel(1.3, 2.0, 0.2, 2.0, GRID)
    ref = circular_reference(0.5, 1.0, GRID)
    plant = linear_demo_plant()
    gains = GainInterval(1.0, 100.0)
    q_bar = 2.0
    bounds = estimate_bounds(plant, boundary, ref, q_bar)
    return plant, boundary, ref, gains, q_bar, bounds


class TestAlpha:
    def test_direct_formula(self):
        assert alpha_from_bounds(_bounds(), UNIT, GainInterval(1, 1)).slope == pytest.approx(4.0)

    def test_monotone_in_drift_bound(self):
        a = alpha_from_bounds(_bounds(1.0), UNIT, GainInterval(1, 1)).slope
        b = alpha_from_bounds(_bounds(2.0), UNIT, GainInterval(1, 1)).slope
        assert b > a

    def test_slope_positive(self):
        with pytest.raises(ValueError):
            ClassKeLinear(0.0)
        assert witness_alpha(0.1).slope == 2.0 and witness_alpha(2.0).slope == 8.0


class TestMargin:
    def test_zero_error_constant_funnel(self):
        alpha = ClassKeLinear(3.0)
        for u in ([0, 0], [5, -7]):
            member, margin = kcbf_membership(0.0, [0, 0], [], u, alpha, integrator_plant(), UNIT, ZERO_REF)
            assert member and margin == pytest.approx(3.0 * 0.5)

    def test_outward_push_fails(self):
        member, margin = kcbf_membership(0.0, [0.5, 0], [], [1.0, 0], ClassKeLinear(1e-6), integrator_plant(), UNIT, ZERO_REF)
        assert not member
        assert margin == pytest.approx(-0.5 + 1e-6 * 0.375, abs=1e-15)


class TestInclusion:
    def test_linear_demo_no_violations(self, demo):
        plant, boundary, ref, gains, q_bar, bounds = demo
        alpha = alpha_from_bounds(bounds, boundary, gains)
        rep = inclusion_check(plant, boundary, ref, gains, alpha, q_bar, 2000, 3, (0, 5))
        assert rep.passed and rep.worst_margin >= 0

    def test_vacuous(self, demo):
        plant, boundary, ref, gains, q_bar, bounds = demo
        rep = inclusion_check(plant, boundary, ref, gains, ClassKeLinear(1.0), q_bar, 0, 0, (0, 5))
        assert rep.violations == 0 and rep.worst_margin == math.inf

    def test_negative_control_tiny_alpha(self):
        # strong outward drift; alpha shrunk by 1e-6 can no longer absorb it
        plant = NormalFormPlant(2, 0, lambda y, e: 20.0 * y + 5.0, lambda y, e: np.eye(2), lambda y, e: np.zeros(0))
        boundary = exponential_funnel(1.3, 2.0, 0.2, 2.0, GRID)
        ref = circular_reference(0.5, 1.0, GRID)
        gains = GainInterval(1e-3, 1.0)
        bounds = estimate_bounds(plant, boundary, ref, 0.0)
        alpha = alpha_from_bounds(bounds, boundary, gains)
        assert inclusion_check(plant, boundary, ref, gains, alpha, 0.0, 500, 1, (0, 5)).violations == 0
        weak = ClassKeLinear(alpha.slope * 1e-6)
        rep = inclusion_check(plant, boundary, ref, gains, weak, 0.0, 500, 1, (0, 5))
        assert rep.violations > 0 and rep.worst_margin < 0
        assert not rep.passed

    def test_endpoint_consistency(self, demo):
        plant, boundary, ref, gains, q_bar, bounds = demo
        alpha = ClassKeLinear(alpha_from_bounds(bounds, boundary, gains).slope * 1e-3)
        assert endpoint_consistency_check(plant, boundary, ref, gains, alpha, q_bar, 500, 4, (0, 5)) == 0

    def test_seeded_reports_repeat(self, demo):
        plant, boundary, ref, gains, q_bar, bounds = demo
        alpha = alpha_from_bounds(bounds, boundary, gains)
        a = inclusion_check(plant, boundary, ref, gains, alpha, q_bar, 200, 9, (0, 5), keep_rows=True)
        b = inclusion_check(plant, boundary, ref, gains, alpha, q_bar, 200, 9, (0, 5), keep_rows=True)
        assert a.rows == b.rows and a.worst_margin == b.worst_margin


def test_witness_margin(demo):
    plant, boundary, ref, _, q_bar, _ = demo
    rep = witness_check(plant, boundary, ref, q_bar, 500, 2, (0, 5))
    assert rep.passed and rep.min_margin >= boundary.c * boundary.psi_inf ** 2 - 1e-9


class TestEpsilon:
    def test_unit_ratio_constant(self):
        # rate_sup=0, psi=1, ref speed 0, f_bar=1, g=0.5, k_min=1 -> R = 1
        eps = epsilon_details(_bounds(1.0, 0.5), UNIT, ZERO_REF, GainInterval(1, 1), 0.0)
        assert eps.ratio_constant == pytest.approx(1.0)
        assert eps.eps_hat == pytest.approx(math.sqrt(0.5))

    def test_zero_ratio_constant(self):
        eps = epsilon_details(_bounds(0.0), UNIT, ZERO_REF, GainInterval(1, 1), 0.3)
        assert eps.eps_hat == 0.0 and eps.eps == 0.3

    def test_initial_ratio_dominates(self):
        assert epsilon_bound(_bounds(1.0, 0.5), UNIT, ZERO_REF, GainInterval(1, 1), 0.9) == 0.9

    def test_initial_ratio_outside(self):
        with pytest.raises(ValueError):
            epsilon_bound(_bounds(), UNIT, ZERO_REF, GainInterval(1, 1), 1.0)

    def test_monotone(self):
        base = epsilon_details(_bounds(1.0, 0.5), UNIT, ZERO_REF, GainInterval(1, 1), 0.0).eps_hat
        assert epsilon_details(_bounds(1.0, 0.5), UNIT, ZERO_REF, GainInterval(2, 2), 0.0).eps_hat <= base
        assert epsilon_details(_bounds(1.0, 1.0), UNIT, ZERO_REF, GainInterval(1, 1), 0.0).eps_hat <= base
        assert epsilon_details(_bounds(2.0, 0.5), UNIT, ZERO_REF, GainInterval(1, 1), 0.0).eps_hat >= base


def _traj(ratios):
    n = len(ratios)
    z = np.zeros((n, 1))
    return Trajectory(np.arange(n, dtype=float), z, z, z, np.zeros(n), np.asarray(ratios), np.zeros(n))


class TestInvarianceCheck:
    def test_exterior_point(self):
        assert invariance_check(_traj([0.1, 1.2]), 0.5) == (False, 1.2)

    def test_near_one(self):
        assert invariance_check(_traj([0.1, 0.999]), 1 - 1e-9)[0]

    def test_input_bounds(self):
        gains = GainInterval(1.0, 10.0)
        assert input_norm_bound(gains, UNIT, 0.5) == pytest.approx(10 / 0.75)
        assert input_norm_bound_direct(gains, UNIT, 0.5) == pytest.approx(10 / 0.75)
