"""Sampled checks of the barrier property, set inclusion and the invariance bound.

These checks use model knowledge (``f``, ``g``, bounds) that the controller
never sees. They falsify by sampling; nothing here is a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from funnelcbf.control import GainInterval, candidate_set
from funnelcbf.funnel import FunnelBoundary, ReferenceSignal
from funnelcbf.plants import ModelBounds, NormalFormPlant, witness_input

RATIO_CAP = 1.0 - 1e-6
INVARIANCE_TOL = 1e-6


@dataclass(frozen=True)
class ClassKeLinear:
    """``alpha(s) = slope * s``, an extended class-K-infinity function."""

    slope: float

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("slope must be positive")

    def __call__(self, s):
        return self.slope * s


def witness_alpha(c: float) -> ClassKeLinear:
    return ClassKeLinear(2.0 * max(2.0 * c, 1.0))


def alpha_from_bounds(bounds: ModelBounds, boundary: FunnelBoundary, gains: GainInterval) -> ClassKeLinear:
    """Tangent-line ``alpha`` for which the candidate set lies inside the CBF control set.

    The derivative estimate has the form ``a/b - M``; its tangent at ``b = 2a/M``
    passes through the origin with slope ``-M**2 / (4a)``.
    """
    kg = gains.k_min * bounds.g_underbar
    a = kg * boundary.psi_inf ** 2
    M = boundary.c * boundary.psi_sup ** 2 + boundary.psi_sup * bounds.f_bar + 2.0 * kg
    return ClassKeLinear(M * M / (4.0 * a))


def kcbf_margin(t, y, eta, u, alpha, plant: NormalFormPlant, boundary: FunnelBoundary, reference: ReferenceSignal) -> float:
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    e = y - reference.y_r(t)
    psi = boundary.psi(t)
    b = 0.5 * (psi * psi - float(e @ e))
    ydot = plant.f(y, eta) + plant.g(y, eta) @ np.asarray(u, dtype=float)
    return psi * boundary.psi_dot(t) + float(e @ reference.y_r_dot(t)) - float(e @ ydot) + alpha(b)


def kcbf_membership(t, y, eta, u, alpha, plant, boundary, reference) -> tuple[bool, float]:
    """Whether ``u`` satisfies the CBF derivative inequality; returns ``(member, margin)``."""
    margin = kcbf_margin(t, y, eta, u, alpha, plant, boundary, reference)
    return margin >= 0, margin


# -- sampling ---------------------------------------------------------------------------


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def sample_interior(rng, boundary, reference, n_eta, q_bar, horizon):
    """One ``(t, y, eta)`` with ``||e||/psi`` uniform in ``[0, 1 - 1e-6)``."""
    t = rng.uniform(*horizon)
    ratio = rng.uniform(0.0, RATIO_CAP)
    y = reference.y_r(t) + ratio * boundary.psi(t) * _unit(rng, reference.m)
    if n_eta:
        eta = q_bar * rng.uniform() ** (1.0 / n_eta) * _unit(rng, n_eta)
    else:
        eta = np.zeros(0)
    return t, y, eta


@dataclass
class InclusionReport:
    samples: int
    violations: int
    worst_margin: float
    witness: Optional[tuple] = None  # (t, y, eta, k) at the worst margin
    rows: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def inclusion_check(
    plant: NormalFormPlant,
    boundary: FunnelBoundary,
    reference: ReferenceSignal,
    gains: GainInterval,
    alpha: ClassKeLinear,
    q_bar: float,
    sample_count: int,
    seed: int,
    horizon: tuple[float, float],
    keep_rows: bool = False,
) -> InclusionReport:
    """Check that the whole candidate segment satisfies the CBF inequality.

    The inequality is affine in ``u`` and the set is a segment, so the two
    endpoints ``k_min`` and ``k_max`` decide membership of every element.
    """
    rng = np.random.default_rng(seed)
    report = InclusionReport(samples=sample_count, violations=0, worst_margin=math.inf)
    for _ in range(sample_count):
        t, y, eta = sample_interior(rng, boundary, reference, plant.n_eta, q_bar, horizon)
        cset = candidate_set(t, y, boundary, reference, gains)
        bad = False
        for k in (gains.k_min, gains.k_max):
            margin = kcbf_margin(t, y, eta, cset.element(k), alpha, plant, boundary, reference)
            bad |= margin < 0
            if margin < report.worst_margin:
                report.worst_margin = margin
                report.witness = (t, y, eta, k)
            if keep_rows:
                report.rows.append((t, *y, *eta, k, margin))
        report.violations += bad
    return report


def endpoint_consistency_check(
    plant, boundary, reference, gains, alpha, q_bar, sample_count, seed, horizon, interior_k: int = 10
) -> int:
    """Count samples where both endpoints pass but some interior gain fails."""
    rng = np.random.default_rng(seed)
    ks = np.linspace(gains.k_min, gains.k_max, interior_k + 2)[1:-1]
    discrepancies = 0
    for _ in range(sample_count):
        t, y, eta = sample_interior(rng, boundary, reference, plant.n_eta, q_bar, horizon)
        cset = candidate_set(t, y, boundary, reference, gains)
        ends = [kcbf_margin(t, y, eta, cset.element(k), alpha, plant, boundary, reference) for k in (gains.k_min, gains.k_max)]
        if min(ends) < 0:
            continue
        if any(kcbf_margin(t, y, eta, cset.element(k), alpha, plant, boundary, reference) < 0 for k in ks):
            discrepancies += 1
    return discrepancies


@dataclass
class WitnessReport:
    samples: int
    min_margin: float
    threshold: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def witness_check(
    plant, boundary, reference, q_bar, sample_count, seed, horizon, tol: float = 1e-9
) -> WitnessReport:
    """Margin of the model-based witness input against ``c * psi_inf**2``."""
    rng = np.random.default_rng(seed)
    c = boundary.c
    alpha = witness_alpha(c)
    threshold = c * boundary.psi_inf ** 2
    min_margin, violations = math.inf, 0
    for _ in range(sample_count):
        t, y, eta = sample_interior(rng, boundary, reference, plant.n_eta, q_bar, horizon)
        u = witness_input(plant, t, y, eta, c, reference)
        margin = kcbf_margin(t, y, eta, u, alpha, plant, boundary, reference)
        min_margin = min(min_margin, margin)
        violations += margin < threshold - tol
    return WitnessReport(sample_count, min_margin, threshold, violations)


# -- invariance bound -----------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonBound:
    ratio_constant: float
    eps_hat: float
    eps: float


def epsilon_details(
    bounds: ModelBounds,
    boundary: FunnelBoundary,
    reference: ReferenceSignal,
    gains: GainInterval,
    e0_ratio: float,
) -> EpsilonBound:
    if not (0.0 <= e0_ratio < 1.0):
        raise ValueError(f"initial error ratio must lie in [0, 1), got {e0_ratio}")
    # f_bar already contains the reference speed; it is added again here as
    # in the displayed construction, which only makes the bound conservative
    num = boundary.rate_sup + (bounds.f_bar + reference.y_r_dot_sup) / boundary.psi_inf
    den = 2.0 * bounds.g_underbar * gains.k_min / boundary.psi_sup
    R = num / den
    eps_hat = math.sqrt(R / (1.0 + R))
    eps = max(e0_ratio, eps_hat)
    if eps >= 1.0:
        raise ValueError("invariance bound degenerated to eps >= 1")
    return EpsilonBound(R, eps_hat, eps)


def epsilon_bound(bounds, boundary, reference, gains, e0_ratio) -> float:
    """Guaranteed bound ``eps`` with ``||e(t)|| <= eps * psi(t)`` along the closed loop."""
    return epsilon_details(bounds, boundary, reference, gains, e0_ratio).eps


def invariance_check(trajectory, eps: float, tol: float = INVARIANCE_TOL) -> tuple[bool, float]:
    max_ratio = float(np.max(trajectory.ratio))
    return max_ratio <= eps + tol, max_ratio


def input_norm_bound(gains: GainInterval, boundary: FunnelBoundary, eps: float) -> float:
    """Published input bound ``k_max * psi_sup / ((1 - eps**2) * psi_inf)``."""
    return gains.k_max * boundary.psi_sup / ((1.0 - eps * eps) * boundary.psi_inf)


def input_norm_bound_direct(gains: GainInterval, boundary: FunnelBoundary, eps: float) -> float:
    """Bound obtained directly from ``||e|| <= eps psi`` and ``b >= (1-eps^2) psi^2 / 2``."""
    return 2.0 * gains.k_max * eps / ((1.0 - eps * eps) * boundary.psi_inf)
