"""Model-free candidate control sets and the minimally invasive safety filter.

The candidate set at ``(t, y)`` is the segment

    { k * grad_y b(t, y) / den : k in [k_min, k_max] }

with ``den = b(t, y)`` inside the safe set, or ``den = max(b, delta)`` for
the saturated variant that is defined everywhere. No plant data enters.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from funnelcbf.errors import DomainError
from funnelcbf.funnel import FunnelBoundary, ReferenceSignal, barrier_value, tracking_error


@dataclass(frozen=True)
class GainInterval:
    k_min: float
    k_max: float

    def __post_init__(self):
        if not (0 < self.k_min <= self.k_max):
            raise ValueError(f"need 0 < k_min <= k_max, got [{self.k_min}, {self.k_max}]")

    def __contains__(self, k) -> bool:
        return self.k_min <= k <= self.k_max


class SetOrigin(str, enum.Enum):
    INTERIOR = "interior-set"
    SATURATED = "saturated-set"


@dataclass(frozen=True)
class CandidateControlSet:
    direction: np.ndarray
    denominator: float
    gains: GainInterval
    origin: SetOrigin = SetOrigin.INTERIOR

    def __post_init__(self):
        if not self.denominator > 0:
            raise ValueError("denominator must be positive")

    @property
    def unit_step(self) -> np.ndarray:
        """Set element per unit gain, ``direction / denominator``."""
        return self.direction / self.denominator

    def element(self, k: float) -> np.ndarray:
        return k * self.unit_step

    @property
    def endpoints(self):
        return self.element(self.gains.k_min), self.element(self.gains.k_max)


def candidate_set(
    t: float,
    y,
    boundary: FunnelBoundary,
    reference: ReferenceSignal,
    gains: GainInterval,
) -> CandidateControlSet:
    b = barrier_value(t, y, boundary, reference)
    if not b > 0:
        raise DomainError(f"candidate set undefined outside int(C) (b={b:.3e} at t={t})")
    return CandidateControlSet(-tracking_error(t, y, reference), b, gains, SetOrigin.INTERIOR)


def saturated_candidate_set(
    t: float,
    y,
    boundary: FunnelBoundary,
    reference: ReferenceSignal,
    gains: GainInterval,
    delta: float,
) -> CandidateControlSet:
    if not delta > 0:
        raise ValueError("delta must be positive")
    b = barrier_value(t, y, boundary, reference)
    return CandidateControlSet(-tracking_error(t, y, reference), max(b, delta), gains, SetOrigin.SATURATED)


def funnel_feedback(cset: CandidateControlSet, k: float) -> np.ndarray:
    """Fixed-gain funnel law: the set element at gain ``k``."""
    if k not in cset.gains:
        raise ValueError(f"gain {k} outside [{cset.gains.k_min}, {cset.gains.k_max}]")
    return cset.element(k)


class Clamp(str, enum.Enum):
    NONE = "none"
    LOWER = "lower"
    UPPER = "upper"
    DEGENERATE = "degenerate"


def safety_filter(cset: CandidateControlSet, u_ref) -> tuple[np.ndarray, float, Clamp]:
    """Closest set element to ``u_ref`` in the Euclidean norm.

    The feasible set is a segment through the origin direction ``d``, so the
    QP reduces to a clamped scalar projection:
    ``k* = clip(<u_ref, d> / <d, d>, k_min, k_max)``.

    Returns ``(u, k_star, clamp)``.
    """
    d = cset.unit_step
    dd = float(d @ d)
    k_min, k_max = cset.gains.k_min, cset.gains.k_max
    if dd == 0.0:
        return np.zeros_like(d), k_min, Clamp.DEGENERATE
    k = float(np.asarray(u_ref, dtype=float) @ d) / dd
    if k <= k_min:
        # ties at a bound are reported as clamped
        return k_min * d, k_min, Clamp.LOWER
    if k >= k_max:
        return k_max * d, k_max, Clamp.UPPER
    return k * d, k, Clamp.NONE


def set_contains(cset: CandidateControlSet, u, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    proj, _, _ = safety_filter(cset, u)
    return float(np.linalg.norm(np.asarray(u, dtype=float) - proj)) <= tol
