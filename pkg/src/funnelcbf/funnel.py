"""Funnel boundary, reference signal and the output-only barrier function.

Every quantity here is computable from the measured output ``y`` alone:

    b(t, y) = 1/2 * (psi(t)**2 - ||y - y_r(t)||**2)

with safe set ``C = {(t, y) : ||y - y_r(t)|| <= psi(t)}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_FD_STEP = 1e-5
DEFAULT_BOUNDARY_TOL = 1e-12

ScalarFn = Callable[[float], float]
VectorFn = Callable[[float], np.ndarray]


def central_difference(fn, t: float, h: float = DEFAULT_FD_STEP):
    """Central finite difference of ``fn`` (scalar or vector valued) at ``t``."""
    return (np.asarray(fn(t + h)) - np.asarray(fn(t - h))) / (2.0 * h)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def default_grid(t0: float, horizon: float, step: float = 1e-2) -> np.ndarray:
    n = int(round(horizon / step))
    return t0 + step * np.arange(n + 1)


@dataclass(frozen=True)
class FunnelBoundary:
    """A funnel boundary ``psi`` with growth constant ``c``.

    ``psi_inf``, ``psi_sup`` and ``rate_sup`` (= max |psi_dot|/psi) are
    cached over the grid the boundary was built on.
    """

    psi: ScalarFn
    psi_dot: ScalarFn
    c: float
    psi_inf: float
    psi_sup: float
    rate_sup: float

    @classmethod
    def from_functions(
        cls,
        psi: ScalarFn,
        c: float,
        grid: Sequence[float],
        psi_dot: Optional[ScalarFn] = None,
    ) -> "FunnelBoundary":
        if c <= 0:
            raise ValueError(f"growth constant c must be positive, got {c}")
        grid = _check_grid(grid)
        if psi_dot is None:
            psi_dot = lambda t: float(central_difference(psi, t))  # noqa: E731
        values = np.array([psi(t) for t in grid])
        rates = np.array([abs(psi_dot(t)) for t in grid]) / values
        return cls(
            psi=psi,
            psi_dot=psi_dot,
            c=float(c),
            psi_inf=float(values.min()),
            psi_sup=float(values.max()),
            rate_sup=float(rates.max()),
        )


def exponential_funnel(scale: float, rate: float, floor: float, c: float, grid) -> FunnelBoundary:
    """``psi(t) = scale * exp(-rate * t) + floor`` with analytic derivative."""

    def psi(t):
        return scale * math.exp(-rate * t) + floor

    def psi_dot(t):
        return -rate * scale * math.exp(-rate * t)

    return FunnelBoundary.from_functions(psi, c, grid, psi_dot=psi_dot)


def constant_funnel(value: float, c: float, grid) -> FunnelBoundary:
    return FunnelBoundary.from_functions(lambda t: value, c, grid, psi_dot=lambda t: 0.0)


@dataclass(frozen=True)
class FunnelReport:
    valid: bool
    worst_ratio: float
    worst_ratio_time: float
    min_psi: float
    min_psi_time: float


def validate_funnel(boundary: FunnelBoundary, grid) -> FunnelReport:
    """Check positivity and ``|psi_dot| <= c * psi`` on a finite grid."""
    grid = _check_grid(grid)
    values = np.array([boundary.psi(t) for t in grid])
    derivs = np.array([boundary.psi_dot(t) for t in grid])
    i_min = int(np.argmin(values))
    min_psi = float(values[i_min])
    if min_psi <= 0:
        return FunnelReport(False, math.inf, float(grid[i_min]), min_psi, float(grid[i_min]))
    ratios = np.abs(derivs) / values
    i_worst = int(np.argmax(ratios))
    worst = float(ratios[i_worst])
    return FunnelReport(
        valid=bool(worst <= boundary.c),
        worst_ratio=worst,
        worst_ratio_time=float(grid[i_worst]),
        min_psi=min_psi,
        min_psi_time=float(grid[i_min]),
    )


def gronwall_envelope_holds(boundary: FunnelBoundary, grid, slack: float = 0.01) -> bool:
    """``psi(t) e^{-c d} <= psi(t+d) <= psi(t) e^{c d}`` for neighbouring grid points."""
    grid = _check_grid(grid)
    values = np.array([boundary.psi(t) for t in grid])
    growth = np.exp(boundary.c * np.diff(grid))
    lo = values[:-1] / growth * (1.0 - slack)
    hi = values[:-1] * growth * (1.0 + slack)
    nxt = values[1:]
    return bool(np.all(lo <= nxt) and np.all(nxt <= hi))


@dataclass(frozen=True)
class ReferenceSignal:
    """Reference ``y_r`` with derivative and sup-norm bounds over a grid."""

    y_r: VectorFn
    y_r_dot: VectorFn
    y_r_sup: float
    y_r_dot_sup: float
    m: int

    @classmethod
    def from_functions(cls, y_r: VectorFn, grid, y_r_dot: Optional[VectorFn] = None) -> "ReferenceSignal":
        grid = _check_grid(grid)
        if y_r_dot is None:
            y_r_dot = lambda t: central_difference(y_r, t)  # noqa: E731
        vals = np.array([y_r(t) for t in grid])
        dots = np.array([y_r_dot(t) for t in grid])
        return cls(
            y_r=y_r,
            y_r_dot=y_r_dot,
            y_r_sup=float(np.linalg.norm(vals, axis=1).max()),
            y_r_dot_sup=float(np.linalg.norm(dots, axis=1).max()),
            m=vals.shape[1],
        )

    def derivative_mismatch(self, grid, h: float = DEFAULT_FD_STEP) -> float:
        """Largest gap between ``y_r_dot`` and a central difference of ``y_r``."""
        grid = _check_grid(grid)
        return max(
            float(np.linalg.norm(self.y_r_dot(t) - central_difference(self.y_r, t, h)))
            for t in grid
        )


# Vessel benchmark reference: y_r(t) = [8 - 0.8 t, 4 cos(w t), atan(a sin(w t))]
USV_OMEGA = 3.0 * math.pi / 20.0
USV_AMPLITUDE = 3.0 * math.pi / 2.0


def _usv_y_r(t):
    s = math.sin(USV_OMEGA * t)
    return np.array([8.0 - 0.8 * t, 4.0 * math.cos(USV_OMEGA * t), math.atan(USV_AMPLITUDE * s)])


def _usv_y_r_dot(t):
    s = math.sin(USV_OMEGA * t)
    c = math.cos(USV_OMEGA * t)
    a, w = USV_AMPLITUDE, USV_OMEGA
    return np.array([-0.8, -4.0 * w * s, a * w * c / (1.0 + (a * s) ** 2)])


def usv_reference(grid) -> ReferenceSignal:
    return ReferenceSignal.from_functions(_usv_y_r, grid, y_r_dot=_usv_y_r_dot)


def circular_reference(radius: float, omega: float, grid) -> ReferenceSignal:
    """``y_r(t) = radius * [sin(omega t), cos(omega t)]``."""

    def y_r(t):
        return radius * np.array([math.sin(omega * t), math.cos(omega * t)])

    def y_r_dot(t):
        return radius * omega * np.array([math.cos(omega * t), -math.sin(omega * t)])

    return ReferenceSignal.from_functions(y_r, grid, y_r_dot=y_r_dot)


def constant_reference(value, grid) -> ReferenceSignal:
    value = np.asarray(value, dtype=float)
    zero = np.zeros_like(value)
    return ReferenceSignal.from_functions(lambda t: value.copy(), grid, y_r_dot=lambda t: zero.copy())


# -- barrier ---------------------------------------------------------------


def tracking_error(t: float, y, reference: ReferenceSignal) -> np.ndarray:
    return np.asarray(y, dtype=float) - reference.y_r(t)


def barrier_value(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal) -> float:
    e = tracking_error(t, y, reference)
    psi = boundary.psi(t)
    return 0.5 * (psi * psi - float(e @ e))


def barrier_gradient_output(t: float, y, reference: ReferenceSignal) -> np.ndarray:
    return -tracking_error(t, y, reference)


def barrier_time_derivative(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal) -> float:
    e = tracking_error(t, y, reference)
    return boundary.psi(t) * boundary.psi_dot(t) + float(e @ reference.y_r_dot(t))


@dataclass(frozen=True)
class BarrierPoint:
    t: float
    y: np.ndarray
    b: float
    grad_y: np.ndarray
    d_t: float
    error_norm_ratio: float


def barrier_point(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal) -> BarrierPoint:
    y = np.asarray(y, dtype=float)
    e = y - reference.y_r(t)
    psi = boundary.psi(t)
    return BarrierPoint(
        t=float(t),
        y=y,
        b=0.5 * (psi * psi - float(e @ e)),
        grad_y=-e,
        d_t=psi * boundary.psi_dot(t) + float(e @ reference.y_r_dot(t)),
        error_norm_ratio=float(np.linalg.norm(e)) / psi,
    )


class SafeSetClass(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def in_safe_set(
    t: float,
    y,
    boundary: FunnelBoundary,
    reference: ReferenceSignal,
    tol: float = DEFAULT_BOUNDARY_TOL,
) -> SafeSetClass:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    dist = float(np.linalg.norm(tracking_error(t, y, reference)))
    psi = boundary.psi(t)
    if dist < psi - tol:
        return SafeSetClass.INTERIOR
    if abs(dist - psi) <= tol:
        return SafeSetClass.BOUNDARY
    return SafeSetClass.EXTERIOR
