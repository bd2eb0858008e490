"""Benchmark plants, structural checks and model-bound estimation.

Model knowledge lives here and is used only for verification and for the
desired input fed to the safety filter's cost; the feedback laws in
:mod:`funnelcbf.control` never touch it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm, qmc

from funnelcbf.errors import DomainError, StructuralAssumptionError
from funnelcbf.funnel import FunnelBoundary, ReferenceSignal, _usv_y_r, _usv_y_r_dot

F_SAFETY = 1.05
G_SAFETY = 0.95


@dataclass(frozen=True)
class NormalFormPlant:
    """``y' = f(y, eta) + g(y, eta) u``, ``eta' = q(y, eta)``; state ``x = (y, eta)``."""

    m: int
    n_eta: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    q: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = ""

    @property
    def n(self) -> int:
        return self.m + self.n_eta

    def split(self, x):
        x = np.asarray(x, dtype=float)
        return x[: self.m], x[self.m :]

    def output(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[: self.m]

    def rhs(self, x, u) -> np.ndarray:
        y, eta = self.split(x)
        ydot = self.f(y, eta) + self.g(y, eta) @ u
        if self.n_eta == 0:
            return ydot
        return np.concatenate([ydot, self.q(y, eta)])

    def input_gain(self, x) -> np.ndarray:
        y, eta = self.split(x)
        return self.g(y, eta)


@dataclass(frozen=True)
class FullPlant:
    """``x' = F(x) + G(x) u``, ``y = H(x)`` in original coordinates."""

    n: int
    m: int
    F: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    H_jac: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def output(self, x) -> np.ndarray:
        return self.H(np.asarray(x, dtype=float))

    def rhs(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.F(x) + self.G(x) @ u

    def input_gain(self, x) -> np.ndarray:
        """``L_G H (x) = H_jac(x) G(x)``."""
        x = np.asarray(x, dtype=float)
        return self.H_jac(x) @ self.G(x)


@dataclass(frozen=True)
class ModelBounds:
    f_bar: float
    g_underbar: float
    q_bar: float
    output_radius: float
    domain: str = "ball"
    raw_f_max: float = field(default=0.0, compare=False)
    raw_g_min: float = field(default=0.0, compare=False)


# -- unmanned surface vessel --------------------------------------------------


def _rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _usv_drift(x) -> np.ndarray:
    px, py = float(x[0]), float(x[1])
    if px == 0.0 and py == 0.0:
        raise DomainError("USV drift angle undefined at p_x = p_y = 0")
    theta = math.atan2(py, px)
    return np.array([-math.sin(theta), math.cos(theta), 0.0])


def usv_plant() -> FullPlant:
    """Planar vessel with a position-dependent unit drift; ``y = x = [p_x, p_y, phi]``."""
    return FullPlant(
        n=3,
        m=3,
        F=_usv_drift,
        G=lambda x: _rotation(float(x[2])),
        H=lambda x: np.array(x, dtype=float),
        H_jac=lambda x: np.eye(3),
        label="usv",
    )


def usv_normal_form() -> NormalFormPlant:
    # H is the identity, so the normal form is the plant itself with no internal state
    empty = np.zeros(0)
    return NormalFormPlant(
        m=3,
        n_eta=0,
        f=lambda y, eta: _usv_drift(y),
        g=lambda y, eta: _rotation(float(y[2])),
        q=lambda y, eta: empty,
        label="usv",
    )


def usv_input_reference(t: float, reference: Optional[ReferenceSignal] = None) -> np.ndarray:
    """Kinematic input reference ``G(y_r(t))^{-1} y_r'(t)``; the drift is left out."""
    if reference is None:
        y_r, y_r_dot = _usv_y_r(t), _usv_y_r_dot(t)
    else:
        y_r, y_r_dot = reference.y_r(t), reference.y_r_dot(t)
    return _rotation(float(y_r[2])).T @ y_r_dot


# -- synthetic plants -------------------------------------------------------------


def linear_demo_plant() -> NormalFormPlant:
    """Two outputs, one internal state with stable pole at -1."""
    eye = np.eye(2)
    return NormalFormPlant(
        m=2,
        n_eta=1,
        f=lambda y, eta: -y + 0.5 * eta[0],
        g=lambda y, eta: eye,
        q=lambda y, eta: np.array([-eta[0] + 0.5 * (y[0] + y[1])]),
        label="linear_demo",
    )


def linear_demo_q_bar(eta0, output_radius: float) -> float:
    """BIBS bound ``|eta(t)| <= max(|eta0|, sup ||y||)`` of the demo's internal dynamics."""
    return max(float(np.linalg.norm(np.atleast_1d(eta0))), float(output_radius))


def integrator_plant(m: int = 2) -> NormalFormPlant:
    zero = np.zeros(m)
    eye = np.eye(m)
    empty = np.zeros(0)
    return NormalFormPlant(
        m=m,
        n_eta=0,
        f=lambda y, eta: zero,
        g=lambda y, eta: eye,
        q=lambda y, eta: empty,
        label="integrator",
    )


PLANTS = {
    "usv": usv_normal_form,
    "linear_demo": linear_demo_plant,
    "integrator": integrator_plant,
}


def get_plant(label: str) -> NormalFormPlant:
    try:
        return PLANTS[label]()
    except KeyError:
        raise KeyError(f"unknown plant label {label!r}; known: {sorted(PLANTS)}") from None


# -- structural checks ----------------------------------------------------------


def sym_min_eig(M) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


@dataclass(frozen=True)
class RelativeDegreeReport:
    min_eigenvalue: float
    worst_state: np.ndarray
    samples: int

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue > 0


def check_relative_degree_one(plant, sample_count: int, box, seed: int = 0) -> RelativeDegreeReport:
    """Smallest eigenvalue of the symmetric part of the input gain over a box.

    ``box = (lower, upper)`` over the plant state. The box corners are always
    included; ``sample_count`` uniform points are added on top.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    lower, upper = (np.asarray(v, dtype=float) for v in box)
    rng = np.random.default_rng(seed)
    points = [np.array(c) for c in itertools.product(*zip(lower, upper))] if lower.size <= 10 else []
    points.extend(rng.uniform(lower, upper, size=(sample_count, lower.size)))
    worst, worst_x = math.inf, None
    for x in points:
        lam = sym_min_eig(plant.input_gain(x))
        if lam < worst:
            worst, worst_x = lam, x
    return RelativeDegreeReport(worst, worst_x, len(points))


def _halton(dim: int, count: int, seed: int) -> np.ndarray:
    pts = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
    return np.clip(pts, 1e-12, 1.0 - 1e-12)


def _ball_points(u_dir: np.ndarray, u_rad: np.ndarray, radius: float) -> np.ndarray:
    """Map unit-cube coordinates to points in a Euclidean ball of given radius."""
    dim = u_dir.shape[1]
    if dim == 0:
        return np.zeros((u_rad.size, 0))
    z = norm.ppf(u_dir)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * (radius * u_rad ** (1.0 / dim))[:, None]


def estimate_bounds(
    plant: NormalFormPlant,
    boundary: FunnelBoundary,
    reference: ReferenceSignal,
    q_bar: float,
    sample_count: int = 10_000,
    seed: int = 0,
    domain: str = "ball",
    horizon: Optional[tuple[float, float]] = None,
) -> ModelBounds:
    """Sampled ``f_bar`` (incl. the reference speed) and ``g_underbar``.

    ``domain="ball"`` samples ``||y|| <= psi_sup + y_r_sup``; ``domain="tube"``
    samples the safe set itself over ``horizon = (t0, t1)``, which is the only
    region the inclusion argument evaluates and is needed for plants whose
    input gain is definite on the tube but not on the whole ball.
    """
    if q_bar < 0:
        raise ValueError("q_bar must be non-negative")
    if sample_count < 1000:
        raise ValueError("sample_count must be >= 1000")
    m, n_eta = plant.m, plant.n_eta
    radius = boundary.psi_sup + reference.y_r_sup
    if domain == "ball":
        u = _halton(m + 1 + n_eta + 1, sample_count, seed)
        ys = _ball_points(u[:, :m], u[:, m], radius)
        off = m + 1
    elif domain == "tube":
        if horizon is None:
            raise ValueError("tube sampling needs a horizon")
        u = _halton(1 + m + 1 + n_eta + 1, sample_count, seed)
        ts = horizon[0] + (horizon[1] - horizon[0]) * u[:, 0]
        # radii scaled by psi(t) per sample below
        unit = _ball_points(u[:, 1 : 1 + m], u[:, 1 + m], 1.0)
        ys = np.array([reference.y_r(t) + boundary.psi(t) * d for t, d in zip(ts, unit)])
        off = m + 2
    else:
        raise ValueError(f"unknown sampling domain {domain!r}")
    etas = _ball_points(u[:, off : off + n_eta], u[:, off + n_eta], q_bar)

    f_max, g_min = 0.0, math.inf
    for y, eta in zip(ys, etas):
        f_max = max(f_max, float(np.linalg.norm(plant.f(y, eta))))
        g_min = min(g_min, sym_min_eig(plant.g(y, eta)))
    if g_min <= 0:
        raise StructuralAssumptionError(
            f"input gain not positive definite on the sampled domain (min eigenvalue {g_min:.3e})"
        )
    return ModelBounds(
        f_bar=F_SAFETY * (f_max + reference.y_r_dot_sup),
        g_underbar=G_SAFETY * g_min,
        q_bar=float(q_bar),
        output_radius=radius,
        domain=domain,
        raw_f_max=f_max,
        raw_g_min=g_min,
    )


def witness_input(plant: NormalFormPlant, t: float, y, eta, c: float, reference: ReferenceSignal) -> np.ndarray:
    """Model-based input ``g^{-1}(-max(2c, 1) e - f + y_r')`` certifying the barrier."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    e = y - reference.y_r(t)
    rhs = -max(2.0 * c, 1.0) * e - plant.f(y, eta) + reference.y_r_dot(t)
    try:
        return np.linalg.solve(plant.g(y, eta), rhs)
    except np.linalg.LinAlgError as exc:
        raise StructuralAssumptionError(f"input gain singular at y={y}, eta={eta}") from exc
