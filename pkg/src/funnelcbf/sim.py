"""Fixed-step closed-loop simulation, trajectory records and run metrics."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from funnelcbf.control import (
    CandidateControlSet,
    GainInterval,
    SetOrigin,
    candidate_set,
    funnel_feedback,
    safety_filter,
    saturated_candidate_set,
)
from funnelcbf.errors import DivergenceError, DomainError, MetricsError
from funnelcbf.funnel import FunnelBoundary, ReferenceSignal
from funnelcbf.plants import usv_input_reference

VIOLATION_GUARD = 1e-9

CONTROLLER_KINDS = ("funnel", "cbf-filter", "saturated-filter")
U_REF_SOURCES = ("zero", "usv_kinematic", "reference_derivative")


def rk4_step(derivative: Callable, t: float, x, h: float) -> np.ndarray:
    """One classic Runge-Kutta step; the derivative is re-evaluated at every stage."""
    if not h > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    k1 = derivative(t, x)
    k2 = derivative(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = derivative(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = derivative(t + h, x + h * k3)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise DivergenceError(f"non-finite stage derivative near t={t}")
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def input_reference_fn(source: str, reference: ReferenceSignal) -> Callable[[float], np.ndarray]:
    if source == "zero":
        zero = np.zeros(reference.m)
        return lambda t: zero
    if source == "usv_kinematic":
        return lambda t: usv_input_reference(t, reference)
    if source == "reference_derivative":
        return reference.y_r_dot
    raise ValueError(f"unknown input reference source {source!r}; known: {U_REF_SOURCES}")


@dataclass(frozen=True)
class ControllerSpec:
    kind: str
    gains: GainInterval
    k: Optional[float] = None
    delta: Optional[float] = None
    u_ref: str = "zero"

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "funnel":
            if self.k is None or self.k not in self.gains:
                raise ValueError(f"funnel gain {self.k} must lie in the gain interval")
        if self.kind == "saturated-filter" and not (self.delta and self.delta > 0):
            raise ValueError("saturated-filter needs delta > 0")
        if self.u_ref not in U_REF_SOURCES:
            raise ValueError(f"unknown input reference source {self.u_ref!r}")

    @property
    def interior(self) -> bool:
        return self.kind != "saturated-filter"


class Policy:
    """Output feedback ``u = mu(t, y)`` built from a controller spec."""

    def __init__(self, spec: ControllerSpec, boundary: FunnelBoundary, reference: ReferenceSignal):
        self.spec = spec
        self.boundary = boundary
        self.reference = reference
        self.u_ref = input_reference_fn(spec.u_ref, reference)

    def candidate(self, t, y):
        if self.spec.kind == "saturated-filter":
            return saturated_candidate_set(t, y, self.boundary, self.reference, self.spec.gains, self.spec.delta)
        return candidate_set(t, y, self.boundary, self.reference, self.spec.gains)

    def evaluate(self, t, y, e=None, b=None):
        """Return ``(u, k)`` at ``(t, y)``; ``e`` and ``b`` may be passed if already known."""
        if e is None:
            cset = self.candidate(t, y)
        else:
            cset = self._from_error(e, b)
        if self.spec.kind == "funnel":
            return funnel_feedback(cset, self.spec.k), self.spec.k
        u, k, _ = safety_filter(cset, self.u_ref(t))
        return u, k

    def _from_error(self, e, b):
        if self.spec.kind == "saturated-filter":
            return CandidateControlSet(-e, max(b, self.spec.delta), self.spec.gains, SetOrigin.SATURATED)
        if not b > 0:
            raise DomainError(f"candidate set undefined outside int(C) (b={b:.3e})")
        return CandidateControlSet(-e, b, self.spec.gains, SetOrigin.INTERIOR)

    def __call__(self, t, y):
        return self.evaluate(t, y)[0]


@dataclass
class SimConfig:
    plant: object
    boundary: FunnelBoundary
    reference: ReferenceSignal
    controller: ControllerSpec
    x0: np.ndarray
    t0: float = 0.0
    horizon: float = 10.0
    step: float = 1e-3
    substeps: int = 1
    seed: int = 0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if not (0 < self.step <= self.horizon):
            raise ValueError("need 0 < step <= horizon")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def grid(self) -> np.ndarray:
        n = int(round(self.horizon / self.step))
        return self.t0 + self.step * np.arange(n + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    barrier: np.ndarray
    ratio: np.ndarray
    gains: np.ndarray
    status: str = "completed"
    status_time: Optional[float] = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def __len__(self):
        return len(self.times)


class _Violation(Exception):
    def __init__(self, t):
        self.t = t


def simulate_closed_loop(config: SimConfig) -> Trajectory:
    plant, boundary, reference = config.plant, config.boundary, config.reference
    policy = Policy(config.controller, boundary, reference)
    interior = config.controller.interior
    grid = config.grid
    h_int = config.step / config.substeps

    def measure(t, x):
        y = plant.output(x)
        e = y - reference.y_r(t)
        psi = boundary.psi(t)
        ee = float(e @ e)
        return y, e, 0.5 * (psi * psi - ee), math.sqrt(ee) / psi

    def derivative(t, x):
        y, e, b, _ = measure(t, x)
        if interior and b <= VIOLATION_GUARD:
            raise _Violation(t)
        return plant.rhs(x, policy.evaluate(t, y, e, b)[0])

    _, _, b0, _ = measure(grid[0], config.x0)
    if interior and b0 <= 0:
        raise ValueError(
            f"initial output lies outside int(C) (b={b0:.3e}); use a saturated-filter controller"
        )

    rec_x, rec_y, rec_u, rec_b, rec_r, rec_k = [], [], [], [], [], []
    status, status_time = "completed", None
    x = config.x0.copy()
    for i, t in enumerate(grid):
        y, e, b, ratio = measure(t, x)
        if interior and b <= VIOLATION_GUARD:
            status, status_time = "violated", float(t)
            break
        u, k = policy.evaluate(t, y, e, b)
        rec_x.append(x)
        rec_y.append(y)
        rec_u.append(u)
        rec_b.append(b)
        rec_r.append(ratio)
        rec_k.append(k)
        if i == len(grid) - 1:
            break
        try:
            # fixed RK4 sub-steps inside each logged interval; near the funnel
            # boundary the 1/b gain makes the loop stiff for small k_min
            for j in range(config.substeps):
                x = rk4_step(derivative, t + j * h_int, x, h_int)
        except _Violation as v:
            status, status_time = "violated", float(v.t)
            break
        except DivergenceError:
            status, status_time = "diverged", float(t)
            break
        if not np.all(np.isfinite(x)):
            status, status_time = "diverged", float(grid[i + 1])
            break

    count = len(rec_x)
    return Trajectory(
        times=grid[:count].copy(),
        states=np.array(rec_x).reshape(count, plant.n),
        outputs=np.array(rec_y).reshape(count, plant.m),
        inputs=np.array(rec_u).reshape(count, plant.m),
        barrier=np.array(rec_b),
        ratio=np.array(rec_r),
        gains=np.array(rec_k, dtype=float),
        status=status,
        status_time=status_time,
    )


@dataclass(frozen=True)
class Metrics:
    min_b: float
    max_ratio: float
    input_mse: float
    sup_input_norm: float
    input_rate_sup: float  # max ||u(t_{i+1}) - u(t_i)|| / h, recorded only


def reference_inputs(trajectory: Trajectory, u_ref: Callable[[float], np.ndarray]) -> np.ndarray:
    return np.array([u_ref(t) for t in trajectory.times]).reshape(trajectory.inputs.shape)


def compute_metrics(trajectory: Trajectory, u_ref: Callable[[float], np.ndarray]) -> Metrics:
    if not trajectory.completed:
        raise MetricsError(
            f"metrics undefined for a {trajectory.status} run (t={trajectory.status_time})",
            status=trajectory.status,
        )
    diff = trajectory.inputs - reference_inputs(trajectory, u_ref)
    norms = np.linalg.norm(trajectory.inputs, axis=1)
    if len(trajectory) > 1:
        du = np.linalg.norm(np.diff(trajectory.inputs, axis=0), axis=1) / np.diff(trajectory.times)
        rate = float(du.max())
    else:
        rate = 0.0
    return Metrics(
        min_b=float(trajectory.barrier.min()),
        max_ratio=float(trajectory.ratio.max()),
        input_mse=float(np.mean(np.sum(diff * diff, axis=1))),
        sup_input_norm=float(norms.max()),
        input_rate_sup=rate,
    )


def compare_runs(a: Metrics, b: Metrics) -> float:
    """Relative input-MSE reduction of run ``b`` over baseline ``a``."""
    if not a.input_mse > 0:
        raise ValueError("reduction undefined for a zero baseline input MSE")
    return 1.0 - b.input_mse / a.input_mse


@dataclass
class RecoveryResult:
    trajectory: Trajectory
    entered_at: Optional[float]
    stays_interior: bool


def recovery_run(config: SimConfig) -> RecoveryResult:
    """Simulate a saturated-filter run and report when the safe set is entered."""
    if config.controller.kind != "saturated-filter":
        raise ValueError("recovery runs need a saturated-filter controller")
    traj = simulate_closed_loop(config)
    inside = traj.barrier > 0
    if not inside.any():
        return RecoveryResult(traj, None, False)
    first = int(np.argmax(inside))
    return RecoveryResult(traj, float(traj.times[first]), bool(inside[first:].all()))


# -- export -------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(trajectory: Trajectory) -> str:
    n = trajectory.states.shape[1]
    m = trajectory.outputs.shape[1]
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"y{i + 1}" for i in range(m)]
        + [f"u{i + 1}" for i in range(m)]
        + ["b", "ratio"]
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, t in enumerate(trajectory.times):
        row = [t, *trajectory.states[i], *trajectory.outputs[i], *trajectory.inputs[i], trajectory.barrier[i], trajectory.ratio[i]]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    atomic_write_text(path, trajectory_csv(trajectory))


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(header))
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("y"))
    return Trajectory(
        times=data[:, 0],
        states=data[:, 1 : 1 + n],
        outputs=data[:, 1 + n : 1 + n + m],
        inputs=data[:, 1 + n + m : 1 + n + 2 * m],
        barrier=data[:, -2],
        ratio=data[:, -1],
        gains=np.full(len(data), np.nan),
    )
