"""Scenario-level drivers used by the command line."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from funnelcbf.errors import StructuralAssumptionError
from funnelcbf.plants import check_relative_degree_one, estimate_bounds
from funnelcbf.scenario import Scenario, ScenarioError
from funnelcbf.sim import (
    Metrics,
    RecoveryResult,
    Trajectory,
    compare_runs,
    compute_metrics,
    input_reference_fn,
    recovery_run,
    simulate_closed_loop,
)
from funnelcbf.verify import (
    alpha_from_bounds,
    invariance_check,
    endpoint_consistency_check,
    epsilon_details,
    input_norm_bound,
    witness_check,
    inclusion_check,
)


def _g(v) -> str:
    return format(float(v), ".10g")


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    metrics: Optional[Metrics]
    recovery: Optional[RecoveryResult] = None

    def summary(self) -> str:
        tr = self.trajectory
        lines = [
            f"scenario: {self.scenario.name}",
            f"controller: {self.scenario.controller.kind}",
            f"status: {tr.status}" + (f" at t={_g(tr.status_time)}" if tr.status_time is not None else ""),
            f"grid points: {len(tr)}",
        ]
        if self.metrics is not None:
            m = self.metrics
            lines += [
                f"min_b: {_g(m.min_b)}",
                f"max_ratio: {_g(m.max_ratio)}",
                f"input_mse: {_g(m.input_mse)}",
                f"sup_input_norm: {_g(m.sup_input_norm)}",
                f"input_rate_sup: {_g(m.input_rate_sup)}",
            ]
        if self.recovery is not None:
            at = self.recovery.entered_at
            lines += [
                f"entered_C_at: {'none' if at is None else _g(at)}",
                f"stays_interior: {str(self.recovery.stays_interior).lower()}",
            ]
        return "\n".join(lines) + "\n"


def run_scenario(scenario: Scenario) -> RunResult:
    if scenario.controller.kind == "saturated-filter":
        rec = recovery_run(scenario.sim)
        tr = rec.trajectory
    else:
        rec = None
        tr = simulate_closed_loop(scenario.sim)
    u_ref = input_reference_fn(scenario.controller.u_ref, scenario.reference)
    metrics = compute_metrics(tr, u_ref) if tr.completed else None
    return RunResult(scenario, tr, metrics, rec)


SHARED_FIELDS = ("plant", "funnel", "reference")


def check_comparable(a: Scenario, b: Scenario) -> None:
    for key in SHARED_FIELDS:
        if a.raw.get(key) != b.raw.get(key):
            raise ScenarioError(f"scenarios differ in shared field {key!r}")
    for attr in ("t0", "horizon", "step"):
        if getattr(a.sim, attr) != getattr(b.sim, attr):
            raise ScenarioError(f"scenarios differ in shared field 'sim.{attr}'")
    if a.controller.u_ref != b.controller.u_ref:
        raise ScenarioError("scenarios differ in shared field 'controller.u_ref'")


@dataclass
class CompareResult:
    a: RunResult
    b: RunResult
    reduction: Optional[float]

    def combined_csv(self) -> str:
        ta, tb = self.a.trajectory, self.b.trajectory
        n = min(len(ta), len(tb))
        m = ta.inputs.shape[1]
        u_ref = input_reference_fn(self.a.scenario.controller.u_ref, self.a.scenario.reference)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["t"]
            + [f"a_u{j + 1}" for j in range(m)]
            + [f"b_u{j + 1}" for j in range(m)]
            + [f"ur{j + 1}" for j in range(m)]
            + ["a_ratio", "b_ratio"]
        )
        for i in range(n):
            t = ta.times[i]
            row = [t, *ta.inputs[i], *tb.inputs[i], *u_ref(t), ta.ratio[i], tb.ratio[i]]
            w.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()


def compare_scenarios(a: Scenario, b: Scenario) -> CompareResult:
    check_comparable(a, b)
    ra, rb = run_scenario(a), run_scenario(b)
    reduction = None
    if ra.metrics is not None and rb.metrics is not None and ra.metrics.input_mse > 0:
        reduction = compare_runs(ra.metrics, rb.metrics)
    return CompareResult(ra, rb, reduction)


@dataclass
class VerifyResult:
    passed: bool
    failed_check: Optional[str]
    lines: list = field(default_factory=list)
    audit_rows: list = field(default_factory=list)
    audit_header: list = field(default_factory=list)

    def report(self) -> str:
        return "\n".join(self.lines) + "\n"

    def audit_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.audit_header)
        for row in self.audit_rows:
            w.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()


def verify_scenario(scenario: Scenario) -> VerifyResult:
    """Run the structural check, bound estimation and the sampled property checks."""
    cfg = scenario.verification
    seed = scenario.seed
    plant, boundary, reference = scenario.plant, scenario.boundary, scenario.reference
    gains = scenario.controller.gains
    span = scenario.horizon_span
    q_bar = scenario.q_bar()
    out = VerifyResult(passed=True, failed_check=None)
    out.audit_header = ["t"] + [f"y{j + 1}" for j in range(plant.m)] + [f"eta{j + 1}" for j in range(plant.n_eta)] + ["k", "margin"]
    say = out.lines.append

    def fail(check, msg):
        out.passed = False
        out.failed_check = out.failed_check or check
        say(f"FAIL {check}: {msg}")

    say(f"verification report: {scenario.name}")
    say(f"plant: {plant.label} (m={plant.m}, n_eta={plant.n_eta}); seed: {seed}")

    lower, upper = scenario.rd_box()
    rd = check_relative_degree_one(plant, int(cfg.get("rd_samples", 1000)), (lower, upper), seed=seed)
    say(f"[relative_degree_one] box lower={np.array2string(lower, precision=6)} upper={np.array2string(upper, precision=6)}")
    say(f"[relative_degree_one] samples={rd.samples} min_eigenvalue={_g(rd.min_eigenvalue)}")
    if not rd.passed:
        fail("relative_degree_one", "symmetric part of the input gain is not positive definite on the box")
        return out
    say("PASS relative_degree_one")

    try:
        bounds = estimate_bounds(
            plant, boundary, reference, q_bar,
            sample_count=int(cfg.get("bound_samples", 10_000)), seed=seed,
            domain=cfg.get("domain", "ball"), horizon=span,
        )
    except StructuralAssumptionError as exc:
        fail("estimate_bounds", str(exc))
        return out
    say(f"[estimate_bounds] domain={bounds.domain} q_bar={_g(q_bar)} f_bar={_g(bounds.f_bar)} g_underbar={_g(bounds.g_underbar)}")

    alpha = alpha_from_bounds(bounds, boundary, gains)
    say(f"[alpha_from_bounds] slope={_g(alpha.slope)}")

    n = int(cfg.get("samples", 10_000))
    inc = inclusion_check(plant, boundary, reference, gains, alpha, q_bar, n, seed, span, keep_rows=True)
    out.audit_rows = inc.rows
    say(f"[inclusion] samples={inc.samples} violations={inc.violations} worst_margin={_g(inc.worst_margin)}")
    if inc.violations:
        fail("inclusion", f"{inc.violations} samples violate the CBF inequality")
    else:
        say("PASS inclusion")
    disc = endpoint_consistency_check(plant, boundary, reference, gains, alpha, q_bar, min(n, 1000), seed + 1, span)
    say(f"[endpoint_consistency] discrepancies={disc}")
    if disc:
        fail("endpoint_consistency", f"{disc} samples pass at the endpoints but fail inside")

    wit = witness_check(plant, boundary, reference, q_bar, int(cfg.get("witness_samples", 1000)), seed + 2, span)
    say(f"[barrier_witness] samples={wit.samples} min_margin={_g(wit.min_margin)} threshold={_g(wit.threshold)} violations={wit.violations}")
    if wit.violations:
        fail("barrier_witness", f"{wit.violations} samples below c*psi_inf^2")
    else:
        say("PASS barrier_witness")

    if scenario.controller.interior:
        y0 = plant.output(scenario.sim.x0)
        e0_ratio = float(np.linalg.norm(y0 - reference.y_r(scenario.sim.t0))) / boundary.psi(scenario.sim.t0)
        eps = epsilon_details(bounds, boundary, reference, gains, e0_ratio)
        say(f"[epsilon_bound] R={_g(eps.ratio_constant)} eps_hat={_g(eps.eps_hat)} eps={_g(eps.eps)}")
        run = run_scenario(scenario)
        if not run.trajectory.completed:
            fail("invariance", f"closed-loop run {run.trajectory.status}")
        else:
            holds, max_ratio = invariance_check(run.trajectory, eps.eps)
            bound = input_norm_bound(gains, boundary, eps.eps)
            say(f"[invariance] max_ratio={_g(max_ratio)} holds={str(holds).lower()}")
            say(f"[input_bound] sup_input_norm={_g(run.metrics.sup_input_norm)} bound={_g(bound)}")
            if not holds:
                fail("invariance", "tracking error left the eps-funnel")
            elif run.metrics.sup_input_norm > bound + 1e-6:
                fail("input_bound", "input exceeded the invariance-derived bound")
            else:
                say("PASS invariance")
    else:
        say("[invariance] skipped: saturated controller is not valued in the interior candidate set")

    say("RESULT " + ("PASS" if out.passed else f"FAIL ({out.failed_check})"))
    return out
