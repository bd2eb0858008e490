"""Scenario files: JSON documents naming a plant, funnel, reference and controller.

Schema (all keys except ``name`` and ``plant`` have defaults)::

    {
      "name": "usv_cbf",
      "plant": "usv" | "linear_demo" | "integrator",
      "funnel": {"form": "exponential", "scale": 1.3, "rate": 2.0, "floor": 0.2, "c": 2.0}
              | {"form": "constant", "value": 1.0, "c": 0.1},
      "reference": {"form": "usv"} | {"form": "circle", "radius": 0.5, "omega": 1.0}
                 | {"form": "constant", "value": [0.0, 0.0]},
      "controller": {"type": "funnel" | "cbf-filter" | "saturated-filter",
                     "gains": [k_min, k_max], "k": 1.0, "delta": 0.05,
                     "u_ref": "zero" | "usv_kinematic" | "reference_derivative"},
      "sim": {"t0": 0.0, "horizon": 10.0, "step": 0.001, "substeps": 1, "x0": [...]},
      "verification": {"samples": 10000, "witness_samples": 1000, "bound_samples": 10000,
                       "rd_samples": 1000, "domain": "ball" | "tube", "q_bar": null,
                       "rd_box": {"lower": [...], "upper": [...]}},
      "seed": 0,
      "output_dir": "out/usv_cbf"
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from funnelcbf.control import GainInterval
from funnelcbf.funnel import (
    FunnelBoundary,
    ReferenceSignal,
    circular_reference,
    constant_funnel,
    constant_reference,
    default_grid,
    exponential_funnel,
    usv_reference,
    validate_funnel,
)
from funnelcbf.plants import PLANTS, get_plant, linear_demo_q_bar
from funnelcbf.sim import ControllerSpec, SimConfig

VALIDATION_STEP = 1e-2


class ScenarioError(ValueError):
    """The scenario file is malformed or refers to unknown labels."""


@dataclass
class Scenario:
    name: str
    raw: dict
    plant: Any
    boundary: FunnelBoundary
    reference: ReferenceSignal
    controller: ControllerSpec
    sim: SimConfig
    verification: dict
    seed: int
    output_dir: Path

    @property
    def horizon_span(self) -> tuple[float, float]:
        return self.sim.t0, self.sim.t0 + self.sim.horizon

    def q_bar(self) -> float:
        q = self.verification.get("q_bar")
        if q is not None:
            return float(q)
        if self.plant.n_eta == 0:
            return 0.0
        if self.plant.label == "linear_demo":
            _, eta0 = self.plant.split(self.sim.x0)
            return linear_demo_q_bar(eta0, self.boundary.psi_sup + self.reference.y_r_sup)
        raise ScenarioError("verification.q_bar is required for this plant")

    def rd_box(self):
        box = self.verification.get("rd_box")
        if box is not None:
            return np.asarray(box["lower"], dtype=float), np.asarray(box["upper"], dtype=float)
        # coordinate-wise envelope of the safe set over the horizon, plus the internal ball
        grid = default_grid(self.sim.t0, self.sim.horizon, VALIDATION_STEP)
        y_r = np.array([self.reference.y_r(t) for t in grid])
        psi = np.array([self.boundary.psi(t) for t in grid])[:, None]
        q = self.q_bar()
        n_eta = self.plant.n_eta
        lower = np.concatenate([(y_r - psi).min(axis=0), -q * np.ones(n_eta)])
        upper = np.concatenate([(y_r + psi).max(axis=0), q * np.ones(n_eta)])
        return lower, upper


def _require(cond, msg):
    if not cond:
        raise ScenarioError(msg)


def build_boundary(spec: dict, grid) -> FunnelBoundary:
    form = spec.get("form", "exponential")
    try:
        if form == "exponential":
            return exponential_funnel(float(spec["scale"]), float(spec["rate"]), float(spec["floor"]), float(spec["c"]), grid)
        if form == "constant":
            return constant_funnel(float(spec["value"]), float(spec["c"]), grid)
    except KeyError as exc:
        raise ScenarioError(f"funnel spec missing field {exc.args[0]!r}") from None
    raise ScenarioError(f"unknown funnel form {form!r}")


def build_reference(spec: dict, grid) -> ReferenceSignal:
    form = spec.get("form")
    try:
        if form == "usv":
            return usv_reference(grid)
        if form == "circle":
            return circular_reference(float(spec["radius"]), float(spec["omega"]), grid)
        if form == "constant":
            return constant_reference(spec["value"], grid)
    except KeyError as exc:
        raise ScenarioError(f"reference spec missing field {exc.args[0]!r}") from None
    raise ScenarioError(f"unknown reference form {form!r}")


def build_controller(spec: dict) -> ControllerSpec:
    try:
        kind = spec["type"]
        gains = spec.get("gains")
        if gains is None and kind == "funnel":
            gains = [spec["k"], spec["k"]]
        return ControllerSpec(
            kind=kind,
            gains=GainInterval(float(gains[0]), float(gains[1])),
            k=None if spec.get("k") is None else float(spec["k"]),
            delta=None if spec.get("delta") is None else float(spec["delta"]),
            u_ref=spec.get("u_ref", "zero"),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ScenarioError(f"malformed controller spec: {exc}") from None
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def _apply_overrides(raw: dict, overrides: Optional[dict]) -> dict:
    raw = copy.deepcopy(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("step", "horizon"):
            raw.setdefault("sim", {})[key] = value
        elif key == "seed":
            raw["seed"] = value
        elif key == "out_dir":
            raw["output_dir"] = value
        else:
            raise ScenarioError(f"unknown override {key!r}")
    return raw


def scenario_from_dict(raw: dict, overrides: Optional[dict] = None, base_dir: Optional[Path] = None) -> Scenario:
    raw = _apply_overrides(raw, overrides)
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    name = raw.get("name")
    _require(isinstance(name, str) and name, "scenario needs a non-empty 'name'")
    label = raw.get("plant")
    _require(label in PLANTS, f"unknown plant label {label!r}; known: {sorted(PLANTS)}")
    plant = get_plant(label)

    sim_raw = raw.get("sim", {})
    t0 = float(sim_raw.get("t0", 0.0))
    horizon = float(sim_raw.get("horizon", 10.0))
    step = float(sim_raw.get("step", 1e-3))
    _require(horizon > 0 and 0 < step <= horizon, "sim needs 0 < step <= horizon")
    grid = default_grid(t0, horizon, VALIDATION_STEP)

    boundary = build_boundary(raw.get("funnel", {}), grid)
    report = validate_funnel(boundary, grid)
    _require(
        report.valid,
        f"funnel fails validation: max |psi_dot|/psi = {report.worst_ratio:.6g} at t={report.worst_ratio_time:g} "
        f"exceeds c = {boundary.c:g}" if report.min_psi > 0 else "funnel fails validation: psi not positive",
    )
    reference = build_reference(raw.get("reference", {}), grid)
    _require(reference.m == plant.m, f"reference dimension {reference.m} != plant output dimension {plant.m}")

    controller = build_controller(raw.get("controller", {}))
    x0 = sim_raw.get("x0")
    _require(x0 is not None and len(x0) == plant.n, f"sim.x0 must have length {plant.n}")
    sim = SimConfig(
        plant=plant,
        boundary=boundary,
        reference=reference,
        controller=controller,
        x0=np.asarray(x0, dtype=float),
        t0=t0,
        horizon=horizon,
        step=step,
        substeps=int(sim_raw.get("substeps", 1)),
        seed=int(raw.get("seed", 0)),
    )
    out = Path(raw.get("output_dir", f"out/{name}"))
    return Scenario(
        name=name,
        raw=raw,
        plant=plant,
        boundary=boundary,
        reference=reference,
        controller=controller,
        sim=sim,
        verification=dict(raw.get("verification", {})),
        seed=int(raw.get("seed", 0)),
        output_dir=out,
    )


def load_scenario(path, overrides: Optional[dict] = None) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from None
    return scenario_from_dict(raw, overrides)
