"""Scenario files: YAML documents describing one simulated run.

Schema version 1::

    schema: 1
    name: fig3
    K: 3                      # ticks per step, >= 2
    rho: 1/2                  # Byzantine bound, a fraction in (0, 1/2]
    horizon: 4                # number of steps
    seed: 7
    mode: sieve               # sieve | no-filter | naive-online
    dpow_backend: ideal       # or {merkle: {k: 4, leaves_per_weight: 8}}
    delivery_convention: k-minus-1
    bootstrap_delay: 0        # steps a bootstrapping node spends catching up
    violation_experiment: false
    workload: {every: 2}      # client batch cadence (steps)
    nodes:
      - {id: n1, role: correct, power: 1}
      - id: n3
        role: byzantine
        power: 3/2
        strategy: scripted    # see sim.adversary for the catalogue
        params: {...}
        activity: {inactive: [0, 1]}   # or {active: [...]}; default always active
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from ..oracle import CONVENTIONS, SPEC_CONVENTION

SCHEMA_VERSION = 1
MODES = ("sieve", "no-filter", "naive-online")
SCENARIO_DIR_ENV = "SIEVE_MMR_SCENARIOS"


class ScenarioError(ValueError):
    """The scenario file does not describe a valid run."""


@dataclass
class NodeSpec:
    id: str
    role: str
    power: Fraction
    active_steps: Optional[frozenset] = None  # None means always active
    strategy: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def byzantine(self) -> bool:
        return self.role == "byzantine"

    def is_active(self, step: int) -> bool:
        return self.active_steps is None or step in self.active_steps


@dataclass
class Scenario:
    name: str
    K: int
    rho: Fraction
    horizon: int
    seed: int
    nodes: List[NodeSpec]
    mode: str = "sieve"
    dpow_backend: Union[str, Dict[str, Any]] = "ideal"
    delivery_convention: str = SPEC_CONVENTION
    bootstrap_delay: int = 0
    violation_experiment: bool = False
    workload: Dict[str, Any] = field(default_factory=lambda: {"every": 2})

    @property
    def correct_nodes(self) -> List[NodeSpec]:
        return [n for n in self.nodes if not n.byzantine]

    @property
    def byzantine_nodes(self) -> List[NodeSpec]:
        return [n for n in self.nodes if n.byzantine]

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def demonstration(self) -> bool:
        """Runs whose verdicts are reported but not asserted."""
        return self.mode != "sieve" or self.violation_experiment

    def with_overrides(self, **kw) -> "Scenario":
        kw = {k: v for k, v in kw.items() if v is not None}
        out = replace(self, **kw)
        validate(out)
        return out

    def to_dict(self) -> Dict[str, Any]:
        nodes = []
        for n in self.nodes:
            d: Dict[str, Any] = {"id": n.id, "role": n.role, "power": str(n.power)}
            if n.active_steps is not None:
                d["activity"] = {"active": sorted(n.active_steps)}
            if n.strategy is not None:
                d["strategy"] = n.strategy
            if n.params:
                d["params"] = n.params
            nodes.append(d)
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "K": self.K,
            "rho": str(self.rho),
            "horizon": self.horizon,
            "seed": self.seed,
            "mode": self.mode,
            "dpow_backend": self.dpow_backend,
            "delivery_convention": self.delivery_convention,
            "bootstrap_delay": self.bootstrap_delay,
            "violation_experiment": self.violation_experiment,
            "workload": self.workload,
            "nodes": nodes,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _fraction(value, what: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"{what}: not a rational number: {value!r}") from exc


def _activity(raw, horizon: int, node_id: str) -> Optional[frozenset]:
    if raw is None or raw == "always":
        return None
    if isinstance(raw, dict):
        if "active" in raw:
            return frozenset(int(s) for s in raw["active"])
        if "inactive" in raw:
            off = {int(s) for s in raw["inactive"]}
            return frozenset(s for s in range(horizon) if s not in off)
    if isinstance(raw, list) and all(isinstance(b, bool) for b in raw):
        return frozenset(i for i, b in enumerate(raw) if b)
    raise ScenarioError(f"node {node_id}: unrecognised activity {raw!r}")


def from_dict(doc: Dict[str, Any]) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema version {schema}")
    try:
        horizon = int(doc["horizon"])
        nodes = []
        for raw in doc["nodes"]:
            nid = str(raw["id"])
            nodes.append(
                NodeSpec(
                    id=nid,
                    role=str(raw.get("role", "correct")),
                    power=_fraction(raw.get("power", 1), f"node {nid} power"),
                    active_steps=_activity(raw.get("activity"), horizon, nid),
                    strategy=raw.get("strategy"),
                    params=dict(raw.get("params") or {}),
                )
            )
        sc = Scenario(
            name=str(doc.get("name", "unnamed")),
            K=int(doc["K"]),
            rho=_fraction(doc["rho"], "rho"),
            horizon=horizon,
            seed=int(doc.get("seed", 0)),
            nodes=nodes,
            mode=str(doc.get("mode", "sieve")),
            dpow_backend=doc.get("dpow_backend", "ideal"),
            delivery_convention=str(doc.get("delivery_convention", SPEC_CONVENTION)),
            bootstrap_delay=int(doc.get("bootstrap_delay", 0)),
            violation_experiment=bool(doc.get("violation_experiment", False)),
            workload=dict(doc.get("workload") or {"every": 2}),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    from .adversary import STRATEGIES

    if sc.K < 2:
        raise ScenarioError("K must be at least 2")
    if not (0 < sc.rho <= Fraction(1, 2)):
        raise ScenarioError("rho must lie in (0, 1/2]")
    if sc.horizon < 1:
        raise ScenarioError("horizon must be positive")
    if sc.mode not in MODES:
        raise ScenarioError(f"unknown mode {sc.mode!r}")
    if sc.delivery_convention not in CONVENTIONS:
        raise ScenarioError(f"unknown delivery convention {sc.delivery_convention!r}")
    if sc.bootstrap_delay < 0:
        raise ScenarioError("bootstrap_delay must be non-negative")
    backend = sc.dpow_backend
    if not (backend == "ideal" or (isinstance(backend, dict) and set(backend) == {"merkle"})):
        raise ScenarioError(f"unknown dpow backend {backend!r}")
    ids = [n.id for n in sc.nodes]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate node ids")
    if not sc.correct_nodes:
        raise ScenarioError("at least one correct node is required")
    for n in sc.nodes:
        if n.role not in ("correct", "byzantine"):
            raise ScenarioError(f"node {n.id}: unknown role {n.role!r}")
        if n.power <= 0:
            raise ScenarioError(f"node {n.id}: power must be positive")
        if n.byzantine:
            if n.strategy not in STRATEGIES:
                raise ScenarioError(f"node {n.id}: unknown strategy {n.strategy!r}")
        else:
            if n.power.denominator != 1:
                raise ScenarioError(f"correct node {n.id}: power must be an integer")
            if n.strategy is not None:
                raise ScenarioError(f"correct node {n.id} cannot have a strategy")
    for s in range(sc.horizon):
        if not any(n.is_active(s) for n in sc.correct_nodes):
            raise ScenarioError(f"no correct node is active in step {s}")


def load(path: Union[str, os.PathLike]) -> Scenario:
    p = Path(path)
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{p}: parse error: {exc}") from exc
    return from_dict(doc)


def scenario_dir() -> Path:
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent.parent / "scenarios"


def resolve(name: Union[str, os.PathLike]) -> Path:
    """Find a scenario by path, with or without ``.yaml``, falling back to the scenario directory."""
    p = Path(name)
    for cand in (p, p.with_name(p.name + ".yaml")):
        if cand.is_file():
            return cand
    base = scenario_dir()
    for cand in (base / p.name, base / (p.name + ".yaml")):
        if cand.is_file():
            return cand
    raise ScenarioError(f"scenario {str(name)!r} not found (looked in {base})")


def shipped() -> List[str]:
    return sorted(p.stem for p in scenario_dir().glob("*.yaml"))
