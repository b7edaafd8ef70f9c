"""Deterministic simulation harness: scenarios, network, adversaries, checkers."""

from .engine import EXIT_OK, EXIT_SCENARIO_REJECTED, EXIT_VERDICT_FAILED, RunResult, Simulation, run
from .scenario import NodeSpec, Scenario, ScenarioError, from_dict, load, resolve, shipped
from .trace import Trace

__all__ = [
    "EXIT_OK",
    "EXIT_SCENARIO_REJECTED",
    "EXIT_VERDICT_FAILED",
    "NodeSpec",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Simulation",
    "Trace",
    "from_dict",
    "load",
    "resolve",
    "run",
    "shipped",
]
