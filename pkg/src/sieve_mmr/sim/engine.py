"""The tick loop.

Per tick, active nodes are processed in ascending id order. Each reads the
network and its due DPoW responses, computes, and queues sends; queued sends
are released at the tick barrier, after which the oracle credits every
active node with one tick of work.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..core import ModelAssumptionError, SieveMessage
from ..mmr import MmrNode, MoreThanTwoMaximal, MultipleMaximalGrade1
from ..oracle import DpowOracle, OracleClient
from ..powlib import MerkleBackend
from ..sieve import SieveNode
from .adversary import STRATEGIES, Context
from .checks import Checker
from .metrics import LatencyTracker
from .network import Network
from .scenario import Scenario, ScenarioError
from .trace import Trace, short_id

EXIT_OK = 0
EXIT_VERDICT_FAILED = 1
EXIT_SCENARIO_REJECTED = 3


@dataclass
class RunResult:
    scenario: Scenario
    trace_digest: Optional[str]
    checker: Checker
    metrics: Dict[str, Any]
    filtered: Dict[str, Dict[int, Tuple[SieveMessage, ...]]]
    labels: Dict[bytes, str]
    origin: Dict[bytes, str]
    committed: Dict[str, Any]
    supremacy_violated: bool
    tracker: LatencyTracker = field(repr=False, default=None)

    @property
    def verdicts(self) -> Dict[str, str]:
        return {name: v.status for name, v in self.checker.verdicts.items()}

    @property
    def rejected(self) -> bool:
        return self.supremacy_violated and not self.scenario.violation_experiment

    @property
    def exit_code(self) -> int:
        if self.rejected:
            return EXIT_SCENARIO_REJECTED
        return EXIT_OK if self.checker.all_asserted_pass() else EXIT_VERDICT_FAILED

    def filtered_labels(self, node: str, step: int) -> List[str]:
        return sorted(self.labels.get(m.dpow, short_id(m.dpow)[:8]) for m in self.filtered[node].get(step, ()))

    def report(self) -> Dict[str, Any]:
        sc = self.scenario
        return {
            "scenario": sc.name,
            "scenario_digest": sc.digest(),
            "seed": sc.seed,
            "mode": sc.mode,
            "demonstration": sc.demonstration,
            "rejected": self.rejected,
            "exit_code": self.exit_code,
            "trace_digest": self.trace_digest,
            "verdicts": self.checker.to_dict(),
            "latency": self.metrics,
            "commits": self.committed,
        }

    def report_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True, indent=2)

    def report_digest(self) -> str:
        return hashlib.sha256(json.dumps(self.report(), sort_keys=True).encode()).hexdigest()


def _make_oracle(sc: Scenario) -> DpowOracle:
    if sc.dpow_backend == "ideal":
        return DpowOracle(sc.K, sc.seed, sc.delivery_convention)
    params = sc.dpow_backend["merkle"] or {}
    backend = MerkleBackend(int(params.get("k", 4)), int(params.get("leaves_per_weight", 8)))
    return DpowOracle(sc.K, sc.seed, sc.delivery_convention, backend=backend.evaluate, backend_verify=backend.check)


class Simulation:
    def __init__(self, scenario: Scenario, trace: Optional[Trace] = None):
        self.sc = scenario
        self.trace = trace if trace is not None else Trace(enabled=False)
        self.oracle = _make_oracle(scenario)
        self.network = Network(n.id for n in scenario.correct_nodes)
        self.nodes = sorted(scenario.nodes, key=lambda n: n.id)
        self.origin: Dict[bytes, str] = {}
        self.labels: Dict[bytes, str] = {}
        self.sent: Dict[bytes, SieveMessage] = {}
        self.known: Dict[bytes, SieveMessage] = {}
        self._log_pos = 0
        self.tick = 0
        correct_power = {n.id: int(n.power) for n in scenario.correct_nodes}
        self.checker = Checker(scenario, self.oracle, correct_power)
        self.tracker = LatencyTracker(
            scenario.horizon, [n.id for n in scenario.correct_nodes], lambda nid, s: scenario.node(nid).is_active(s)
        )
        self.sieves: Dict[str, SieveNode] = {}
        self.mmrs: Dict[str, MmrNode] = {}
        self.agents: Dict[str, Any] = {}
        coalition: Dict[str, Any] = {}
        for spec in self.nodes:
            self.oracle.register(spec.id, spec.power, spec.byzantine)
            client = OracleClient(self.oracle, spec.id)
            if spec.byzantine:
                try:
                    self.agents[spec.id] = STRATEGIES[spec.strategy](spec, scenario, client, scenario.seed, coalition)
                except ValueError as exc:
                    raise ScenarioError(str(exc)) from exc
            else:
                self.mmrs[spec.id] = MmrNode(spec.id, scenario.seed)
                self.sieves[spec.id] = SieveNode(
                    spec.id,
                    int(spec.power),
                    scenario.K,
                    scenario.rho,
                    client,
                    self._deliver_hook(spec.id),
                    seed=scenario.seed,
                    policy=scenario.mode,
                    bootstrap_delay=scenario.bootstrap_delay,
                )

    # -- upcalls ---------------------------------------------------------

    def _deliver_hook(self, node: str):
        def deliver(s: int, filtered):
            sieve = self.sieves[node]
            self.trace.emit(self.tick, node, "ttrb-deliver", step=s, messages=[short_id(m.dpow) for m in filtered])
            self.checker.on_deliver(node, s, filtered, {i for i, t in sieve.received_at.items() if t <= self.tick})
            triples = [(m.payload, m.dpow, m.weight) for m in filtered]
            try:
                out = self.mmrs[node].on_ttrb_deliver(s, triples)
            except MultipleMaximalGrade1:
                self.checker.on_grade_assertion("grade1-unique", False, node, s)
                raise
            except MoreThanTwoMaximal:
                self.checker.on_grade_assertion("grade0-at-most-two", False, node, s)
                raise
            if s > 0:
                self.checker.on_grade_assertion("grade1-unique", True, node, s)
                self.checker.on_grade_assertion("grade0-at-most-two", True, node, s)
            if out.message.proposal is not None:
                self.tracker.on_proposal(node, s, out.message.proposal)
            if s % 2 == 1:
                self.tracker.on_leader(node, s, out.leader)
                self.trace.emit(self.tick, node, "leader", step=s, leader=None if out.leader is None else short_id(out.leader))
            if out.committed is not None:
                self.tracker.on_commit(node, s, out.committed)
                self.checker.on_commit(node, s, out.committed)
                self.trace.emit(
                    self.tick, node, "commit", step=s, length=len(out.committed),
                    tip=None if out.committed.tip is None else out.committed.tip.hex(),
                )
            return out.message.encode()

        return deliver

    # -- loop ------------------------------------------------------------

    def _active_correct(self, s: int) -> List[str]:
        return [n.id for n in self.sc.correct_nodes if n.is_active(s)]

    def _submit_workload(self, s: int) -> None:
        every = int(self.sc.workload.get("every", 2))
        if every <= 0 or s % every:
            return
        batch = (f"client:{s}",)
        self.tracker.on_submit(batch, s)
        for mmr in self.mmrs.values():
            mmr.submit(batch)

    def _refresh_known(self, t: int) -> None:
        log = self.network.log
        while self._log_pos < len(log) and log[self._log_pos][0] <= t:
            m = log[self._log_pos][1]
            self.known.setdefault(m.dpow, m)
            self._log_pos += 1

    def _release(self, t: int, sender: str, msg: SieveMessage, targets: Optional[List[str]], byzantine: bool) -> None:
        prior = self.sent.get(msg.dpow)
        if prior is not None and prior != msg:
            self.trace.emit(t, sender, "rejected-send", message=short_id(msg.dpow), reason="dpow reused")
            return
        if prior is None:
            self.sent[msg.dpow] = msg
            self.origin[msg.dpow] = sender
            self.labels.setdefault(msg.dpow, f"{sender}@{msg.timestamp}")
        self.trace.emit(
            t, sender, "send", message=short_id(msg.dpow), timestamp=msg.timestamp, weight=msg.weight,
            coffer=sorted(short_id(c) for c in msg.coffer), to=targets if targets is not None else "all",
        )
        if byzantine:
            self.network.send_byzantine(msg, t, targets)
        else:
            self.checker.on_correct_cast(sender, msg)
            self.network.broadcast(msg, t)

    def step_tick(self, t: int) -> None:
        self.tick = t
        K = self.sc.K
        s = t // K
        if t % K == 0:
            self._submit_workload(s)
        self._refresh_known(t)
        active = [spec for spec in self.nodes if spec.is_active(s)]
        outbox: List[Tuple[str, SieveMessage, Optional[List[str]], bool]] = []
        for spec in active:
            responses = self.oracle.deliver_due(spec.id, t)
            for dpow, _, w in responses:
                self.trace.emit(t, spec.id, "dpow-deliver", dpow=short_id(dpow), weight=w)
            if spec.byzantine:
                ctx = Context(t, s, K, self.sc.horizon, self.known, self.origin,
                              [n.id for n in self.sc.correct_nodes], self._active_correct)
                agent = self.agents[spec.id]
                had_pending = self.oracle.has_pending(spec.id)
                agent.on_tick(ctx, responses)
                if not had_pending and self.oracle.has_pending(spec.id):
                    self.trace.emit(t, spec.id, "dpow-request", weight=self.oracle.history[-1].weight)
                outbox.extend((spec.id, m, to, True) for m, to in ctx.sends)
            else:
                incoming = self.network.collect(spec.id, t)
                if incoming:
                    self.trace.emit(t, spec.id, "receive", messages=[short_id(m.dpow) for m in incoming])
                had_pending = self.oracle.has_pending(spec.id)
                for m in self.sieves[spec.id].upon_new_tick(t, incoming, responses):
                    outbox.append((spec.id, m, None, False))
                if not had_pending and self.oracle.has_pending(spec.id):
                    self.trace.emit(t, spec.id, "dpow-request", weight=self.oracle.history[-1].weight)
        for sender, msg, to, byz in outbox:
            self._release(t, sender, msg, to, byz)
        self.oracle.accrue(spec.id for spec in active)

    def run(self) -> RunResult:
        for t in range(self.sc.horizon * self.sc.K):
            self.step_tick(t)
        failure = self.checker.finalize()
        for name, v in self.checker.verdicts.items():
            self.trace.emit(self.tick, "-", "checker-verdict", invariant=name, status=v.status)
        for agent in self.agents.values():
            for label, ev in getattr(agent, "by_label", {}).items():
                self.labels[ev.dpow] = label
        correct_origin = {i for i, n in self.origin.items() if not self.sc.node(n).byzantine}
        metrics = self.tracker.summary(lambda d: d in correct_origin)
        committed = {
            nid: {"length": len(m.committed), "tip": None if m.committed.tip is None else m.committed.tip.hex()}
            for nid, m in sorted(self.mmrs.items())
        }
        filtered = {nid: dict(sv.deliveries) for nid, sv in self.sieves.items()}
        return RunResult(
            scenario=self.sc,
            trace_digest=self.trace.digest(),
            checker=self.checker,
            metrics=metrics,
            filtered=filtered,
            labels=self.labels,
            origin=self.origin,
            committed=committed,
            supremacy_violated=failure is not None,
            tracker=self.tracker,
        )


def run(scenario: Scenario, trace: Optional[Trace] = None) -> RunResult:
    return Simulation(scenario, trace).run()
