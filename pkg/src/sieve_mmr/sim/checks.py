"""Invariant checkers fed by the engine as the run progresses.

Each invariant yields a verdict: ``pass``, ``fail`` or ``na`` (never
exercised), the first failure location and counts. Whether a verdict is
asserted (counts toward the exit status) depends on the run: nothing is
asserted in demonstration modes and violation experiments, and the
MMR-level guarantees are only asserted for rho <= 1/3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

from ..core import EMPTY_CHAIN, Chain, SieveMessage, are_compatible, exceeds_fraction
from ..oracle import DpowOracle, audit_correct_supremacy

VERDICT_NAMES = (
    "TTRB1",
    "TTRB2",
    "SI1",
    "SI2",
    "supremacy-in-filtered",
    "MMR1",
    "MMR2",
    "grade1-unique",
    "grade0-at-most-two",
    "commit-consistency",
    "commit-monotonicity",
    "correct-supremacy",
)


@dataclass
class Verdict:
    name: str
    asserted: bool
    checks: int = 0
    failures: int = 0
    first_failure: Optional[Dict[str, Any]] = None

    @property
    def status(self) -> str:
        if self.failures:
            return "fail"
        return "pass" if self.checks else "na"

    def record(self, ok: bool, **where) -> None:
        self.checks += 1
        if not ok:
            self.failures += 1
            if self.first_failure is None:
                self.first_failure = where

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "asserted": self.asserted,
            "checks": self.checks,
            "failures": self.failures,
            "first_failure": self.first_failure,
        }


class Checker:
    def __init__(self, scenario, oracle: DpowOracle, correct_power: Dict[str, int]):
        self.sc = scenario
        self.oracle = oracle
        self.correct_power = correct_power
        strong = self.strong = scenario.rho <= Fraction(1, 3)
        demo = scenario.demonstration
        self.verdicts: Dict[str, Verdict] = {}
        for name in VERDICT_NAMES:
            asserted = not demo
            if name in ("MMR1", "commit-consistency"):
                asserted = asserted and strong
            self.verdicts[name] = Verdict(name, asserted)
        self.casts: Dict[int, List[SieveMessage]] = {}
        self.cast_origin: Dict[bytes, str] = {}
        self.longest: Chain = EMPTY_CHAIN
        self.node_longest: Dict[str, Chain] = {}

    def v(self, name: str) -> Verdict:
        return self.verdicts[name]

    def on_correct_cast(self, node: str, msg: SieveMessage) -> None:
        self.casts.setdefault(msg.timestamp, []).append(msg)
        self.cast_origin[msg.dpow] = node

    def on_deliver(self, node: str, s: int, filtered, received_ids) -> None:
        ids = {m.dpow for m in filtered}
        total = sum(m.weight for m in filtered)
        for m in filtered:
            gen = self.oracle.generation_step_of(m.dpow)
            valid = self.oracle.verify(m.dpow, m.gamma, m.weight)
            self.v("TTRB1").record(valid and gen == s - 1 and m.timestamp == s - 1, node=node, step=s, message=m.dpow[:8].hex())
            self.v("SI1").record(gen == m.timestamp, node=node, step=s, message=m.dpow[:8].hex())
        correct_prev = self.casts.get(s - 1, [])
        for m in correct_prev:
            ok = m.dpow in ids and m.weight == self.correct_power[self.cast_origin[m.dpow]]
            self.v("TTRB2").record(ok, node=node, step=s, missing=m.dpow[:8].hex(), sender=self.cast_origin[m.dpow])
            self.v("MMR2").record(ok, node=node, step=s, missing=m.dpow[:8].hex(), sender=self.cast_origin[m.dpow])
            if m.dpow in received_ids:
                self.v("SI2").record(m.dpow in ids, node=node, step=s, missing=m.dpow[:8].hex())
        if s >= 1 and total > 0:
            correct_w = sum(m.weight for m in filtered if m.dpow in self.cast_origin)
            self.v("supremacy-in-filtered").record(
                exceeds_fraction(correct_w, total, 1 - self.sc.rho), node=node, step=s, correct=correct_w, total=total
            )
            if self.strong:
                # the 2/3 bound is what TTRB yields at rho = 1/3; not applicable above that
                self.v("MMR1").record(
                    exceeds_fraction(correct_w, total, Fraction(2, 3)), node=node, step=s, correct=correct_w, total=total
                )

    def on_grade_assertion(self, name: str, ok: bool, node: str, s: int) -> None:
        self.v(name).record(ok, node=node, step=s)

    def on_commit(self, node: str, s: int, chain: Chain) -> None:
        mine = self.node_longest.get(node, EMPTY_CHAIN)
        self.v("commit-monotonicity").record(are_compatible(mine, chain), node=node, step=s)
        if len(chain) > len(mine) and mine.is_prefix_of(chain):
            self.node_longest[node] = chain
        ok = are_compatible(self.longest, chain)
        self.v("commit-consistency").record(ok, node=node, step=s, length=len(chain))
        if ok and len(chain) > len(self.longest):
            self.longest = chain

    def finalize(self) -> Optional[Any]:
        failure = audit_correct_supremacy(self.oracle.history, self.sc.K, self.sc.rho, self.sc.horizon)
        where = None
        if failure is not None:
            where = {
                "interval": [failure.first_step, failure.last_step],
                "byzantine_weight": failure.byzantine_weight,
                "total_weight": failure.total_weight,
            }
        v = self.v("correct-supremacy")
        v.checks += 1
        if failure is not None:
            v.failures += 1
            v.first_failure = where
        return failure

    def all_asserted_pass(self) -> bool:
        return all(v.status != "fail" for v in self.verdicts.values() if v.asserted)

    def to_dict(self) -> Dict[str, Any]:
        return {name: self.verdicts[name].to_dict() for name in VERDICT_NAMES}
