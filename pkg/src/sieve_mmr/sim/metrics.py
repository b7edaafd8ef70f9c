"""Commit-latency bookkeeping.

Two latency notions are tracked for correct blocks:

* block latency: from the step a client batch is submitted to the first
  commit step at which every active correct node has it committed;
* proposal latency: for each proposal step ``s``, the first commit step at
  which every active correct node has committed some correct block first
  proposed at step ``s`` or later, minus ``s``. A proposal step whose
  latency is exactly 3 counts as a leader success.
"""

from __future__ import annotations

import statistics
from typing import Any, Callable, Dict, List, Optional, Sequence

from ..core import Chain


def summarize(values: Sequence[float]) -> Dict[str, Any]:
    if not values:
        return {"count": 0, "no_commits": True}
    vals = sorted(values)

    def pct(p: float) -> float:
        return vals[min(len(vals) - 1, int(round(p * (len(vals) - 1))))]

    return {
        "count": len(vals),
        "min": vals[0],
        "mean": statistics.fmean(vals),
        "p50": pct(0.5),
        "p90": pct(0.9),
        "max": vals[-1],
    }


class LatencyTracker:
    def __init__(self, horizon: int, correct_ids: Sequence[str], is_active: Callable[[str, int], bool]):
        self.horizon = horizon
        self.correct_ids = list(correct_ids)
        self.is_active = is_active
        self.submitted: Dict[tuple, int] = {}
        self.first_proposed: Dict[bytes, int] = {}
        self.correct_batches: set = set()
        # node -> list of (step, committed chain) for commit steps
        self.commits: Dict[str, List[tuple]] = {n: [] for n in self.correct_ids}
        self.leaders: Dict[int, Dict[str, Optional[bytes]]] = {}

    def on_submit(self, batch: tuple, step: int) -> None:
        self.submitted.setdefault(batch, step)
        self.correct_batches.add(batch)

    def on_proposal(self, node: str, step: int, chain: Chain) -> None:
        if chain.blocks:
            tip = chain.blocks[-1]
            if tip.transactions[0].startswith("filler:" + node + ":"):
                self.correct_batches.add(tip.transactions)
            self.first_proposed.setdefault(tip.digest, step)

    def on_commit(self, node: str, step: int, chain: Chain) -> None:
        self.commits[node].append((step, chain))

    def on_leader(self, node: str, step: int, leader: Optional[bytes]) -> None:
        self.leaders.setdefault(step, {})[node] = leader

    def _longest_by(self, node: str, step: int) -> Chain:
        best = Chain()
        for s, chain in self.commits[node]:
            if s > step:
                break
            if len(chain) > len(best):
                best = chain
        return best

    def _all_active_satisfy(self, c: int, pred: Callable[[Chain], bool]) -> bool:
        active = [n for n in self.correct_ids if self.is_active(n, c)]
        return bool(active) and all(pred(self._longest_by(n, c)) for n in active)

    def block_latencies(self) -> Dict[tuple, Optional[int]]:
        out: Dict[tuple, Optional[int]] = {}
        for batch, s in sorted(self.submitted.items(), key=lambda kv: kv[1]):
            out[batch] = None
            for c in range(s + 1, self.horizon):
                if c % 2 == 1 and self._all_active_satisfy(c, lambda ch: ch.contains_transactions(batch)):
                    out[batch] = c - s
                    break
        return out

    def proposal_latencies(self) -> Dict[int, Optional[int]]:
        out: Dict[int, Optional[int]] = {}
        for s in range(0, self.horizon, 2):
            out[s] = None

            def fresh(chain: Chain, s=s) -> bool:
                return any(
                    b.transactions in self.correct_batches and self.first_proposed.get(b.digest, -1) >= s
                    for b in chain.blocks
                )

            for c in range(s + 1, self.horizon):
                if c % 2 == 1 and self._all_active_satisfy(c, fresh):
                    out[s] = c - s
                    break
        return out

    def leader_agreement(self, origin_correct: Callable[[bytes], bool]) -> Dict[str, int]:
        agree = total = 0
        for step, by_node in self.leaders.items():
            total += 1
            vals = set(by_node.values())
            if len(vals) == 1:
                (leader,) = vals
                if leader is not None and origin_correct(leader):
                    agree += 1
        return {"steps": total, "agreed_correct": agree}

    def summary(self, origin_correct: Callable[[bytes], bool]) -> Dict[str, Any]:
        blocks = self.block_latencies()
        props = self.proposal_latencies()
        measured = [v for v in props.values() if v is not None]
        trials = [s for s in props if s + 3 < self.horizon]
        return {
            "block_latency": summarize([v for v in blocks.values() if v is not None]),
            "blocks_uncommitted": sum(1 for v in blocks.values() if v is None),
            "proposal_latency": summarize(measured),
            "leader_success": sum(1 for s in trials if props[s] == 3),
            "leader_trials": len(trials),
            "leader_agreement": self.leader_agreement(origin_correct),
        }
