"""MMR total-order broadcast on top of TTRB deliveries.

Even steps propose, odd steps commit. A vote for a chain counts for all of
its prefixes. Grade 0 means more than 1/3 of the delivered weight, grade 1
more than 2/3. Leaders are picked by the largest hash token, each message of
weight ``w`` owning ``w`` tokens.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import EMPTY_CHAIN, Chain, ModelAssumptionError


class MultipleMaximalGrade1(ModelAssumptionError):
    pass


class MoreThanTwoMaximal(ModelAssumptionError):
    pass


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------


def _chain_to_obj(chain: Chain) -> list:
    return [[list(b.transactions), b.submitter] for b in chain.blocks]


def _chain_from_obj(obj) -> Chain:
    if not isinstance(obj, list):
        raise ValueError("chain must be a list")
    chain = EMPTY_CHAIN
    for item in obj:
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], list) and isinstance(item[1], str)):
            raise ValueError("malformed block")
        if not all(isinstance(tx, str) for tx in item[0]):
            raise ValueError("transactions must be strings")
        chain = chain.extend(item[0], item[1])
    return chain


@dataclass(frozen=True)
class MmrMessage:
    vote: Chain
    proposal: Optional[Chain] = None

    def encode(self) -> bytes:
        obj = {"vote": _chain_to_obj(self.vote)}
        if self.proposal is not None:
            obj["proposal"] = _chain_to_obj(self.proposal)
        return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def decode(cls, data: bytes) -> Optional["MmrMessage"]:
        """Parse a payload; anything malformed yields None (an abstention)."""
        try:
            obj = json.loads(data.decode())
            if not isinstance(obj, dict):
                return None
            vote = _chain_from_obj(obj["vote"])
            proposal = _chain_from_obj(obj["proposal"]) if "proposal" in obj else None
        except (ValueError, KeyError, UnicodeDecodeError, TypeError):
            return None
        return cls(vote, proposal)


# ---------------------------------------------------------------------------
# Grades
# ---------------------------------------------------------------------------


class Tally:
    """Prefix-closed vote weights over the chains voted in one step."""

    def __init__(self, votes: Iterable[Tuple[Optional[MmrMessage], int]]):
        self.total = 0
        self.weight: Dict[Tuple[bytes, ...], int] = {}
        self.chains: Dict[Tuple[bytes, ...], Chain] = {(): EMPTY_CHAIN}
        for msg, w in votes:
            self.total += w
            if msg is None:
                continue
            chain = msg.vote
            digests = tuple(chain.digests())
            for i in range(len(digests) + 1):
                key = digests[:i]
                self.weight[key] = self.weight.get(key, 0) + w
                if key not in self.chains:
                    self.chains[key] = chain.prefix(i)

    def _graded(self, num: int, den: int) -> List[Chain]:
        out = [EMPTY_CHAIN]
        for key, w in self.weight.items():
            if key and w * den > num * self.total:
                out.append(self.chains[key])
        return out

    def grade0(self) -> List[Chain]:
        return self._graded(1, 3)

    def grade1(self) -> List[Chain]:
        return self._graded(2, 3)


def _maximal(chains: Sequence[Chain]) -> List[Chain]:
    return [c for c in chains if not any(len(o) > len(c) and c.is_prefix_of(o) for o in chains)]


def grade0_chains(delivered: Iterable[Tuple[Optional[MmrMessage], int]]) -> List[Chain]:
    return Tally(delivered).grade0()


def grade1_chain(delivered: Iterable[Tuple[Optional[MmrMessage], int]]) -> Chain:
    top = _maximal(Tally(delivered).grade1())
    if len(top) != 1:
        raise MultipleMaximalGrade1(f"{len(top)} maximal grade-1 chains")
    return top[0]


def maximal_grade0(delivered: Iterable[Tuple[Optional[MmrMessage], int]]) -> List[Chain]:
    top = _maximal(Tally(delivered).grade0())
    if len(top) > 2:
        raise MoreThanTwoMaximal(f"{len(top)} maximal grade-0 chains")
    return sorted(top, key=lambda c: c.tip or b"")


# ---------------------------------------------------------------------------
# Leader election
# ---------------------------------------------------------------------------


def tokens(dpow: bytes, w: int) -> List[bytes]:
    return [hashlib.sha256(dpow + i.to_bytes(8, "big")).digest() for i in range(w)]


def best_token(dpow: bytes, w: int) -> bytes:
    return max(tokens(dpow, w))


def elect_leader(delivered: Sequence[Tuple[object, bytes, int]]) -> int:
    """Index into ``delivered`` (entries (message, dpow, weight)) of the leader."""
    if not delivered:
        raise ValueError("cannot elect a leader from an empty delivery")
    best_i, best_key = 0, None
    for i, (_, dpow, w) in enumerate(delivered):
        # larger token wins; equal tokens go to the smaller dpow
        key = (best_token(dpow, w), _neg(dpow))
        if best_key is None or key > best_key:
            best_i, best_key = i, key
    return best_i


def _neg(b: bytes) -> bytes:
    return bytes(255 - x for x in b)


# ---------------------------------------------------------------------------
# Node
# ---------------------------------------------------------------------------


@dataclass
class StepOutput:
    message: MmrMessage
    committed: Optional[Chain] = None
    leader: Optional[bytes] = None


def mmr_step(
    s: int,
    delivered: Sequence[Tuple[Optional[MmrMessage], bytes, int]],
    submitted: Sequence[tuple],
    node_id: str,
    seed=0,
) -> StepOutput:
    """Pure step function: the node's output depends only on its arguments."""
    if s == 0:
        batch = submitted[0] if submitted else filler_batch(node_id, 0)
        return StepOutput(MmrMessage(EMPTY_CHAIN, EMPTY_CHAIN.extend(batch, node_id)))
    votes = [(m, w) for m, _, w in delivered]
    if s % 2 == 1:
        g0 = maximal_grade0(votes)
        vote = g0[0]
        leader = None
        if delivered:
            li = elect_leader(delivered)
            leader = delivered[li][1]
            lmsg = delivered[li][0]
            if lmsg is not None and lmsg.proposal is not None and any(c.is_prefix_of(lmsg.proposal) for c in g0):
                vote = lmsg.proposal
        committed = grade1_chain(votes)
        return StepOutput(MmrMessage(vote), committed=committed, leader=leader)
    g1 = grade1_chain(votes)
    g0 = maximal_grade0(votes)
    rng = random.Random(f"mmr:{node_id}:{seed}:{s}")
    base = g0[rng.randrange(len(g0))]
    fresh = [b for b in submitted if not base.contains_transactions(tuple(b))]
    batch = fresh[0] if fresh else filler_batch(node_id, s)
    return StepOutput(MmrMessage(g1, base.extend(batch, node_id)))


def filler_batch(node_id: str, s: int) -> tuple:
    return (f"filler:{node_id}:{s}",)


class MmrNode:
    """Holds the submitted-batch pool and the committed chain around :func:`mmr_step`."""

    def __init__(self, node_id: str, seed=0):
        self.id = node_id
        self.seed = seed
        self.submitted: Dict[tuple, None] = {}
        self.committed: Chain = EMPTY_CHAIN
        self.outputs: List[Tuple[int, StepOutput]] = []

    def submit(self, batch: Sequence[str]) -> None:
        batch = tuple(batch)
        if not self.committed.contains_transactions(batch):
            self.submitted.setdefault(batch, None)

    def on_ttrb_deliver(self, s: int, delivered: Sequence[Tuple[bytes, bytes, int]]) -> StepOutput:
        """``delivered`` holds (payload, dpow, weight) triples from the Sieve layer."""
        decoded = [(MmrMessage.decode(p), d, w) for p, d, w in delivered]
        out = mmr_step(s, decoded, list(self.submitted), self.id, self.seed)
        if out.committed is not None:
            for b in out.committed.blocks:
                self.submitted.pop(b.transactions, None)
            if self.committed.is_prefix_of(out.committed):
                self.committed = out.committed
        self.outputs.append((s, out))
        return out
