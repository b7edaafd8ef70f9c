"""Sieve: time-travel-resilient broadcast over the DPoW oracle.

A node broadcasts one message per active step. At the start of each step it
decides which timestamp-(s-1) messages to deliver upward: incrementally
(:func:`online_sieve`) when it was active in the previous step, or from the
whole received history (:func:`bootstrap_sieve`) after a gap.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core import (
    MessageId,
    SieveMessage,
    coffer_weight,
    encode_gamma,
    exceeds_fraction,
    sort_messages,
)

POLICIES = ("sieve", "no-filter", "naive-online")

Verifier = Callable[[SieveMessage], bool]


class MissingDpowError(RuntimeError):
    """The oracle did not answer by the last tick of the step."""


# ---------------------------------------------------------------------------
# Online-Sieve
# ---------------------------------------------------------------------------


def online_sieve(
    s: int,
    received: Iterable[SieveMessage],
    prev_filtered: Iterable[SieveMessage],
    rho: Fraction,
    verify: Verifier,
) -> List[SieveMessage]:
    prev = {m.dpow: m.weight for m in prev_filtered}
    prev_total = sum(prev.values())
    keep_frac = 1 - rho
    out = []
    for m in received:
        if m.timestamp != s - 1 or not verify(m):
            continue
        # with nothing to compare against (first steps), keep every valid message
        if prev_total == 0 or exceeds_fraction(sum(prev.get(c, 0) for c in m.coffer), prev_total, keep_frac):
            out.append(m)
    return sort_messages(out)


def no_filter(s: int, received: Iterable[SieveMessage], verify: Verifier) -> List[SieveMessage]:
    """Baseline without antique filtering."""
    return sort_messages(m for m in received if m.timestamp == s - 1 and verify(m))


# ---------------------------------------------------------------------------
# Bootstrap-Sieve
# ---------------------------------------------------------------------------


def verify_recursively(received: Mapping[MessageId, SieveMessage], verify: Verifier) -> Dict[MessageId, SieveMessage]:
    """Messages whose own DPoW and whole coffer closure verify."""
    status: Dict[MessageId, bool] = {}

    def ok(mid: MessageId) -> bool:
        if mid in status:
            return status[mid]
        m = received.get(mid)
        if m is None:
            status[mid] = False
            return False
        status[mid] = False  # provisional, breaks any (impossible) cycle
        good = verify(m) and all(ok(c) for c in sorted(m.coffer))
        status[mid] = good
        return good

    for mid in sorted(received, key=lambda i: (received[i].timestamp, i)):
        ok(mid)
    return {mid: received[mid] for mid in received if status.get(mid)}


class DagSearch:
    """Exact heaviest consistent-DAG queries over a mutable pool.

    ``pool`` is the candidate set; ``store`` resolves coffer references for
    weights (a coffer's weight counts every referenced message, pooled or not).

    For a fixed layer X_r the best continuation never needs anything but
    sets of the form S(X_r) ∩ F, where S(X_r) is every pool message that is a
    consistent successor of X_r and F ranges over the intersection closure
    of the coffers of the layer above. Enumerating those families keeps the
    search exact while staying small on realistic pools.
    """

    FAMILY_LIMIT = 20000

    def __init__(self, pool: Mapping[MessageId, SieveMessage], store: Mapping[MessageId, SieveMessage], rho: Fraction):
        self.rho = rho
        self._keep = 1 - rho
        self.store = store
        self.layers: Dict[int, set] = {}
        self.msgs: Dict[MessageId, SieveMessage] = {}
        for mid, m in pool.items():
            self.msgs[mid] = m
            self.layers.setdefault(m.timestamp, set()).add(mid)
        self._cw = {mid: coffer_weight(m, store) for mid, m in self.msgs.items()}
        self._family: Dict[int, List[FrozenSet[MessageId]]] = {}
        self._best: Dict[Tuple[int, FrozenSet[MessageId]], Tuple[int, Tuple[FrozenSet[MessageId], ...]]] = {}

    # -- pool maintenance ------------------------------------------------

    def layer(self, r: int) -> FrozenSet[MessageId]:
        return frozenset(self.layers.get(r, ()))

    def remove(self, mid: MessageId) -> None:
        m = self.msgs.pop(mid)
        q = m.timestamp
        self.layers[q].discard(mid)
        self._family.pop(q, None)
        self._family.pop(q - 1, None)
        self._best = {k: v for k, v in self._best.items() if k[0] >= q}

    def weight_of(self, ids: Iterable[MessageId]) -> int:
        return sum(self.msgs[i].weight for i in ids)

    # -- building blocks -------------------------------------------------

    def successors(self, r: int, x: FrozenSet[MessageId]) -> FrozenSet[MessageId]:
        """Pool messages at layer r+1 that are consistent successors of x."""
        wx = self.weight_of(x)
        out = []
        for mid in self.layers.get(r + 1, ()):
            cw = self._cw[mid]
            if cw is None:
                continue
            m = self.msgs[mid]
            if x <= m.coffer and exceeds_fraction(wx, cw, self._keep):
                out.append(mid)
        return frozenset(out)

    def family(self, r: int) -> List[FrozenSet[MessageId]]:
        """Intersection closure of {layer r} and {coffer(m) ∩ layer r : m at layer r+1}."""
        fam = self._family.get(r)
        if fam is not None:
            return fam
        base = self.layer(r)
        closed = {base}
        for mid in sorted(self.layers.get(r + 1, ())):
            c = base & self.msgs[mid].coffer
            new = {c & f for f in closed}
            new.add(c)
            closed |= new
            if len(closed) > self.FAMILY_LIMIT:
                raise RuntimeError(f"consistent-DAG search family at layer {r} exceeds {self.FAMILY_LIMIT} sets")
        fam = sorted((f for f in closed if f), key=lambda f: (len(f), sorted(f)))
        self._family[r] = fam
        return fam

    @staticmethod
    def _better(a: Tuple, b: Optional[Tuple]) -> bool:
        if b is None:
            return True
        if a[0] != b[0]:
            return a[0] > b[0]
        return _tiebreak(a[1]) < _tiebreak(b[1])

    def best_above(self, r: int, x: FrozenSet[MessageId]) -> Tuple[int, Tuple[FrozenSet[MessageId], ...]]:
        """Heaviest continuation (layers r+1, r+2, ...) over a fixed nonempty layer x at r."""
        key = (r, x)
        hit = self._best.get(key)
        if hit is not None:
            return hit
        succ = self.successors(r, x)
        best: Optional[Tuple] = None
        if succ:
            seen = set()
            for f in self.family(r + 1):
                y = succ & f
                if not y or y in seen:
                    continue
                seen.add(y)
                w_up, up = self.best_above(r + 1, y)
                cand = (self.weight_of(y) + w_up, (y,) + up)
                if self._better(cand, best):
                    best = cand
        result = best if best is not None else (0, ())
        self._best[key] = result
        return result

    # -- queries ---------------------------------------------------------

    def heaviest_containing(self, mid: MessageId, seed_step: int) -> Optional[Tuple[int, FrozenSet[MessageId], FrozenSet[MessageId]]]:
        """(weight, dag, seed) of a heaviest timestamp-``seed_step`` consistent DAG containing ``mid``.

        ``mid`` must sit at layer seed_step + 1.
        """
        m = self.msgs[mid]
        if m.timestamp != seed_step + 1 or self._cw[mid] is None:
            return None
        best: Optional[Tuple] = None
        seen_a = set()
        for g in self.family(seed_step):
            a = g & m.coffer
            if not a or a in seen_a:
                continue
            seen_a.add(a)
            succ = self.successors(seed_step, a)
            if mid not in succ:
                continue
            w_a = self.weight_of(a)
            seen_x = set()
            for f in self.family(seed_step + 1):
                x1 = succ & f
                if mid not in x1 or x1 in seen_x:
                    continue
                seen_x.add(x1)
                w_up, up = self.best_above(seed_step + 1, x1)
                cand = (w_a + self.weight_of(x1) + w_up, (a, x1) + up)
                if self._better(cand, best):
                    best = cand
        if best is None:
            return None
        layers = best[1]
        return best[0], frozenset().union(*layers), layers[0]

    def heaviest_disjoint_weight(self, seed_step: int, exclude: FrozenSet[MessageId]) -> int:
        """Weight of the heaviest timestamp-``seed_step`` consistent DAG whose seed avoids ``exclude``."""
        avail = self.layer(seed_step) - exclude
        best = 0
        seen = set()
        for g in self.family(seed_step):
            b = avail & g
            if not b or b in seen:
                continue
            seen.add(b)
            best = max(best, self.weight_of(b) + self.best_above(seed_step, b)[0])
        return best


def _tiebreak(layers: Sequence[FrozenSet[MessageId]]) -> Tuple:
    return tuple(tuple(sorted(l)) for l in layers)


def find_heaviest_consistent_dag(
    m: SieveMessage,
    pool: Iterable[SieveMessage],
    seed_step: int,
    rho: Fraction,
    store: Optional[Mapping[MessageId, SieveMessage]] = None,
) -> Optional[Tuple[FrozenSet[SieveMessage], FrozenSet[SieveMessage]]]:
    """Heaviest consistent DAG within ``pool`` containing ``m``, as (dag, seed); None if there is none."""
    pool_map = {x.dpow: x for x in pool}
    if m.dpow not in pool_map:
        raise ValueError("m must belong to the pool")
    if m.timestamp != seed_step + 1:
        raise ValueError("m must carry timestamp seed_step + 1")
    search = DagSearch(pool_map, store if store is not None else pool_map, rho)
    found = search.heaviest_containing(m.dpow, seed_step)
    if found is None:
        return None
    _, dag, seed = found
    return frozenset(pool_map[i] for i in dag), frozenset(pool_map[i] for i in seed)


def exists_heavier_disjoint_dag(
    c: Iterable[SieveMessage],
    seed: Iterable[SieveMessage],
    pool: Iterable[SieveMessage],
    seed_step: int,
    rho: Fraction,
    store: Optional[Mapping[MessageId, SieveMessage]] = None,
) -> bool:
    pool_map = {x.dpow: x for x in pool}
    search = DagSearch(pool_map, store if store is not None else pool_map, rho)
    seed_ids = frozenset(x.dpow for x in seed)
    return search.heaviest_disjoint_weight(seed_step, seed_ids) > sum(x.weight for x in c)


def bootstrap_sieve(
    s: int,
    received: Mapping[MessageId, SieveMessage],
    rho: Fraction,
    verify: Verifier,
) -> List[SieveMessage]:
    pool = verify_recursively(received, verify)
    search = DagSearch(pool, received, rho)
    for sp in range(1, s):
        for mid in sorted(search.layer(sp)):
            found = search.heaviest_containing(mid, sp - 1)
            if found is None:
                search.remove(mid)
                continue
            w_c, _, seed = found
            if search.heaviest_disjoint_weight(sp - 1, seed) > w_c:
                search.remove(mid)
    return sort_messages(search.msgs[i] for i in search.layer(s - 1))


def iterated_online_sieve(
    s: int,
    received: Iterable[SieveMessage],
    rho: Fraction,
    verify: Verifier,
) -> List[SieveMessage]:
    """Online-Sieve replayed from step 0 on the current view; not safe, kept for comparison."""
    received = list(received)
    filtered: List[SieveMessage] = []
    for sp in range(1, s + 1):
        filtered = online_sieve(sp, received, filtered, rho, verify)
    return filtered


# ---------------------------------------------------------------------------
# Node state machine
# ---------------------------------------------------------------------------


class SieveNode:
    """One node running Sieve.

    ``deliver(s, filtered)`` is the upper layer; it returns the payload to
    broadcast in step ``s``. ``bootstrap_delay`` (steps) models a slow
    Bootstrap-Sieve: the node stays silent while catching up on buffered
    messages and resumes with Online-Sieve.
    """

    def __init__(
        self,
        node_id: str,
        power: int,
        K: int,
        rho: Fraction,
        oracle,
        deliver: Callable[[int, Sequence[SieveMessage]], bytes],
        seed=0,
        policy: str = "sieve",
        bootstrap_delay: int = 0,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        if K < 2:
            raise ValueError("K must be at least 2")
        self.id = node_id
        self.power = int(power)
        self.K = K
        self.rho = Fraction(rho)
        self.oracle = oracle
        self.deliver = deliver
        self.rng = random.Random(f"sieve-nonce:{node_id}:{seed}")
        self.policy = policy
        self.bootstrap_delay = bootstrap_delay

        self.received: Dict[MessageId, SieveMessage] = {}
        self.received_at: Dict[MessageId, int] = {}
        self.last_active = -1
        self.filtered: List[SieveMessage] = []
        self.pending: Optional[Tuple[bytes, int, FrozenSet[MessageId], bytes]] = None
        self.deliveries: List[Tuple[int, Tuple[SieveMessage, ...]]] = []
        self._verified: Dict[MessageId, bool] = {}
        self._catchup: Optional[Tuple[int, int]] = None  # (bootstrap step, resume step)

    def verify(self, m: SieveMessage) -> bool:
        hit = self._verified.get(m.dpow)
        if hit is None:
            hit = self.oracle.verify(m.dpow, m.gamma, m.weight)
            self._verified[m.dpow] = hit
        return hit

    def _received_by(self, tick: int) -> Dict[MessageId, SieveMessage]:
        return {i: m for i, m in self.received.items() if self.received_at[i] <= tick}

    def upon_new_tick(self, t: int, incoming: Iterable[SieveMessage], responses: Sequence[Tuple[bytes, bytes, int]]) -> List[SieveMessage]:
        for m in incoming:
            if m.dpow not in self.received:
                self.received[m.dpow] = m
                self.received_at[m.dpow] = t
        phase = t % self.K
        s = t // self.K
        if phase == 0:
            self.new_step(s, t)
            return []
        if phase == self.K - 1 and self.pending is not None:
            payload, nonce, coffer, gamma = self.pending
            hit = [r for r in responses if r[1] == gamma and r[2] == self.power]
            if not hit:
                raise MissingDpowError(f"node {self.id}: no DPoW response by tick {t}")
            self.pending = None
            return [SieveMessage(payload, s, coffer, nonce, hit[0][0], self.power)]
        return []

    def _filter(self, s: int, t: int) -> Optional[List[SieveMessage]]:
        if self.policy == "no-filter":
            return no_filter(s, self.received.values(), self.verify)
        if self.last_active == s - 1:
            return online_sieve(s, self.received.values(), self.filtered, self.rho, self.verify)
        if self.policy == "naive-online":
            return iterated_online_sieve(s, self.received.values(), self.rho, self.verify)
        if self.bootstrap_delay <= 0:
            return bootstrap_sieve(s, self.received, self.rho, self.verify)
        if self._catchup is None:
            self._catchup = (s, s + self.bootstrap_delay)
        return None

    def new_step(self, s: int, t: int) -> None:
        if self._catchup is not None:
            start, resume = self._catchup
            if s < resume:
                return
            self._catchup = None
            filtered = bootstrap_sieve(start, self._received_by(start * self.K), self.rho, self.verify)
            for sp in range(start + 1, s + 1):
                view = self._received_by(sp * self.K).values()
                filtered = online_sieve(sp, view, filtered, self.rho, self.verify)
        else:
            filtered = self._filter(s, t)
            if filtered is None:
                return
        self.filtered = filtered
        self.last_active = s
        self.deliveries.append((s, tuple(filtered)))
        payload = self.deliver(s, tuple(filtered))
        nonce = self.rng.getrandbits(64)
        coffer = frozenset(m.dpow for m in filtered)
        gamma = encode_gamma(payload, coffer, nonce)
        if not self.oracle.request(gamma, self.power, t):
            raise RuntimeError(f"node {self.id}: DPoW request rejected, one already pending")
        self.pending = (payload, nonce, coffer, gamma)
