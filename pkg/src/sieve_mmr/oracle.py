"""Simulated delayed-proof-of-work oracle.

A node that requests a DPoW of weight ``w`` receives it once it has been
active for enough ticks at its power ``P``. The oracle keeps ground truth
(who evaluated what, and when) that only checkers may look at; protocol code
talks to it through :class:`OracleClient`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Tuple

SPEC_CONVENTION = "k-minus-1"
STRICT_CONVENTION = "k"
CONVENTIONS = (SPEC_CONVENTION, STRICT_CONVENTION)


class FatalOracleError(RuntimeError):
    pass


@dataclass
class Evaluation:
    """One oracle call as seen by the checkers."""

    node: str
    byzantine: bool
    gamma: bytes
    weight: int
    call_tick: int
    dpow: bytes
    deliver_tick: Optional[int] = None


@dataclass
class _Pending:
    evaluation: Evaluation
    remaining: int


def required_active_ticks(w: int, power: Fraction, K: int, convention: str = SPEC_CONVENTION) -> int:
    """Active ticks (counting the request tick) before a weight-``w`` DPoW arrives."""
    if power <= 0:
        raise ValueError("computing power must be positive")
    if convention == SPEC_CONVENTION:
        need = math.ceil(Fraction(w * (K - 1)) / power)
    elif convention == STRICT_CONVENTION:
        need = math.ceil(Fraction(w * K) / power)
    else:
        raise ValueError(f"unknown delivery convention {convention!r}")
    return max(need, 1)


class DpowOracle:
    """Maps <gamma, w> to <dpow, generation step> and schedules deliveries.

    ``backend`` turns (gamma, w, rng) into dpow bytes and must be injective
    with overwhelming probability; by default it draws 256 uniform bits.
    ``backend_verify`` optionally replaces the table lookup in :meth:`verify`.
    """

    def __init__(
        self,
        K: int,
        seed: int,
        convention: str = SPEC_CONVENTION,
        backend: Optional[Callable[[bytes, int, random.Random], bytes]] = None,
        backend_verify: Optional[Callable[[bytes, bytes, int], bool]] = None,
    ):
        if K < 2:
            raise ValueError("K must be at least 2")
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown delivery convention {convention!r}")
        self.K = K
        self.convention = convention
        self._rng = random.Random(seed)
        self._backend = backend
        self._backend_verify = backend_verify
        self._powers: Dict[str, Fraction] = {}
        self._byzantine: Dict[str, bool] = {}
        self._table: Dict[Tuple[bytes, int], Tuple[bytes, int]] = {}
        self._by_dpow: Dict[bytes, Tuple[bytes, int, int]] = {}
        self._pending: Dict[str, _Pending] = {}
        self.history: List[Evaluation] = []

    def register(self, node: str, power: Fraction, byzantine: bool = False) -> None:
        self._powers[node] = Fraction(power)
        self._byzantine[node] = byzantine

    def is_byzantine(self, node: str) -> bool:
        return self._byzantine[node]

    def has_pending(self, node: str) -> bool:
        return node in self._pending

    def request(self, node: str, gamma: bytes, w: int, tick: int) -> bool:
        """Start an evaluation. Returns False if ``node`` already has one pending."""
        if w < 1:
            raise ValueError("weight must be >= 1")
        if node in self._pending:
            return False
        key = (gamma, w)
        entry = self._table.get(key)
        if entry is None:
            if self._backend is None:
                dpow = self._rng.getrandbits(256).to_bytes(32, "big")
            else:
                dpow = self._backend(gamma, w, self._rng)
            if dpow in self._by_dpow:
                raise FatalOracleError("dpow collision")
            entry = (dpow, tick // self.K)
            self._table[key] = entry
            self._by_dpow[dpow] = (gamma, w, entry[1])
        ev = Evaluation(node, self._byzantine[node], gamma, w, tick, entry[0])
        need = required_active_ticks(w, self._powers[node], self.K, self.convention)
        self._pending[node] = _Pending(ev, need)
        self.history.append(ev)
        return True

    def deliver_due(self, node: str, tick: int) -> List[Tuple[bytes, bytes, int]]:
        """Responses due to ``node`` at the start of ``tick`` as (dpow, gamma, w)."""
        p = self._pending.get(node)
        if p is None or p.remaining > 0:
            return []
        del self._pending[node]
        p.evaluation.deliver_tick = tick
        ev = p.evaluation
        return [(ev.dpow, ev.gamma, ev.weight)]

    def accrue(self, active_nodes: Iterable[str]) -> None:
        """End-of-tick bookkeeping: every active node with a pending call makes progress."""
        for node in active_nodes:
            p = self._pending.get(node)
            if p is not None and p.remaining > 0:
                p.remaining -= 1

    def verify(self, dpow: bytes, gamma: bytes, w: int) -> bool:
        if self._backend_verify is not None:
            return self._backend_verify(dpow, gamma, w)
        entry = self._table.get((gamma, w))
        return entry is not None and entry[0] == dpow

    # -- ground truth, for checkers only ---------------------------------

    def generation_step_of(self, dpow: bytes) -> Optional[int]:
        entry = self._by_dpow.get(dpow)
        return None if entry is None else entry[2]

    def delivered(self) -> List[Evaluation]:
        return [e for e in self.history if e.deliver_tick is not None]


class OracleClient:
    """The only oracle surface a protocol node gets."""

    def __init__(self, oracle: DpowOracle, node: str):
        self._oracle = oracle
        self.node = node

    def request(self, gamma: bytes, w: int, tick: int) -> bool:
        return self._oracle.request(self.node, gamma, w, tick)

    def verify(self, dpow: bytes, gamma: bytes, w: int) -> bool:
        return self._oracle.verify(dpow, gamma, w)


# ---------------------------------------------------------------------------
# Correct-supremacy audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupremacyFailure:
    first_step: int
    last_step: int
    byzantine_weight: int
    total_weight: int


def _holds(byz: int, total: int, rho: Fraction) -> bool:
    # An interval with no finished evaluation at all is vacuously fine.
    if byz == 0:
        return True
    return byz * rho.denominator < rho.numerator * total


def audit_interval(history: Iterable[Evaluation], K: int, rho: Fraction, first: int, last: int) -> Tuple[int, int]:
    """(byzantine weight, total weight) of evaluations called and delivered within steps [first, last]."""
    byz = total = 0
    for e in history:
        if e.deliver_tick is None:
            continue
        if first <= e.call_tick // K and e.deliver_tick // K <= last:
            total += e.weight
            if e.byzantine:
                byz += e.weight
    return byz, total


def audit_correct_supremacy(history: Iterable[Evaluation], K: int, rho: Fraction, horizon: int) -> Optional[SupremacyFailure]:
    """First interval [s, s'] within the horizon where the Byzantine share is not below rho.

    Uses 2-D suffix/prefix sums over (call step, delivery step), so the cost
    is quadratic in the horizon rather than in the number of evaluations.
    """
    n = horizon
    if n <= 0:
        return None
    tot = [[0] * n for _ in range(n)]
    byz = [[0] * n for _ in range(n)]
    for e in history:
        if e.deliver_tick is None:
            continue
        c, d = e.call_tick // K, e.deliver_tick // K
        if c >= n or d >= n:
            continue
        tot[c][d] += e.weight
        if e.byzantine:
            byz[c][d] += e.weight
    # acc[s][t] = sum over c >= s, d <= t
    acc_t = [[0] * (n + 1) for _ in range(n + 1)]
    acc_b = [[0] * (n + 1) for _ in range(n + 1)]
    for s in range(n - 1, -1, -1):
        for t in range(n):
            acc_t[s][t + 1] = tot[s][t] + acc_t[s + 1][t + 1] + acc_t[s][t] - acc_t[s + 1][t]
            acc_b[s][t + 1] = byz[s][t] + acc_b[s + 1][t + 1] + acc_b[s][t] - acc_b[s + 1][t]
    for s in range(n):
        for t in range(s, n):
            b, a = acc_b[s][t + 1], acc_t[s][t + 1]
            if not _holds(b, a, rho):
                return SupremacyFailure(s, t, b, a)
    return None


def audit_correct_supremacy_bruteforce(history: List[Evaluation], K: int, rho: Fraction, horizon: int) -> Optional[SupremacyFailure]:
    for s in range(horizon):
        for t in range(s, horizon):
            b, a = audit_interval(history, K, rho, s, t)
            if not _holds(b, a, rho):
                return SupremacyFailure(s, t, b, a)
    return None

