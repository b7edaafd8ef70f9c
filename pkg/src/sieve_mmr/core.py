"""Value types shared by every layer: Sieve messages, blocks and chains, and
the weighted-set predicates (consistent successor, consistent DAG).

Thresholds of the form ``part > (1 - rho) * whole`` are evaluated with exact
integer cross-multiplication; ``rho`` is always a :class:`fractions.Fraction`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

MessageId = bytes


class ModelAssumptionError(AssertionError):
    """A model assumption the protocol relies on was observed to be violated."""


def as_fraction(value: Union[str, int, float, Fraction]) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    return Fraction(value)


def exceeds_fraction(part: int, whole: int, frac: Fraction) -> bool:
    """``part > frac * whole`` without rounding."""
    return part * frac.denominator > frac.numerator * whole


# ---------------------------------------------------------------------------
# Sieve messages
# ---------------------------------------------------------------------------


def encode_gamma(payload: bytes, coffer: Iterable[MessageId], nonce: int) -> bytes:
    """Canonical byte encoding of the DPoW input <payload, coffer, nonce>.

    The claimed timestamp is deliberately not part of it.
    """
    ids = sorted(coffer)
    parts = [b"gamma", len(payload).to_bytes(4, "big"), payload, len(ids).to_bytes(4, "big")]
    for mid in ids:
        parts.append(len(mid).to_bytes(4, "big"))
        parts.append(mid)
    parts.append(nonce.to_bytes(8, "big"))
    return b"".join(parts)


@dataclass(frozen=True, eq=False)
class SieveMessage:
    """<payload, timestamp, coffer, dpow, weight>, plus the nonce needed to
    rebuild the DPoW input for verification."""

    payload: bytes
    timestamp: int
    coffer: frozenset
    nonce: int
    dpow: bytes
    weight: int

    def __post_init__(self):
        if self.weight < 1:
            raise ValueError(f"message weight must be >= 1, got {self.weight}")

    @property
    def id(self) -> MessageId:
        return self.dpow

    @cached_property
    def gamma(self) -> bytes:
        return encode_gamma(self.payload, self.coffer, self.nonce)

    def __hash__(self):
        return hash(self.dpow)

    def __eq__(self, other):
        if not isinstance(other, SieveMessage):
            return NotImplemented
        return (
            self.dpow == other.dpow
            and self.timestamp == other.timestamp
            and self.weight == other.weight
            and self.nonce == other.nonce
            and self.payload == other.payload
            and self.coffer == other.coffer
        )

    def __repr__(self):
        return f"SieveMessage(ts={self.timestamp}, w={self.weight}, id={self.dpow[:4].hex()}, |coffer|={len(self.coffer)})"


def weight(messages: Iterable[SieveMessage]) -> int:
    return sum(m.weight for m in messages)


def restrict_to_timestamp(messages: Iterable[SieveMessage], s: int) -> set:
    return {m for m in messages if m.timestamp == s}


def sort_messages(messages: Iterable[SieveMessage]) -> list:
    return sorted(messages, key=lambda m: m.dpow)


def coffer_weight(m: SieveMessage, store: Mapping[MessageId, SieveMessage]) -> Optional[int]:
    """Total weight of ``m``'s coffer, or ``None`` if some reference cannot be resolved."""
    total = 0
    for mid in m.coffer:
        ref = store.get(mid)
        if ref is None:
            return None
        total += ref.weight
    return total


def is_consistent_successor(
    x: Iterable[SieveMessage],
    m: SieveMessage,
    rho: Fraction,
    store: Mapping[MessageId, SieveMessage],
) -> bool:
    x = list(x)
    if any(member.dpow not in m.coffer for member in x):
        return False
    total = coffer_weight(m, store)
    if total is None:
        return False
    return exceeds_fraction(weight(x), total, 1 - rho)


def is_consistent_dag(
    c: Iterable[SieveMessage],
    seed_step: int,
    rho: Fraction,
    store: Mapping[MessageId, SieveMessage],
) -> bool:
    """Layers are the timestamp classes of ``c`` starting at ``seed_step``.

    An empty intermediate layer is a layer like any other: nothing can be a
    consistent successor of the empty set, so everything above it must be empty too.
    """
    layers: dict = {}
    for m in c:
        if m.timestamp < seed_step:
            return False
        layers.setdefault(m.timestamp, []).append(m)
    if not layers:
        return True
    top = max(layers)
    for r in range(seed_step, top):
        below = layers.get(r, [])
        for m in layers.get(r + 1, []):
            if not is_consistent_successor(below, m, rho, store):
                return False
    return True


# ---------------------------------------------------------------------------
# Blocks and chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    transactions: tuple
    parent: Optional[bytes]
    submitter: str = field(default="", compare=False)

    @cached_property
    def digest(self) -> bytes:
        h = hashlib.sha256(b"block")
        h.update(self.parent if self.parent is not None else b"\x00" * 32)
        h.update(json.dumps(list(self.transactions), separators=(",", ":")).encode())
        return h.digest()


@dataclass(frozen=True)
class Chain:
    blocks: tuple = ()

    def __post_init__(self):
        prev = None
        for b in self.blocks:
            if b.parent != prev:
                raise ValueError("block does not point to its predecessor")
            prev = b.digest

    def __len__(self):
        return len(self.blocks)

    @property
    def tip(self) -> Optional[bytes]:
        return self.blocks[-1].digest if self.blocks else None

    def digests(self) -> list:
        return [b.digest for b in self.blocks]

    def prefix(self, n: int) -> "Chain":
        return Chain(self.blocks[:n])

    def prefixes(self) -> Iterable["Chain"]:
        for i in range(len(self.blocks) + 1):
            yield Chain(self.blocks[:i])

    def extend(self, transactions: Sequence[str], submitter: str = "") -> "Chain":
        block = Block(tuple(transactions), self.tip, submitter)
        return Chain(self.blocks + (block,))

    def is_prefix_of(self, other: "Chain") -> bool:
        n = len(self.blocks)
        if n > len(other.blocks):
            return False
        return n == 0 or other.blocks[n - 1].digest == self.blocks[-1].digest

    def contains_transactions(self, transactions: tuple) -> bool:
        return any(b.transactions == transactions for b in self.blocks)

    def __repr__(self):
        return "Chain<" + ",".join(b.digest[:3].hex() for b in self.blocks) + ">"


EMPTY_CHAIN = Chain()


def are_compatible(a: Chain, b: Chain) -> bool:
    return a.is_prefix_of(b) or b.is_prefix_of(a)
