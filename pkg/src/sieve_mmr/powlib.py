"""Merkle-tree deterministic proof of work.

The prover hashes ``w`` leaves ``H(chi || j)``, commits to them with a Merkle
root, and opens ``k`` leaves whose indices are derived from the root. The
verifier re-derives the indices and checks the ``k`` authentication paths.
All hashing goes through :class:`CountingHash` so call counts are exact.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

MAGIC = b"DPOW"
VERSION = 1
DIGEST_SIZE = 32
PADDING_DIGEST = hashlib.sha256(b"sieve-mmr/merkle-padding").digest()


class WeightTooSmall(ValueError):
    pass


class MalformedProof(ValueError):
    pass


class CountingHash:
    """SHA-256 with an invocation counter."""

    def __init__(self):
        self.calls = 0

    def __call__(self, data: bytes) -> bytes:
        self.calls += 1
        return hashlib.sha256(data).digest()


def enc8(i: int) -> bytes:
    return i.to_bytes(8, "big")


@dataclass(frozen=True)
class PowParams:
    k: int
    lam: int = 256

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.lam != 256:
            raise ValueError("only 256-bit SHA-256 digests are supported")


@dataclass(frozen=True)
class MerklePath:
    index: int
    leaf: bytes
    siblings: Tuple[bytes, ...]


@dataclass(frozen=True)
class MerkleProof:
    root: bytes
    paths: Tuple[MerklePath, ...]

    @property
    def depth(self) -> int:
        return len(self.paths[0].siblings) if self.paths else 0

    def to_bytes(self) -> bytes:
        depth = self.depth
        body = [self.root, struct.pack(">IB", len(self.paths), depth)]
        for p in self.paths:
            if len(p.siblings) != depth:
                raise ValueError("paths of unequal depth")
            body.append(enc8(p.index))
            body.append(p.leaf)
            body.extend(p.siblings)
        blob = b"".join(body)
        return MAGIC + bytes([VERSION]) + struct.pack(">I", len(blob)) + blob

    @classmethod
    def from_bytes(cls, data: bytes) -> "MerkleProof":
        if len(data) < 9 or data[:4] != MAGIC:
            raise MalformedProof("bad magic")
        if data[4] != VERSION:
            raise MalformedProof(f"unsupported version {data[4]}")
        (length,) = struct.unpack(">I", data[5:9])
        blob = data[9:]
        if len(blob) != length:
            raise MalformedProof("length prefix does not match payload")
        if length < DIGEST_SIZE + 5:
            raise MalformedProof("truncated header")
        root = blob[:DIGEST_SIZE]
        k, depth = struct.unpack(">IB", blob[DIGEST_SIZE:DIGEST_SIZE + 5])
        per_path = 8 + DIGEST_SIZE * (depth + 1)
        off = DIGEST_SIZE + 5
        if len(blob) != off + k * per_path:
            raise MalformedProof("path section has the wrong size")
        paths = []
        for _ in range(k):
            index = int.from_bytes(blob[off:off + 8], "big")
            off += 8
            leaf = blob[off:off + DIGEST_SIZE]
            off += DIGEST_SIZE
            sibs = tuple(blob[off + i * DIGEST_SIZE: off + (i + 1) * DIGEST_SIZE] for i in range(depth))
            off += depth * DIGEST_SIZE
            paths.append(MerklePath(index, leaf, sibs))
        return cls(root, tuple(paths))


def tree_depth(w: int) -> int:
    return max(0, math.ceil(math.log2(w))) if w > 1 else 0


def derive_indices(root: bytes, w: int, k: int, h: CountingHash) -> List[int]:
    """k distinct 0-based leaf indices, in derivation order.

    ``w`` is hashed in with the counter so that a proof for one weight never
    re-derives the same openings under another weight of equal tree depth.
    """
    if k > w:
        raise WeightTooSmall(f"w={w} < k={k}")
    out: List[int] = []
    seen = set()
    i = 0
    while len(out) < k:
        x = int.from_bytes(h(root + enc8(w) + enc8(i)), "big")
        # ceil(w * x / 2^256), clamped into 1..w
        idx = min(max(1, -((-w * x) >> 256)), w)
        if idx - 1 not in seen:
            seen.add(idx - 1)
            out.append(idx - 1)
        i += 1
    return out


def _build_tree(chi: bytes, w: int, h: CountingHash) -> List[List[bytes]]:
    depth = tree_depth(w)
    leaves = [h(chi + enc8(j)) for j in range(w)]
    leaves.extend([PADDING_DIGEST] * ((1 << depth) - w))
    levels = [leaves]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        levels.append([h(prev[i] + prev[i + 1]) for i in range(0, len(prev), 2)])
    return levels


def prove(chi: bytes, w: int, params: PowParams, h: Optional[CountingHash] = None) -> MerkleProof:
    if w < params.k:
        raise WeightTooSmall(f"w={w} < k={params.k}")
    h = h if h is not None else CountingHash()
    levels = _build_tree(chi, w, h)
    root = levels[-1][0]
    paths = []
    for idx in derive_indices(root, w, params.k, h):
        sibs = []
        pos = idx
        for level in levels[:-1]:
            sibs.append(level[pos ^ 1])
            pos >>= 1
        paths.append(MerklePath(idx, levels[0][idx], tuple(sibs)))
    return MerkleProof(root, tuple(paths))


def verify(proof: MerkleProof, chi: bytes, w: int, params: PowParams, h: Optional[CountingHash] = None) -> bool:
    h = h if h is not None else CountingHash()
    if w < params.k or len(proof.paths) != params.k:
        return False
    depth = tree_depth(w)
    if any(len(p.siblings) != depth for p in proof.paths):
        return False
    expected = derive_indices(proof.root, w, params.k, h)
    if [p.index for p in proof.paths] != expected:
        return False
    for p in proof.paths:
        if h(chi + enc8(p.index)) != p.leaf:
            return False
        node, pos = p.leaf, p.index
        for sib in p.siblings:
            node = h(sib + node) if pos & 1 else h(node + sib)
            pos >>= 1
        if node != proof.root:
            return False
    return True


def verify_bytes(data: bytes, chi: bytes, w: int, params: PowParams, h: Optional[CountingHash] = None) -> bool:
    """Like :func:`verify` on a serialized proof; unparseable input is rejected."""
    try:
        proof = MerkleProof.from_bytes(data)
    except MalformedProof:
        return False
    return verify(proof, chi, w, params, h)


def cheating_success_bound(t: Fraction, k: int) -> Fraction:
    t = Fraction(t)
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    return t ** k


def min_k(target_bits: int, t: Fraction) -> int:
    """Smallest k with t^k <= 2^-target_bits."""
    t = Fraction(t)
    if t == 1:
        raise ValueError("t = 1 gives no soundness for any k")
    bound = Fraction(1, 2 ** target_bits)
    k = 1
    while cheating_success_bound(t, k) > bound:
        k += 1
    return k


class MerkleBackend:
    """Plugs the Merkle construction into the simulated oracle.

    A message of weight ``w`` costs ``w * leaves_per_weight`` leaves; the
    serialized proof is the dpow value.
    """

    def __init__(self, k: int = 4, leaves_per_weight: int = 8):
        self.params = PowParams(k)
        self.leaves_per_weight = leaves_per_weight
        if leaves_per_weight < k:
            raise ValueError("leaves_per_weight must be at least k")

    @staticmethod
    def challenge(gamma: bytes) -> bytes:
        return hashlib.sha256(b"chi" + gamma).digest()

    def evaluate(self, gamma: bytes, w: int, rng=None) -> bytes:
        return prove(self.challenge(gamma), w * self.leaves_per_weight, self.params).to_bytes()

    def check(self, dpow: bytes, gamma: bytes, w: int) -> bool:
        return verify_bytes(dpow, self.challenge(gamma), w * self.leaves_per_weight, self.params)
