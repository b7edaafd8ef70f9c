"""Merkle DPoW: pick k for a soundness target, then prove, verify and tamper."""

import hashlib
from fractions import Fraction

from sieve_mmr import powlib

for bits in (20, 40, 80):
    for t in (Fraction(1, 2), Fraction(9, 10)):
        print(f"p={bits:>2} t={str(t):>4}  ->  k = {powlib.min_k(bits, t)}")

chi = hashlib.sha256(b"demo challenge").digest()
w, params = 256, powlib.PowParams(8)
prover, verifier = powlib.CountingHash(), powlib.CountingHash()
proof = powlib.prove(chi, w, params, prover)
ok = powlib.verify(proof, chi, w, params, verifier)
blob = proof.to_bytes()
print(f"\nw={w} k=8: {prover.calls} prover hashes, {verifier.calls} verifier hashes, "
      f"{len(blob)} proof bytes, valid={ok}")

bad = bytearray(blob)
bad[-1] ^= 1
print("one flipped bit      ->", powlib.verify_bytes(bytes(bad), chi, w, params))
print("claimed weight w - 1 ->", powlib.verify(proof, chi, w - 1, params))
