"""Run trace: one canonical JSON object per event, hashed as it is written."""

from __future__ import annotations

import hashlib
import json
from typing import IO, Any, List, Optional

TRACE_KINDS = (
    "send",
    "receive",
    "dpow-request",
    "dpow-deliver",
    "ttrb-deliver",
    "commit",
    "leader",
    "rejected-send",
    "checker-verdict",
)


def short_id(dpow: bytes) -> str:
    """Hex id for traces; long (Merkle-proof) ids are hashed first."""
    if len(dpow) > 32:
        dpow = hashlib.sha256(dpow).digest()
    return dpow.hex()


class Trace:
    """Collects events. With ``enabled=False`` every emit is a no-op (used by bulk property runs)."""

    def __init__(self, enabled: bool = True, sink: Optional[IO[str]] = None, keep: bool = False):
        self.enabled = enabled
        self.sink = sink
        self.keep = keep
        self.events: List[str] = []
        self.count = 0
        self._hash = hashlib.sha256()

    def emit(self, tick: int, node: str, kind: str, **details: Any) -> None:
        if not self.enabled:
            return
        if kind not in TRACE_KINDS:
            raise ValueError(f"unknown trace event kind {kind!r}")
        record = {"tick": tick, "node": node, "kind": kind}
        record.update(details)
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        self.count += 1
        if self.keep:
            self.events.append(line)
        if self.sink is not None:
            self.sink.write(line + "\n")

    def digest(self) -> Optional[str]:
        return self._hash.hexdigest() if self.enabled else None
