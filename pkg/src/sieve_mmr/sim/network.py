"""Synchronous network with per-node backlog and Byzantine echo.

A message sent at tick ``t`` becomes readable at ``t + 1``. Correct
broadcasts go to every correct node; Byzantine senders pick their targets,
but once any correct node reads a Byzantine message every other correct
node gets it one tick later. Inactive nodes simply read their backlog when
they come back.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Set, Tuple

from ..core import SieveMessage


class Network:
    def __init__(self, correct_ids: Iterable[str]):
        self.correct_ids = sorted(correct_ids)
        self._inbox: Dict[str, List[Tuple[int, SieveMessage]]] = {n: [] for n in self.correct_ids}
        self._seen: Dict[str, Set[bytes]] = {n: set() for n in self.correct_ids}
        self._byzantine_ids: Set[bytes] = set()
        self._echoed: Set[bytes] = set()
        self.log: List[Tuple[int, SieveMessage]] = []  # (readable tick, message), in send order

    def broadcast(self, msg: SieveMessage, tick: int) -> None:
        for n in self.correct_ids:
            self._inbox[n].append((tick + 1, msg))
        self.log.append((tick + 1, msg))

    def send_byzantine(self, msg: SieveMessage, tick: int, targets: Optional[Iterable[str]] = None) -> None:
        self._byzantine_ids.add(msg.dpow)
        targets = self.correct_ids if targets is None else sorted(set(targets) & set(self.correct_ids))
        for n in targets:
            self._inbox[n].append((tick + 1, msg))
        self.log.append((tick + 1, msg))

    def collect(self, node: str, tick: int) -> List[SieveMessage]:
        """Everything readable by ``node`` at ``tick`` that it has not read yet."""
        box = self._inbox[node]
        ready = [m for (t, m) in box if t <= tick]
        if not ready:
            return []
        self._inbox[node] = [(t, m) for (t, m) in box if t > tick]
        seen = self._seen[node]
        out = []
        for m in ready:
            if m.dpow in seen:
                continue
            seen.add(m.dpow)
            out.append(m)
            if m.dpow in self._byzantine_ids and m.dpow not in self._echoed:
                self._echoed.add(m.dpow)
                for other in self.correct_ids:
                    if other != node:
                        self._inbox[other].append((tick + 1, m))
        return out

    def known_to_adversary(self, tick: int) -> List[SieveMessage]:
        """Every message sent so far that is readable at ``tick``."""
        return [m for (t, m) in self.log if t <= tick]
