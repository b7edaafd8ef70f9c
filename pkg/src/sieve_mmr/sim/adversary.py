"""Byzantine strategies.

Every strategy drives one Byzantine node. It may call the oracle with any
input (one pending call at a time), read every message sent so far, and send
arbitrary messages to chosen correct nodes. DPoW values come only from its
own oracle calls or from messages it has read.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..core import EMPTY_CHAIN, SieveMessage, encode_gamma, sort_messages
from ..mmr import MmrMessage, MmrNode
from ..sieve import SieveNode


@dataclass
class Evaluated:
    payload: bytes
    coffer: frozenset
    nonce: int
    dpow: bytes
    weight: int
    call_tick: int
    deliver_tick: int
    meta: Dict[str, Any] = field(default_factory=dict)

    def message(self, timestamp: int) -> SieveMessage:
        return SieveMessage(self.payload, timestamp, self.coffer, self.nonce, self.dpow, self.weight)


@dataclass
class Context:
    """What a Byzantine node can see and do during one tick."""

    tick: int
    step: int
    K: int
    horizon: int
    known: Dict[bytes, SieveMessage]
    origin: Dict[bytes, str]
    correct_ids: List[str]
    active_correct: Callable[[int], List[str]]
    sends: List[Tuple[SieveMessage, Optional[List[str]]]] = field(default_factory=list)

    @property
    def phase(self) -> int:
        return self.tick % self.K

    @property
    def first_tick(self) -> bool:
        return self.phase == 0

    @property
    def last_tick(self) -> bool:
        return self.phase == self.K - 1

    def with_timestamp(self, ts: int) -> List[SieveMessage]:
        return sort_messages(m for m in self.known.values() if m.timestamp == ts)

    def send(self, msg: SieveMessage, to: Optional[Sequence[str]] = None) -> None:
        self.sends.append((msg, None if to is None else sorted(to)))


class Agent:
    """Bookkeeping shared by the strategies: one outstanding oracle call, a stock of results."""

    def __init__(self, spec, scenario, oracle, seed, coalition=None):
        self.spec = spec
        # evaluations shared by the whole Byzantine coalition, keyed by label
        self.coalition = coalition if coalition is not None else {}
        self.id = spec.id
        self.scenario = scenario
        self.oracle = oracle
        self.params = dict(spec.params)
        self.rng = random.Random(f"adversary:{spec.id}:{seed}")
        self.pending: Optional[Tuple[bytes, frozenset, int, bytes, int, int, Dict[str, Any]]] = None
        self.stock: List[Evaluated] = []

    def request(self, ctx: Context, payload: bytes, coffer, w: int, **meta) -> bool:
        if self.pending is not None:
            return False
        coffer = frozenset(coffer)
        nonce = self.rng.getrandbits(64)
        gamma = encode_gamma(payload, coffer, nonce)
        if not self.oracle.request(gamma, w, ctx.tick):
            return False
        self.pending = (payload, coffer, nonce, gamma, w, ctx.tick, meta)
        return True

    def absorb(self, ctx: Context, responses) -> List[Evaluated]:
        fresh = []
        for dpow, gamma, w in responses:
            if self.pending is None or self.pending[3] != gamma or self.pending[4] != w:
                continue
            payload, coffer, nonce, _, _, call_tick, meta = self.pending
            self.pending = None
            ev = Evaluated(payload, coffer, nonce, dpow, w, call_tick, ctx.tick, meta)
            self.stock.append(ev)
            fresh.append(ev)
        return fresh

    def on_tick(self, ctx: Context, responses) -> None:
        self.absorb(ctx, responses)
        self.act(ctx)

    def act(self, ctx: Context) -> None:
        raise NotImplementedError

    # payload helpers

    def fork_payload(self, step: int) -> bytes:
        fork = EMPTY_CHAIN.extend((f"byz:{self.id}:{step}",), self.id)
        return MmrMessage(fork, fork if step % 2 == 0 else None).encode()

    def step_weight(self) -> int:
        """Heaviest single evaluation that finishes within one step."""
        return max(1, int(self.spec.power))


class Passive(Agent):
    """Runs the real protocol; its weight just adds to the total."""

    def __init__(self, spec, scenario, oracle, seed, coalition=None):
        super().__init__(spec, scenario, oracle, seed, coalition)
        if spec.power < 1:
            raise ValueError(f"{spec.id}: strategy {spec.strategy} needs power >= 1")
        self.mmr = MmrNode(spec.id, seed)
        self.sieve = SieveNode(
            spec.id, int(spec.power), scenario.K, scenario.rho, oracle, self._deliver, seed=seed,
        )
        self._fed: set = set()

    def _deliver(self, s, filtered):
        out = self.mmr.on_ttrb_deliver(s, [(m.payload, m.dpow, m.weight) for m in filtered])
        return self.transform(s, out.message).encode()

    def transform(self, s: int, msg: MmrMessage) -> MmrMessage:
        return msg

    def targets(self, ctx: Context) -> Optional[List[str]]:
        return None

    def on_tick(self, ctx: Context, responses) -> None:
        incoming = [m for i, m in ctx.known.items() if i not in self._fed]
        self._fed.update(m.dpow for m in incoming)
        for m in self.sieve.upon_new_tick(ctx.tick, sort_messages(incoming), responses):
            ctx.send(m, self.targets(ctx))


class LeaderGriefer(Passive):
    """Follows the Sieve timing but abuses its MMR messages.

    params:
      proposal: honest | fork | byzantine-block
        fork proposes a chain that does not extend the grade-0 chain;
        byzantine-block extends it with a Byzantine batch instead of a client one.
      targets: all | half   (half sends each message to a random half of the correct nodes)
    """

    def transform(self, s, msg):
        kind = self.params.get("proposal", "byzantine-block")
        if msg.proposal is None or kind == "honest":
            return msg
        batch = (f"byz:{self.id}:{s}",)
        if kind == "fork":
            return MmrMessage(msg.vote, EMPTY_CHAIN.extend(batch, self.id))
        if kind == "byzantine-block":
            base = msg.proposal.prefix(len(msg.proposal) - 1)
            return MmrMessage(msg.vote, base.extend(batch, self.id))
        raise ValueError(f"unknown proposal kind {kind!r}")

    def targets(self, ctx):
        if self.params.get("targets", "half") == "all":
            return None
        ids = list(ctx.correct_ids)
        self.rng.shuffle(ids)
        return ids[: max(1, len(ids) // 2)]


class TimeTravel(Agent):
    """Computes a message early, withholds it, and releases it later under a later timestamp.

    params: delay (steps, default 2), steps (generation steps; default every step).
    A message computed in step g is labelled g + delay - 1 and sent on that step's last tick.
    """

    def act(self, ctx):
        delay = int(self.params.get("delay", 2))
        steps = self.params.get("steps")
        if ctx.first_tick and (steps is None or ctx.step in steps):
            coffer = [m.dpow for m in ctx.with_timestamp(ctx.step - 1)]
            self.request(ctx, self.fork_payload(ctx.step + delay - 1), coffer, self.step_weight(), label=ctx.step + delay - 1)
        if ctx.last_tick:
            for ev in list(self.stock):
                if ev.meta["label"] == ctx.step:
                    ctx.send(ev.message(ctx.step))
                    self.stock.remove(ev)


class AntiqueTimestamper(Agent):
    """Keeps computing weight-``weight`` evaluations and stamps each ``lag`` steps later than its call.

    The coffer holds whatever timestamp-(label - 1) messages are known at call time.
    """

    def act(self, ctx):
        lag = int(self.params.get("lag", 1))
        w = int(self.params.get("weight", 1))
        if self.pending is None:
            label = ctx.step + lag
            coffer = [m.dpow for m in ctx.with_timestamp(label - 1)]
            self.request(ctx, self.fork_payload(label), coffer, w, label=label)
        if ctx.last_tick:
            for ev in list(self.stock):
                if ev.meta["label"] <= ctx.step:
                    if ev.meta["label"] == ctx.step:
                        ctx.send(ev.message(ctx.step))
                    self.stock.remove(ev)


class HistoryForger(Agent):
    """Pads past steps with fresh messages to mislead nodes that will bootstrap.

    Each evaluation is stamped with a random past step and points at the
    forger's own messages one step further back. It is sent only to correct
    nodes that are currently inactive (or to everyone when none are).
    """

    def __init__(self, spec, scenario, oracle, seed, coalition=None):
        super().__init__(spec, scenario, oracle, seed, coalition)
        self.forged: Dict[int, List[bytes]] = {}

    def act(self, ctx):
        depth = int(self.params.get("depth", 3))
        w = int(self.params.get("weight", 1))
        for ev in list(self.stock):
            ts = ev.meta["label"]
            asleep = [n for n in ctx.correct_ids if n not in ctx.active_correct(ctx.step)]
            ctx.send(ev.message(ts), asleep or None)
            self.forged.setdefault(ts, []).append(ev.dpow)
            self.stock.remove(ev)
        if self.pending is None and ctx.step > 0:
            ts = self.rng.randrange(max(0, ctx.step - depth), ctx.step)
            coffer = self.forged.get(ts - 1, [])
            self.request(ctx, self.fork_payload(ts), coffer, w, label=ts)


class Equivocator(Agent):
    """Sends conflicting, correctly timestamped messages to different correct nodes."""

    def act(self, ctx):
        w = int(self.params.get("weight", 1))
        if self.pending is None and not ctx.last_tick:
            coffer = [m.dpow for m in ctx.with_timestamp(ctx.step - 1)]
            side = len(self.stock) % 2
            payload = MmrMessage(EMPTY_CHAIN.extend((f"equiv:{self.id}:{ctx.step}:{side}",), self.id)).encode()
            self.request(ctx, payload, coffer, w, label=ctx.step)
        if ctx.last_tick:
            ready = [ev for ev in self.stock if ev.meta["label"] == ctx.step]
            ids = list(ctx.correct_ids)
            self.rng.shuffle(ids)
            half = max(1, len(ids) // 2)
            for i, ev in enumerate(ready):
                ctx.send(ev.message(ctx.step), ids[:half] if i % 2 == 0 else ids[half:] or ids[:half])
            self.stock = [ev for ev in self.stock if ev.meta["label"] > ctx.step]


class Scripted(Agent):
    """Replays an explicit list of actions, for hand-built scenarios.

    params.script entries:
      {tick: t, request: label, coffer: [ref, ...], weight: w, payload: text}
      {tick: t, send: label, timestamp: s, to: all | [node ids]}
    A ref is either an earlier label or ``node@step`` for the message that
    node sent with that timestamp. Labels are shared across the coalition,
    so one Byzantine node may release what another computed.
    """

    def __init__(self, spec, scenario, oracle, seed, coalition=None):
        super().__init__(spec, scenario, oracle, seed, coalition)
        self.by_label: Dict[str, Evaluated] = self.coalition
        self.script = sorted(self.params.get("script", []), key=lambda a: a["tick"])

    def _resolve(self, ctx: Context, ref: str) -> bytes:
        if ref in self.by_label:
            return self.by_label[ref].dpow
        if "@" in ref:
            node, ts = ref.split("@")
            for mid, m in ctx.known.items():
                if ctx.origin.get(mid) == node and m.timestamp == int(ts):
                    return mid
        raise ValueError(f"{self.id}: cannot resolve coffer reference {ref!r} at tick {ctx.tick}")

    def on_tick(self, ctx, responses):
        for ev in self.absorb(ctx, responses):
            self.by_label[ev.meta["label"]] = ev
        for action in self.script:
            if action["tick"] != ctx.tick:
                continue
            if "request" in action:
                coffer = [self._resolve(ctx, r) for r in action.get("coffer", [])]
                payload = action.get("payload")
                payload = self.fork_payload(ctx.step) if payload is None else str(payload).encode()
                if not self.request(ctx, payload, coffer, int(action.get("weight", 1)), label=action["request"]):
                    raise ValueError(f"{self.id}: request {action['request']!r} rejected, a call is already pending")
            elif "send" in action:
                ev = self.by_label.get(action["send"])
                if ev is None:
                    raise ValueError(f"{self.id}: {action['send']!r} not evaluated by tick {ctx.tick}")
                to = action.get("to", "all")
                ctx.send(ev.message(int(action["timestamp"])), None if to == "all" else list(to))

    def act(self, ctx):
        pass


STRATEGIES: Dict[str, type] = {
    "passive": Passive,
    "leader-griefer": LeaderGriefer,
    "time-travel": TimeTravel,
    "antique-timestamper": AntiqueTimestamper,
    "history-forger": HistoryForger,
    "equivocator": Equivocator,
    "scripted": Scripted,
}
