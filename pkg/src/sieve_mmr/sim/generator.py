"""Random small scenarios for property runs.

Byzantine powers are drawn and then shrunk until a static bound shows the
run cannot break correct supremacy: over any step interval a Byzantine node
can finish at most ``floor(T * P / (K - 1))`` weight, where ``T`` counts its
active ticks in the interval minus the final one (the last tick can only
deliver, not compute). Correct weight is exact: every active correct node
finishes one evaluation of weight ``P`` per step.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import List, Optional, Sequence

from .scenario import NodeSpec, Scenario, validate

GENERATED_STRATEGIES = (
    "passive",
    "leader-griefer",
    "time-travel",
    "antique-timestamper",
    "history-forger",
    "equivocator",
)


def _activity(rng: random.Random, horizon: int, p_always: float) -> Optional[frozenset]:
    if rng.random() < p_always:
        return None
    active = set(range(horizon))
    for _ in range(rng.randint(1, 2)):
        start = rng.randrange(horizon)
        length = rng.randint(1, max(1, horizon // 4))
        active -= set(range(start, start + length))
    return frozenset(active)


def byzantine_capacity(spec: NodeSpec, K: int, first: int, last: int) -> int:
    ticks = sum(K for s in range(first, last + 1) if spec.is_active(s))
    if spec.is_active(last):
        ticks -= 1
    return math.floor(Fraction(ticks) * spec.power / (K - 1))


def static_supremacy_ok(sc: Scenario) -> bool:
    rho = sc.rho
    for first in range(sc.horizon):
        for last in range(first, sc.horizon):
            byz = sum(byzantine_capacity(n, sc.K, first, last) for n in sc.byzantine_nodes)
            if byz == 0:
                continue
            correct = sum(int(n.power) for n in sc.correct_nodes for s in range(first, last + 1) if n.is_active(s))
            if not byz * (1 - rho) < rho * correct:
                return False
    return True


def random_scenario(
    seed: int,
    rho: Optional[Fraction] = None,
    strategies: Sequence[str] = GENERATED_STRATEGIES,
    max_nodes: int = 8,
    max_steps: int = 30,
) -> Scenario:
    rng = random.Random(f"scenario:{seed}")
    rho = rho if rho is not None else rng.choice([Fraction(1, 3), Fraction(1, 2)])
    K = rng.choice([2, 3])
    horizon = rng.randint(6, max_steps)
    n_correct = rng.randint(2, min(5, max_nodes - 1))
    n_byz = rng.randint(1, min(3, max_nodes - n_correct))
    nodes: List[NodeSpec] = []
    for i in range(n_correct):
        # c0 stays up so every step has an active correct node
        act = None if i == 0 else _activity(rng, horizon, 0.5)
        nodes.append(NodeSpec(f"c{i}", "correct", Fraction(rng.randint(1, 3)), act))
    for i in range(n_byz):
        strategy = rng.choice(list(strategies))
        params = {}
        if strategy == "leader-griefer":
            params = {
                "proposal": rng.choice(["honest", "fork", "byzantine-block"]),
                "targets": rng.choice(["all", "half"]),
            }
        elif strategy == "time-travel":
            params = {"delay": rng.randint(2, 4)}
        elif strategy == "antique-timestamper":
            params = {"lag": rng.randint(1, 3)}
        elif strategy == "history-forger":
            params = {"depth": rng.randint(1, 4)}
        power = Fraction(rng.choice([1, 2, 3]), rng.choice([1, 2]))
        if strategy in ("passive", "leader-griefer"):
            power = max(power, Fraction(1))
        nodes.append(NodeSpec(f"z{i}", "byzantine", power, _activity(rng, horizon, 0.7), strategy, params))
    sc = Scenario(
        name=f"random-{seed}",
        K=K,
        rho=rho,
        horizon=horizon,
        seed=seed,
        nodes=nodes,
    )
    # shrink Byzantine power until the static bound guarantees supremacy
    while not static_supremacy_ok(sc):
        worst = max(sc.byzantine_nodes, key=lambda n: n.power)
        floor = Fraction(1) if worst.strategy in ("passive", "leader-griefer") else Fraction(1, 4)
        if worst.power > floor:
            worst.power = max(floor, worst.power * Fraction(2, 3))
        else:
            sc.nodes = [n for n in sc.nodes if n is not worst]
            if not sc.byzantine_nodes:
                break
    validate(sc)
    return sc
