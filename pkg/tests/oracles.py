"""Reference implementations used only by the tests.

Nothing here imports the search code under test: the consistent-DAG check is
rewritten from the definition and the heaviest DAG is found by exhaustive
layer-by-layer subset enumeration.
"""

import random
from fractions import Fraction
from itertools import combinations

from conftest import msg


def subsets(items, nonempty=True):
    items = list(items)
    for r in range(1 if nonempty else 0, len(items) + 1):
        yield from combinations(items, r)


def successor(layer, m, rho, store):
    ids = {x.dpow for x in layer}
    if not ids <= m.coffer:
        return False
    cw = sum(store[c].weight for c in m.coffer) if all(c in store for c in m.coffer) else None
    if cw is None:
        return False
    return sum(x.weight for x in layer) > (1 - Fraction(rho)) * cw


def layered_ok(dag, seed_step, rho, store):
    by = {}
    for x in dag:
        by.setdefault(x.timestamp, []).append(x)
    if not by or min(by) < seed_step:
        return False
    for r in range(seed_step, max(by)):
        for x in by.get(r + 1, []):
            if not successor(by.get(r, []), x, rho, store):
                return False
    return True


def brute_heaviest(m, pool, seed_step, rho, store=None):
    """Max weight of a timestamp-seed_step consistent DAG in pool containing m, or None."""
    store = store if store is not None else {x.dpow: x for x in pool}
    layers = {}
    for x in pool:
        layers.setdefault(x.timestamp, []).append(x)
    best = None

    def rec(r, prev, acc):
        nonlocal best
        if r >= seed_step + 1:
            best = acc if best is None else max(best, acc)
        for sub in subsets(layers.get(r + 1, [])):
            if r + 1 == seed_step + 1 and m not in sub:
                continue
            if all(successor(prev, x, rho, store) for x in sub):
                rec(r + 1, sub, acc + sum(x.weight for x in sub))

    for seed in subsets(layers.get(seed_step, [])):
        rec(seed_step, seed, sum(x.weight for x in seed))
    return best


def random_pool(rng, max_messages=12, top=3):
    """Small random pool with timestamps 0..top; coffers mostly reference the layer below."""
    pool, by_ts = [], {}
    n = rng.randint(3, max_messages)
    sizes = [1] * (top + 1)
    for _ in range(n - len(sizes)):
        sizes[rng.randrange(top + 1)] += 1
    count = 0
    for t, size in enumerate(sizes):
        for _ in range(size):
            coffer = []
            below = by_ts.get(t - 1, [])
            if below:
                mode = rng.random()
                if mode < 0.35:
                    coffer = list(below)
                else:
                    coffer = [x for x in below if rng.random() < 0.6]
                if t >= 2 and rng.random() < 0.15:
                    coffer.append(rng.choice(by_ts[t - 2]))
            label = f"p{rng.getrandbits(40)}-{count}"
            count += 1
            m = msg(label, t, [], rng.randint(1, 3))
            m = type(m)(m.payload, t, frozenset(x.dpow for x in coffer), 0, m.dpow, m.weight)
            pool.append(m)
            by_ts.setdefault(t, []).append(m)
    return pool


def random_dag(rng, pool, seed, seed_step, rho, store, greedy=False):
    """Grow a consistent DAG from a fixed seed, taking a random (or full) subset of successors per layer."""
    dag = list(seed)
    layer = list(seed)
    r = seed_step
    while layer:
        succ = [x for x in pool if x.timestamp == r + 1 and successor(layer, x, rho, store)]
        nxt = succ if greedy else [x for x in succ if rng.random() < 0.7]
        dag.extend(nxt)
        layer = nxt
        r += 1
    return dag


def clustered_pool(rng, max_messages=12, top=3, p_cross=0.25):
    """Two loose clusters per layer; some coffers reach across, which is where disjointness could break.

    Returns the pool and the timestamp-0 messages of the first cluster.
    """
    pool, by = [], {}
    n = rng.randint(6, max_messages)
    per = max(2, n // (top + 1))
    count = 0
    for t in range(top + 1):
        for i in range(per):
            side = i % 2
            coffer = []
            if t:
                own = by.get((t - 1, side), [])
                other = by.get((t - 1, 1 - side), [])
                coffer = list(own) if rng.random() < 0.75 else [x for x in own if rng.random() < 0.6]
                if rng.random() < p_cross:
                    coffer += [x for x in other if rng.random() < 0.5]
            w = rng.randint(1, 3)
            m = msg(f"k{rng.getrandbits(40)}-{count}", t, [], w)
            m = type(m)(m.payload, t, frozenset(x.dpow for x in coffer), 0, m.dpow, w)
            count += 1
            pool.append(m)
            by.setdefault((t, side), []).append(m)
    return pool, by.get((0, 0), [])
