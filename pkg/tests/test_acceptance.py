"""Acceptance criteria. Each test prints one PASS/FAIL line, then asserts."""

import hashlib
import math
import random
import time
from fractions import Fraction

import pytest

from oracles import brute_heaviest, clustered_pool, layered_ok, random_dag, random_pool
from sieve_mmr import sim
from sieve_mmr.powlib import CountingHash, PowParams, derive_indices, prove, tree_depth, verify, verify_bytes
from sieve_mmr.sieve import find_heaviest_consistent_dag
from sieve_mmr.sim import Trace, load, resolve, shipped
from sieve_mmr.sim.generator import random_scenario

THIRD = Fraction(1, 3)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail, elapsed, limit=None):
        timing = f"{elapsed:.2f}s" + (f" (limit {limit}s)" if limit else "")
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2} {name}: {'PASS' if ok else 'FAIL'} | {detail} | {timing}")

    return emit


def scenario(name, **kw):
    return load(resolve(name)).with_overrides(**kw)


def step_sets(result, nodes, step):
    return {n: result.filtered_labels(n, step) for n in nodes}


def test_01_fig3_online_sieve(report):
    t0 = time.perf_counter()
    r = sim.run(scenario("fig3"))
    sets = step_sets(r, [n.id for n in r.scenario.correct_nodes], 2)
    elapsed = time.perf_counter() - t0
    want = ["c", "n1@1", "n2@1"]
    ok = all(v == want for v in sets.values()) and elapsed < 1
    report(1, "fig3 scenario Online-Sieve", ok, f"step-2 sets {sets}, b discarded", elapsed, 1)
    assert ok


def test_02_fig5_bootstrap_sieve(report):
    t0 = time.perf_counter()
    r = sim.run(scenario("fig5"))
    got = r.filtered_labels("n4", 2)
    elapsed = time.perf_counter() - t0
    ok = got == ["c", "n1@1", "n2@1"] and elapsed < 1
    report(2, "fig5 scenario Bootstrap-Sieve", ok, f"joining node step-2 set {got}", elapsed, 1)
    assert ok


def test_03_fig4_cold_start(report):
    t0 = time.perf_counter()
    naive = sim.run(scenario("fig4", mode="naive-online"))
    boot = sim.run(scenario("fig4"))
    elapsed = time.perf_counter() - t0
    naive_set, boot_set = naive.filtered_labels("n4", 2), boot.filtered_labels("n4", 2)
    ok = (
        "n1@1" not in naive_set
        and naive.verdicts["TTRB2"] == "fail"
        and "n1@1" in boot_set
        and boot.verdicts["TTRB2"] == "pass"
        and elapsed < 1
    )
    report(3, "fig4 scenario naive vs bootstrap", ok, f"naive {naive_set} TTRB2={naive.verdicts['TTRB2']}; bootstrap {boot_set}", elapsed, 1)
    assert ok


RANDOM_RUNS = 1000


@pytest.fixture(scope="module")
def random_suite():
    t0 = time.perf_counter()
    rows = []
    for seed in range(RANDOM_RUNS):
        sc = random_scenario(seed)
        r = sim.run(sc)
        rows.append((sc, {n: (v.status, v.checks) for n, v in r.checker.verdicts.items()}, r.supremacy_violated))
    return rows, time.perf_counter() - t0


def test_04_ttrb_random_suite(report, random_suite):
    rows, elapsed = random_suite
    valid = [v for sc, v, bad in rows if not bad and not sc.violation_experiment]
    failed = [i for i, v in enumerate(valid) if v["TTRB1"][0] == "fail" or v["TTRB2"][0] == "fail"]
    checks = sum(v["TTRB1"][1] + v["TTRB2"][1] for v in valid)
    half = sum(1 for sc, _, _ in rows if sc.rho == Fraction(1, 2))
    ok = len(valid) >= 1000 and not failed and elapsed < 600
    report(4, "TTRB over random scenarios", ok,
           f"{len(valid)} audited runs ({half} at rho=1/2), {checks} checks, {len(failed)} failing", elapsed, 600)
    assert ok


def test_05_consistency_random_suite(report, random_suite):
    rows, elapsed = random_suite
    strong = [v for sc, v, bad in rows if sc.rho == THIRD and not bad]
    names = ("commit-consistency", "grade1-unique", "grade0-at-most-two")
    failed = [v for v in strong if any(v[n][0] == "fail" for n in names)]
    commits = sum(v["commit-consistency"][1] for v in strong)
    ok = len(strong) >= 300 and not failed
    report(5, "Consistency at rho=1/3", ok, f"{len(strong)} runs, {commits} commit checks, {len(failed)} failing", elapsed)
    assert ok


def test_06_cl1_best_case_latency(report):
    t0 = time.perf_counter()
    wrong = []
    measured = 0
    for seed in range(100):
        r = sim.run(scenario("all-correct", seed=seed))
        horizon = r.scenario.horizon
        for batch, lat in r.tracker.block_latencies().items():
            s = r.tracker.submitted[batch]
            if s + 3 < horizon:
                measured += 1
                if lat != 3:
                    wrong.append((seed, batch, lat))
    elapsed = time.perf_counter() - t0
    ok = measured > 0 and not wrong
    report(6, "CL1 latency exactly 3", ok, f"{measured} blocks over 100 seeds, {len(wrong)} off", elapsed)
    assert ok


def test_07_cl2_adversarial_latency(report):
    t0 = time.perf_counter()
    lats, success, trials, seed = [], 0, 0, 0
    while len(lats) < 500:
        r = sim.run(scenario("adversarial-leader", seed=seed))
        assert r.exit_code == 0
        lats.extend(v for v in r.tracker.block_latencies().values() if v is not None)
        success += r.metrics["leader_success"]
        trials += r.metrics["leader_trials"]
        seed += 1
    elapsed = time.perf_counter() - t0
    mean = sum(lats) / len(lats)
    rate = success / trials
    sigma = math.sqrt((1 / 3) * (2 / 3) / trials)
    ok = mean <= 7.5 and rate > 1 / 3 - 3 * sigma and elapsed < 600
    report(7, "CL2 adversarial latency", ok,
           f"{len(lats)} commits over {seed} seeds, mean {mean:.3f} (<= 7.5), leader success {success}/{trials} = {rate:.3f} (> {1/3 - 3*sigma:.3f})",
           elapsed, 600)
    assert ok


def test_08_consistent_dag_oracle(report):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    mismatches, nonempty = 0, 0
    for _ in range(500):
        rho = rng.choice([THIRD, Fraction(1, 2), Fraction(2, 5)])
        pool = random_pool(rng, 12)
        seed_step = rng.choice([0, 1])
        m = rng.choice([x for x in pool if x.timestamp == seed_step + 1])
        found = find_heaviest_consistent_dag(m, pool, seed_step, rho)
        want = brute_heaviest(m, pool, seed_step, rho)
        got = None
        if found is not None:
            dag = found[0]
            if m in dag and layered_ok(dag, seed_step, rho, {x.dpow: x for x in pool}):
                got = sum(x.weight for x in dag)
            else:
                got = -1
        nonempty += want is not None
        mismatches += got != want
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0
    report(8, "Heaviest consistent DAG vs exhaustive", ok, f"500 pools ({nonempty} with a DAG), {mismatches} mismatches", elapsed)
    assert ok


def test_09_disjoint_dags(report):
    t0 = time.perf_counter()
    rng = random.Random(77)
    pairs = overlaps = grown = 0
    while pairs < 500:
        rho = rng.choice([THIRD, Fraction(2, 5), Fraction(1, 2)])
        if rng.random() < 0.7:
            pool, left = clustered_pool(rng, 12)
        else:
            pool, left = random_pool(rng, 12), []
        store = {x.dpow: x for x in pool}
        base = [x for x in pool if x.timestamp == 0]
        if len(base) < 2:
            continue
        if left and len(left) < len(base):
            s1 = list(left)
            s2 = [x for x in base if x not in left]
        else:
            rng.shuffle(base)
            cut = rng.randint(1, len(base) - 1)
            s1, s2 = base[:cut], base[cut:]
        greedy = rng.random() < 0.5
        d1 = random_dag(rng, pool, s1, 0, rho, store, greedy)
        d2 = random_dag(rng, pool, s2, 0, rho, store, greedy)
        assert layered_ok(d1, 0, rho, store) and layered_ok(d2, 0, rho, store)
        pairs += 1
        grown += len(d1) > len(s1) and len(d2) > len(s2)
        for ts in range(4):
            l1 = {x for x in d1 if x.timestamp == ts}
            l2 = {x for x in d2 if x.timestamp == ts}
            overlaps += bool(l1 & l2)
    elapsed = time.perf_counter() - t0
    ok = overlaps == 0
    report(9, "Disjoint seeds stay disjoint", ok, f"{pairs} pairs ({grown} with both DAGs above the seed), {overlaps} overlapping layers", elapsed)
    assert ok


def test_10_merkle_pow(report):
    t0 = time.perf_counter()
    chi = hashlib.sha256(b"acceptance").digest()
    problems, flips = [], 0
    for w in (16, 64, 256):
        for k in (4, 8):
            params = PowParams(k)
            hp, hv, hd = CountingHash(), CountingHash(), CountingHash()
            proof = prove(chi, w, params, hp)
            if not verify(proof, chi, w, params, hv):
                problems.append((w, k, "round-trip"))
            derive_indices(proof.root, w, k, hd)
            retries = hd.calls - k
            if not (2 * w - 1 <= hp.calls <= 2 * w + k + retries):
                problems.append((w, k, "prover", hp.calls))
            if hv.calls > k * (tree_depth(w) + 1) + hd.calls:
                problems.append((w, k, "verifier", hv.calls))
            blob = proof.to_bytes()
            for i in range(len(blob) * 8):
                mutated = bytearray(blob)
                mutated[i // 8] ^= 1 << (i % 8)
                flips += 1
                if verify_bytes(bytes(mutated), chi, w, params):
                    problems.append((w, k, "tamper", i))
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 30
    report(10, "Merkle DPoW", ok, f"6 parameter sets, {flips} single-bit tampers rejected, problems {problems[:3]}", elapsed, 30)
    assert ok


def test_11_determinism(report):
    t0 = time.perf_counter()
    diffs = []
    names = shipped()
    for name in names:
        a = sim.run(scenario(name), Trace()).trace_digest
        b = sim.run(scenario(name), Trace()).trace_digest
        if a != b:
            diffs.append(name)
    elapsed = time.perf_counter() - t0
    ok = not diffs
    report(11, "Determinism", ok, f"{len(names)} shipped scenarios run twice, {len(diffs)} digest mismatches", elapsed)
    assert ok
