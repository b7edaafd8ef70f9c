import hashlib
import random

import pytest

from sieve_mmr.core import EMPTY_CHAIN, ModelAssumptionError
from sieve_mmr.mmr import (
    MmrMessage,
    MmrNode,
    MoreThanTwoMaximal,
    MultipleMaximalGrade1,
    Tally,
    elect_leader,
    filler_batch,
    grade1_chain,
    maximal_grade0,
    mmr_step,
)

X = EMPTY_CHAIN.extend(["x"])
XY = X.extend(["y"])
Z = EMPTY_CHAIN.extend(["z"])


def d(i):
    return hashlib.sha256(b"dpow%d" % i).digest()


def test_message_roundtrip():
    m = MmrMessage(XY, Z.extend(["q"], "n2"))
    back = MmrMessage.decode(m.encode())
    assert back == m
    assert back.proposal.blocks[-1].submitter == "n2"
    assert MmrMessage.decode(MmrMessage(X).encode()).proposal is None


@pytest.mark.parametrize("junk", [b"", b"\xff\xfe", b"[]", b'{"vote": 3}', b'{"vote": [[["x"], 1]]}', b'{"nope": []}'])
def test_garbage_decodes_to_abstention(junk):
    assert MmrMessage.decode(junk) is None


def test_tally_is_prefix_closed():
    t = Tally([(MmrMessage(XY), 2), (MmrMessage(X), 1), (MmrMessage(Z), 1), (None, 1)])
    assert t.total == 5
    assert t.weight[tuple(X.digests())] == 3
    assert {c.tip for c in t.grade0()} == {None, X.tip, XY.tip}
    assert {c.tip for c in t.grade1()} == {None}


def test_grade1_and_maximal_grade0():
    votes = [(MmrMessage(XY), 3), (MmrMessage(Z), 2)]
    assert grade1_chain(votes) == EMPTY_CHAIN
    tops = maximal_grade0(votes)
    assert {c.tip for c in tops} == {XY.tip, Z.tip}
    assert grade1_chain([(MmrMessage(XY), 3), (MmrMessage(X), 1)]) == XY
    assert grade1_chain([(MmrMessage(XY), 2), (MmrMessage(X), 2)]) == X


def test_assumption_errors_never_fire_on_real_tallies():
    assert issubclass(MultipleMaximalGrade1, ModelAssumptionError)
    assert issubclass(MoreThanTwoMaximal, ModelAssumptionError)
    rng = random.Random(0)
    chains = [EMPTY_CHAIN, X, XY, Z, Z.extend(["w"]), EMPTY_CHAIN.extend(["v"])]
    for _ in range(500):
        votes = [(MmrMessage(rng.choice(chains)), rng.randint(1, 4)) for _ in range(rng.randint(1, 6))]
        grade1_chain(votes)
        assert len(maximal_grade0(votes)) <= 2


def test_leader_is_order_independent_and_weight_biased():
    rng = random.Random(9)
    wins = 0
    trials = 3000
    for i in range(trials):
        a, b = rng.randbytes(32), rng.randbytes(32)
        li = elect_leader([(None, a, 2), (None, b, 1)])
        lj = elect_leader([(None, b, 1), (None, a, 2)])
        assert (li == 0) == (lj == 1)
        wins += li == 0
    # weight 2 against weight 1: wins with probability 2/3
    assert abs(wins / trials - 2 / 3) < 0.04
    with pytest.raises(ValueError):
        elect_leader([])


def test_step_zero_proposes_oldest_batch():
    out = mmr_step(0, [], [("t1",), ("t2",)], "n1")
    assert out.message.vote == EMPTY_CHAIN
    assert out.message.proposal.blocks[0].transactions == ("t1",)
    assert mmr_step(0, [], [], "n1").message.proposal.blocks[0].transactions == filler_batch("n1", 0)


def test_odd_step_follows_leader_and_commits_grade1():
    props = [(MmrMessage(X, X.extend([f"p{i}"])), d(i), 1) for i in range(4)]
    leader = elect_leader(props)
    out = mmr_step(1, props, [], "n1")
    assert out.leader == d(leader)
    assert out.message.vote == props[leader][0].proposal
    assert out.committed == X


def test_odd_step_ignores_leader_off_grade0():
    honest = [(MmrMessage(X, X.extend([f"p{i}"])), d(i), 1) for i in range(3)]
    # heavy leader votes like everyone else but proposes off the grade-0 chain
    rogue = (MmrMessage(X, Z.extend(["evil"])), d(99), 60)
    out = mmr_step(1, honest + [rogue], [], "n1")
    assert out.leader == d(99)
    assert out.message.vote == X


def test_undecodable_leader_payload():
    out = mmr_step(1, [(None, d(1), 3)], [], "n1")
    assert out.message.vote == EMPTY_CHAIN
    assert out.committed == EMPTY_CHAIN


def run_synchronous(n, steps):
    nodes = [MmrNode(f"n{i}", seed=1) for i in range(n)]
    prev = []
    for s in range(steps):
        if s % 2 == 0:
            for nd in nodes:
                nd.submit((f"client:{s}",))
        outs = [nd.on_ttrb_deliver(s, prev) for nd in nodes]
        prev = [(o.message.encode(), d(1000 * s + i), 1) for i, o in enumerate(outs)]
    return nodes


def test_all_correct_commits_three_steps_after_submission():
    nodes = run_synchronous(4, 12)
    tips = {nd.committed.tip for nd in nodes}
    assert len(tips) == 1
    chain = nodes[0].committed
    assert [b.transactions for b in chain.blocks] == [(f"client:{s}",) for s in range(0, 10, 2)]
    # batch from step s is first in a commit at step s + 3
    for s, out in nodes[0].outputs:
        if out.committed is not None and s >= 3:
            assert out.committed.contains_transactions((f"client:{s - 3}",))
            assert not out.committed.contains_transactions((f"client:{s - 1}",))


def test_committed_batches_leave_the_pool():
    nodes = run_synchronous(3, 6)
    assert ("client:0",) not in nodes[0].submitted
    nodes[0].submit(("client:0",))
    assert ("client:0",) not in nodes[0].submitted


def test_step_output_depends_only_on_inputs():
    prev = [(MmrMessage(X, X.extend(["p"])).encode(), d(5), 1), (MmrMessage(X).encode(), d(6), 2)]
    seasoned = MmrNode("n9", seed=3)
    seasoned.on_ttrb_deliver(3, prev)
    fresh = MmrNode("n9", seed=3)
    assert seasoned.on_ttrb_deliver(4, prev).message == fresh.on_ttrb_deliver(4, prev).message
    decoded = [(MmrMessage.decode(p), dd, w) for p, dd, w in prev]
    assert mmr_step(4, decoded, [], "n9", 3).message == fresh.outputs[-1][1].message
