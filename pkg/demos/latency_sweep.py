"""Commit latency with and without an adversarial leader.

With every node correct each client batch commits exactly three steps after
it was submitted. With two leader griefers holding a third of the power the
mean grows, but a correct leader still wins often enough to keep it bounded.
"""

import sys

from sieve_mmr.cli import aggregate, sweep

seeds = range(int(sys.argv[1]) if len(sys.argv) > 1 else 20)

for name in ("all-correct", "adversarial-leader"):
    agg = aggregate(sweep(name, seeds))
    trials = agg["leader_trials"] or 1
    print(
        f"{name:>18}: {agg['status']}, {agg['blocks_committed']} blocks, "
        f"latency min/mean/max {agg['block_latency_min']}/{agg['block_latency_mean']}/{agg['block_latency_max']}, "
        f"leader success {agg['leader_success'] / trials:.2f}"
    )
