"""A node that joins late cannot rely on a previous filtered set.

Replaying Online-Sieve from step 0 on what the newcomer sees lets two late
Byzantine timestamp-0 messages outweigh the honest ones, so the honest step-1
messages are dropped. Bootstrap-Sieve instead looks for the heaviest
consistent DAG behind each message and discards a message when a heavier
disjoint DAG exists.
"""

from sieve_mmr import sim


def show(mode):
    sc = sim.load(sim.resolve("fig4"))
    if mode:
        sc = sc.with_overrides(mode=mode)
    r = sim.run(sc)
    label = mode or "bootstrap"
    print(f"{label:>13}: n4 delivers {r.filtered_labels('n4', 2)} at step 2, TTRB2 {r.verdicts['TTRB2']}")


show("naive-online")
show(None)

print()
r = sim.run(sim.load(sim.resolve("fig5")))
print("fig5 joiner n4 at step 2:", r.filtered_labels("n4", 2))
print("fig5 n1        at step 2:", r.filtered_labels("n1", 2))
