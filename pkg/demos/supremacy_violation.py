"""What happens when the adversary out-computes the correct nodes.

The scenario is flagged as a violation experiment, so the run is reported
rather than rejected, and its verdicts are informative only.
"""

from sieve_mmr import sim

r = sim.run(sim.load(sim.resolve("supremacy-violation")))
print("exit code:", r.exit_code)
sup = r.checker.verdicts["correct-supremacy"]
print("correct supremacy:", sup.status, sup.first_failure)
for name, status in r.verdicts.items():
    if status == "fail":
        print(f"  {name} fails once supremacy is gone")
