"""One validator equivocates; the honest committee stays in lockstep.

Validator 3 emits three conflicting block variants per round, each chained
on the matching variant of its previous block and unicast to a different
subset of peers, so no two honest validators necessarily hold the same
variant set at the same time.  Support is counted per exact variant while
blame requires omitting the slot entirely, so whichever variant gathers
4f+1 references is the one every honest validator commits -- holding or
missing the other variants must not change any verdict.

The run happens under adversarial delays before stabilization (messages may
be held back up to the pre-GST cap), which maximizes variant-set skew.  The
demo then writes every validator's commit log and runs the same prefix
verification the `dagbft verify` subcommand uses.
"""

from __future__ import annotations

import tempfile
from collections import Counter
from pathlib import Path

from dagbft.report import verify_logs, write_run
from dagbft.scenario import load_scenario
from dagbft.simnet import run_scenario

EQUIVOCATOR = 3


def main() -> None:
    scenario = load_scenario("scenarios/equivocation.yaml")
    report = run_scenario(scenario)

    print(f"equivocator: v{EQUIVOCATOR} "
          f"({scenario.equivocators[EQUIVOCATOR]} variants per round)\n")

    # The total order is not variant-free: a committed leader drags its whole
    # causal history in, and different later blocks reference different
    # variants, so several variants of one round usually land in the order.
    # Containment means every honest validator lands the SAME variants at the
    # SAME positions, not that the extra variants disappear.
    print("equivocator blocks in the total order, per honest validator:")
    orders = set()
    for outcome in report.honest_outcomes():
        own = [r.block_ref for r in outcome.commit_records
               if r.block_ref.author == EQUIVOCATOR]
        variants_per_round = Counter(ref.round for ref in own)
        orders.add(tuple(ref.to_text() for ref in own))
        print(f"  v{outcome.vid}: {len(own)} blocks ordered, up to "
              f"{max(variants_per_round.values())} variants of a single round")
    print(f"  identical sequence at every honest validator: {len(orders) == 1}")

    slots = {}
    for outcome in report.honest_outcomes():
        mine = tuple(str(s) for s in outcome.commit_slots)
        slots.setdefault(mine, []).append(outcome.vid)
    agreed = len(slots) == 1 or all(
        a == b or a[: len(b)] == b or b[: len(a)] == a
        for a in slots for b in slots
    )
    print(f"\nhonest commit-slot sequences are prefix-consistent: {agreed}")

    with tempfile.TemporaryDirectory() as tmp:
        paths = write_run(report, Path(tmp))
        honest_logs = [paths[f"commit-v{v.vid}"] for v in report.honest_outcomes()]
        result = verify_logs(honest_logs)
        print(f"verify over {len(honest_logs)} honest logs: "
              f"{'OK' if result.ok else 'FAIL'} -- {result.message}")


if __name__ == "__main__":
    main()
