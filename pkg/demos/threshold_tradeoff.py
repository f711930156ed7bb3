"""How far does lowering the proposal gate actually speed up rounds?

A validator normally advances to round r+1 after holding 4f+1 round-r
blocks.  The unsafe variant lowers that gate (and the matching structural
minimum) to ceil(2n/3), which can only help when the network is
heterogeneous enough that the last few blocks are the expensive ones.

The catch: heterogeneity in OUTBOUND links alone does not show up in
steady-state round durations.  A slow sender whose own gate is fed by fast
peers settles a constant number of rounds behind, and from there its stale
blocks arrive exactly when the fast validators need them -- the pipeline
absorbs the lag and both gates cost the same.  To make the gate visible the
stragglers must be production-limited: give them slow INBOUND links so they
cannot mint rounds quickly, and fast outbound links so their (rare) blocks
are what everyone else's standard gate waits for.

This demo runs that topology at n=6 (and optionally n=11, where three
stragglers widen the effect) under both gates and prints the median round
duration at the fast validators.
"""

from __future__ import annotations

import argparse
import statistics

from dagbft.committee import Committee
from dagbft.scenario import DelayModel, Scenario
from dagbft.simnet import run_scenario

STRAGGLERS = {6: {4, 5}, 11: {8, 9, 10}}
SLOW_IN_MS = {6: 70.0, 11: 240.0}


def straggler_scenario(n: int, unsafe: bool) -> Scenario:
    slow = SLOW_IN_MS[n]
    lagging = STRAGGLERS[n]
    matrix = [
        [0.0 if i == j else (slow if j in lagging else 10.0) for j in range(n)]
        for i in range(n)
    ]
    return Scenario(
        n=n,
        leaders_per_round=1,
        pipelining=True,
        delta_ms=300.0,
        gst_ms=0.0,
        delay=DelayModel(kind="matrix", matrix_ms=tuple(map(tuple, matrix))),
        duration_ms=3000.0 if n == 6 else 8000.0,
        seed=f"threshold-{n}",
        unsafe_parent_threshold=unsafe,
    )


def median_round_ms(report, fast: set[int]) -> float:
    samples = [
        m.duration_us / 1000
        for v in report.honest_outcomes()
        if v.vid in fast
        for m in v.round_metrics
        if m.round >= 1
    ]
    return statistics.median(samples)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--large", action="store_true", help="also run n=11")
    args = parser.parse_args()

    sizes = [6, 11] if args.large else [6]
    for n in sizes:
        fast = set(range(n)) - STRAGGLERS[n]
        standard = run_scenario(straggler_scenario(n, unsafe=False))
        unsafe = run_scenario(straggler_scenario(n, unsafe=True))
        med_std = median_round_ms(standard, fast)
        med_un = median_round_ms(unsafe, fast)
        committee = Committee(n)
        print(f"n={n}: gate 4f+1 needs {committee.quorum_threshold()} blocks, "
              f"ceil(2n/3) needs {committee.unsafe_parent_threshold()}")
        print(f"  median round at fast validators: "
              f"standard {med_std:6.1f} ms | unsafe {med_un:6.1f} ms "
              f"| saved {med_std - med_un:.1f} ms")
        for label, rep in (("standard", standard), ("unsafe  ", unsafe)):
            slots = {tuple(str(s) for s in v.commit_slots) for v in rep.honest_outcomes()}
            consistent = all(
                a[: len(b)] == b or b[: len(a)] == a for a in slots for b in slots
            )
            print(f"  {label}: honest commit sequences prefix-consistent: {consistent}")


if __name__ == "__main__":
    main()
