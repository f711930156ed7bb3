"""Crash the round-4 leader and watch the committee route around it.

Validator 2 stops just before proposing its round-4 block.  From then on
every sixth round has no leader block, and honest validators must decide
those slots absent: each such slot is skipped once 4f+1 decision-round
blocks omit it.  Round advancement shows the cost: a leaderless round ends
either on the 2-delta timeout or -- with the blame shortcut enabled -- as
soon as 2f+1 blame votes arrive, whichever is earlier.

The demo makes a point of WHEN the shortcut pays.  In a perfectly
symmetric network every validator enters a leaderless round at the same
instant, all timers expire together, and a blame vote (sent at expiry)
cannot outrun anyone's deadline: the shortcut is a no-op.  Skew the links
-- here one pair of validators talks over a 70 ms line inside a 10 ms mesh
-- and round entries stagger, so early validators' blames reach the
laggards well before the laggards' own timers fire.
"""

from __future__ import annotations

import argparse
import dataclasses
import statistics

from dagbft.scenario import DelayModel, load_scenario
from dagbft.simnet import run_scenario

CRASHED = 2


def leaderless_rounds(report) -> set[int]:
    n = report.scenario["n"]
    crash_round = report.scenario["faults"]["crashes"][str(CRASHED)]
    top = max(v.max_round_seen for v in report.honest_outcomes())
    return {r for r in range(1, top + 1) if r % n == CRASHED and r >= crash_round}


def leaderless_cost_ms(report, dead: set[int]) -> list[float]:
    return [
        m.duration_us / 1000
        for v in report.honest_outcomes()
        for m in v.round_metrics
        if m.round in dead
    ]


def skewed(scenario) -> "Scenario":
    """Same committee and faults, but validators 3 and 4 share a slow link."""
    n = scenario.n
    matrix = [[10.0] * n for _ in range(n)]
    for i in range(n):
        matrix[i][i] = 0.0
    matrix[3][4] = matrix[4][3] = 70.0
    model = DelayModel(kind="matrix", matrix_ms=tuple(map(tuple, matrix)), jitter_ms=4.0)
    return dataclasses.replace(scenario, delay=model, delta_ms=80.0)


def compare(tag: str, scenario) -> None:
    with_blames = run_scenario(dataclasses.replace(scenario, optimization=True))
    timeout_only = run_scenario(dataclasses.replace(scenario, optimization=False))
    dead = leaderless_rounds(with_blames)
    print(f"\n{tag}")
    for label, report in (("blames ON ", with_blames), ("blames OFF", timeout_only)):
        costs = leaderless_cost_ms(report, dead)
        reasons = {
            m.reason
            for v in report.honest_outcomes()
            for m in v.round_metrics
            if m.round in dead
        }
        print(f"  {label}: leaderless rounds cost mean "
              f"{statistics.mean(costs):6.1f} ms  (exit reasons: {sorted(reasons)})")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="scenarios/crash_faults.yaml")
    args = parser.parse_args()

    base = load_scenario(args.scenario)
    report = run_scenario(base)
    dead = leaderless_rounds(report)
    print(f"crashed validator: v{CRASHED}; leaderless rounds observed: {sorted(dead)}")

    witness = report.honest_outcomes()[0]
    print(f"\nround timeline at v{witness.vid} (first 10 rounds):")
    for m in witness.round_metrics[:10]:
        marker = "  <- leaderless" if m.round in dead else ""
        print(f"  round {m.round:>2}: {m.duration_us / 1000:7.1f} ms  ({m.reason}){marker}")

    committed = {s for v in report.honest_outcomes() for s in v.commit_slots}
    absent = {r for r in dead if not any(s.round == r for s in committed)}
    print(f"\nno leaderless round was ever committed: {absent == dead}")

    compare("symmetric 25 ms links (timers tie, shortcut is a no-op):", base)
    compare("skewed links (3<->4 at 70 ms inside a 10 ms mesh):", skewed(base))


if __name__ == "__main__":
    main()
