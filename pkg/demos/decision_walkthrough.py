"""Walk the two-round decision rules over a small hand-drawn DAG.

Six validators (A..F), four rounds, two leader slots per round.  The DAG is
constructed so that every decision path shows up at least once:

* round 1 rank 0 (D1) is skipped directly -- five round-2 blocks omit it;
* round 1 rank 1 (C1) commits directly -- five round-2 blocks reference it;
* round 2 rank 0 (E2) stays undecided: four supporters, two slot-blamers,
  neither quorum, and no later anchor resolves it within the drawn rounds;
* round 2 rank 1 (B2) commits directly with five supporters;
* round 3 rank 0 (B3) commits directly with six supporters;
* round 3 rank 1 (E3) is skipped *indirectly*: its decision round is too
  thin for a direct verdict, so it is settled through the first committed
  anchor above it (B3's slot), which cannot reach E3 with 2f+1 voters.

Because E2 is undecided, the linearizer consumes the sequence only up to
the first open slot: C1 alone enters the total order even though B2 and B3
are already committed.  Run with more rounds in a live network and those
slots drain as soon as the gap closes.
"""

from __future__ import annotations

from dagbft.committee import Committee
from dagbft.committer import Committer, LeaderSlot, SlotState
from dagbft.dag import DagStore
from dagbft.linearizer import Linearizer
from dagbft.types import Block, genesis_blocks

NAMES = "ABCDEF"

# (round, rank) -> elected authority.  Injected into the committer; the
# default round-robin schedule would elect different validators.
SCHEDULE = {
    (1, 0): 3, (1, 1): 2,
    (2, 0): 4, (2, 1): 1,
    (3, 0): 1, (3, 1): 4,
    (4, 0): 2, (4, 1): 0,
}


def build_dag() -> tuple[Committee, DagStore, dict[str, Block]]:
    committee = Committee(6)
    g = [b.ref for b in genesis_blocks(6)]
    blocks: dict[str, Block] = {}

    def mk(name: str, parent_names: list[str]) -> None:
        author = NAMES.index(name[0])
        round_ = int(name[1])
        parents = tuple(blocks[p].ref for p in parent_names)
        blocks[name] = Block(author, round_, parents)

    for i in range(6):
        name = f"{NAMES[i]}1"
        blocks[name] = Block(i, 1, (g[i],) + tuple(g[j] for j in range(6) if j != i))

    # Round 2: A2/B2/C2 support C1 but omit D1; D2/E2/F2 support D1 but omit C1.
    mk("A2", ["A1", "B1", "C1", "E1", "F1"])
    mk("B2", ["B1", "A1", "C1", "E1", "F1"])
    mk("C2", ["C1", "A1", "B1", "E1", "F1"])
    mk("D2", ["D1", "A1", "B1", "E1", "F1"])
    mk("E2", ["E1", "A1", "B1", "D1", "F1"])
    mk("F2", ["F1", "A1", "B1", "D1", "E1"])

    # Round 3: five of six support B2; E2 gathers only four supporters.
    mk("A3", ["A2", "B2", "C2", "D2", "F2"])
    mk("B3", ["B2", "A2", "C2", "D2", "F2"])
    mk("C3", ["C2", "A2", "B2", "D2", "E2"])
    mk("D3", ["D2", "B2", "C2", "E2", "F2"])
    mk("E3", ["E2", "A2", "C2", "D2", "F2"])
    mk("F3", ["F2", "A2", "B2", "C2", "E2"])

    # Round 4: everyone supports B3; only E4 still references E3.
    mk("A4", ["A3", "B3", "C3", "D3", "F3"])
    mk("B4", ["B3", "A3", "C3", "D3", "F3"])
    mk("C4", ["C3", "A3", "B3", "D3", "F3"])
    mk("D4", ["D3", "A3", "B3", "C3", "F3"])
    mk("E4", ["E3", "A3", "B3", "C3", "D3", "F3"])
    mk("F4", ["F3", "A3", "B3", "C3", "D3"])

    store = DagStore.bootstrapped(committee)
    for round_ in (1, 2, 3, 4):
        for name, block in blocks.items():
            if block.round == round_:
                store.insert(block)
    return committee, store, blocks


def block_name(blocks: dict[str, Block], ref) -> str:
    if ref.round == 0:
        return f"{NAMES[ref.author]}0"
    for name, block in blocks.items():
        if block.ref == ref:
            return name
    return ref.to_text()


def main() -> None:
    committee, store, blocks = build_dag()
    committer = Committer(
        committee, leaders_per_round=2, leader_schedule=lambda r, k: SCHEDULE.get((r, k), (r + k) % 6)
    )

    print(f"committee: n=6, f=1, support quorum {committee.quorum_threshold()}, "
          f"indirect quorum {committee.indirect_quorum_threshold()}")
    print(f"{store.highest_round} rounds in the DAG\n")

    statuses = committer.try_decide(store, 0, store.highest_round)
    print("slot decisions (round, rank -> elected validator):")
    for status in statuses:
        slot = status.slot
        tag = f"  r{slot.round}#{slot.rank} -> {NAMES[slot.authority]}"
        if status.state is SlotState.COMMIT:
            print(f"{tag}: COMMIT {block_name(blocks, status.block.ref)}")
        else:
            print(f"{tag}: {status.state.name}")

    linearizer = Linearizer(committer, store, observer=0)
    records = linearizer.extend(store.highest_round, now_us=0)
    committed = [block_name(blocks, slot_ref) for slot_ref in linearizer.commit_sequence]
    print(f"\nlinearized leader sequence: {committed}")
    print(f"(stops before the first undecided slot; {len(records)} blocks ordered)")
    order = [block_name(blocks, r.block_ref) for r in records]
    print(f"total order so far: {order}")


if __name__ == "__main__":
    main()
