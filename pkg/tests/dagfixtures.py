"""Shared DAG builders and independent oracles for the test suite.

The walkthrough fixture is a hand-built n=6, two-leaders-per-round DAG over
four rounds with a bespoke leader schedule.  Each block's exact parent list
is written out; the expected slot decisions were worked out by hand from
those lists and are frozen in the committer tests.

The oracles here deliberately avoid the library's ancestry bitmasks: link
reachability is recomputed by BFS over parent edges, and sub-DAG deltas by
set difference over those BFS closures.
"""

from __future__ import annotations

import random
from collections import deque
from typing import Iterable, Optional, Sequence

from dagbft.committee import Committee
from dagbft.committer import Committer
from dagbft.dag import DagStore, insert_all
from dagbft.types import Block, BlockRef, Transaction, genesis_blocks

# -- independent oracles ------------------------------------------------------


def bfs_ancestry(block: Block, by_ref: dict[BlockRef, Block]) -> set[BlockRef]:
    """All refs reachable from ``block`` via parent edges, itself included."""
    seen = {block.ref}
    queue = deque([block])
    while queue:
        for parent in queue.popleft().parents:
            if parent not in seen:
                seen.add(parent)
                queue.append(by_ref[parent])
    return seen


def bfs_link(old: BlockRef, new: BlockRef, by_ref: dict[BlockRef, Block]) -> bool:
    return old in bfs_ancestry(by_ref[new], by_ref)


def by_ref_index(blocks: Iterable[Block]) -> dict[BlockRef, Block]:
    return {b.ref: b for b in blocks}


# -- the walkthrough DAG ---------------------------------------------------------

# (round, rank) -> authority.  Rank 0 is the higher priority ("a") slot.
WALKTHROUGH_SCHEDULE = {
    (1, 0): 3,  # L1a
    (1, 1): 2,  # L1b
    (2, 0): 4,  # L2a
    (2, 1): 1,  # L2b
    (3, 0): 1,  # L3a
    (3, 1): 4,  # L3b
    (4, 0): 2,
    (4, 1): 0,  # L4b
}


def walkthrough_leader_schedule(round_: int, rank: int) -> int:
    # Rounds past the drawn DAG fall back to round-robin; their slots stay
    # undecided anyway (there are no blocks there).
    return WALKTHROUGH_SCHEDULE.get((round_, rank), (round_ + rank) % 6)


def build_walkthrough() -> tuple[Committee, DagStore, dict[str, Block], Committer]:
    """The four-round example DAG.

    Names: letters A..F are validators 0..5, the digit is the round, so
    ``C1`` is validator 2's round-1 block.  Slot labels: L1a = D1, L1b = C1,
    L2a = E2, L2b = B2, L3a = B3, L3b = E3, L4b = A4.
    """
    committee = Committee(6)
    genesis = genesis_blocks(6)
    g = [b.ref for b in genesis]

    blocks: dict[str, Block] = {}

    def mk(name: str, author: int, round_: int, parent_names: Sequence[str]) -> Block:
        parents = tuple(blocks[p].ref for p in parent_names)
        block = Block(author, round_, parents)
        blocks[name] = block
        return block

    # Round 1: everyone references all of genesis, own block first.
    for i, name in enumerate(["A1", "B1", "C1", "D1", "E1", "F1"]):
        block = Block(i, 1, (g[i],) + tuple(g[j] for j in range(6) if j != i))
        blocks[name] = block

    # Round 2: three blocks support L1b (C1), three support L1a (D1).
    mk("A2", 0, 2, ["A1", "B1", "C1", "E1", "F1"])
    mk("B2", 1, 2, ["B1", "A1", "C1", "E1", "F1"])  # L2b
    mk("C2", 2, 2, ["C1", "A1", "B1", "E1", "F1"])
    mk("D2", 3, 2, ["D1", "A1", "B1", "E1", "F1"])
    mk("E2", 4, 2, ["E1", "A1", "B1", "D1", "F1"])  # L2a
    mk("F2", 5, 2, ["F1", "A1", "B1", "D1", "E1"])

    # Round 3: five blocks support L2b (B2); four support L2a (E2).
    mk("A3", 0, 3, ["A2", "B2", "C2", "D2", "F2"])
    mk("B3", 1, 3, ["B2", "A2", "C2", "D2", "F2"])  # L3a
    mk("C3", 2, 3, ["C2", "A2", "B2", "D2", "E2"])
    mk("D3", 3, 3, ["D2", "B2", "C2", "E2", "F2"])
    mk("E3", 4, 3, ["E2", "A2", "C2", "D2", "F2"])  # L3b
    mk("F3", 5, 3, ["F2", "A2", "B2", "C2", "E2"])

    # Round 4: all six support L3a (B3); only E4 references L3b (E3).
    mk("A4", 0, 4, ["A3", "B3", "C3", "D3", "F3"])  # L4b
    mk("B4", 1, 4, ["B3", "A3", "C3", "D3", "F3"])
    mk("C4", 2, 4, ["C3", "A3", "B3", "D3", "F3"])
    mk("D4", 3, 4, ["D3", "A3", "B3", "C3", "F3"])
    mk("E4", 4, 4, ["E3", "A3", "B3", "C3", "D3", "F3"])
    mk("F4", 5, 4, ["F3", "A3", "B3", "C3", "D3"])

    store = DagStore.bootstrapped(committee)
    insert_all(store, blocks.values())
    committer = Committer(
        committee,
        leaders_per_round=2,
        pipelined=True,
        leader_schedule=walkthrough_leader_schedule,
    )
    return committee, store, blocks, committer


# -- synthetic DAG builders ------------------------------------------------------


def fully_connected_dag(
    committee: Committee, rounds: int, payload_round: Optional[int] = None
) -> tuple[DagStore, list[Block]]:
    """Every validator's block references every block of the previous round."""
    store = DagStore.bootstrapped(committee)
    prev = {b.author: b.ref for b in store.blocks_at_round(0)}
    all_blocks: list[Block] = []
    for r in range(1, rounds + 1):
        current = {}
        for v in committee.validators:
            parents = (prev[v],) + tuple(prev[o] for o in committee.validators if o != v)
            payload = ()
            if payload_round == r:
                payload = (Transaction(payload=f"r{r}v{v}".encode()),)
            block = Block(v, r, parents, payload)
            store.insert(block)
            current[v] = block.ref
            all_blocks.append(block)
        prev = current
    return store, all_blocks


def random_dag(
    committee: Committee,
    rounds: int,
    rng: random.Random,
    extra_parent_prob: float = 0.5,
) -> tuple[DagStore, list[Block]]:
    """Random DAG where every block has a valid parent set: its author's own
    previous block plus a random selection of others, at least 4f+1 total."""
    store = DagStore.bootstrapped(committee)
    prev = {b.author: b.ref for b in store.blocks_at_round(0)}
    all_blocks: list[Block] = []
    quorum = committee.quorum_threshold()
    for r in range(1, rounds + 1):
        current = {}
        for v in committee.validators:
            others = [o for o in committee.validators if o != v]
            rng.shuffle(others)
            take = quorum - 1
            for o in others[take:]:
                if rng.random() < extra_parent_prob:
                    take += 1
            chosen = sorted(others[:take])
            parents = (prev[v],) + tuple(prev[o] for o in chosen)
            block = Block(v, r, parents)
            store.insert(block)
            current[v] = block.ref
            all_blocks.append(block)
        prev = current
    return store, all_blocks
