"""Leader slot decision rules: the two-round commit/skip logic.

Every round doubles as the propose round of a fresh wave and the decision
round of the previous one (when pipelining is enabled).  A wave is
``WAVE_LENGTH`` = 2 consecutive rounds: leaders proposed at round ``r`` are
judged by the blocks of round ``r + 1``.  Each round carries
``leaders_per_round`` ranked slots; rank 0 is the highest priority.

Decision rules, applied per slot from the highest round downward:

* direct commit  -- 4f+1 distinct decision-round authors support the leader;
* direct skip    -- 4f+1 distinct decision-round authors blame it (their
  stored decision block does not support it, or the slot is empty);
* indirect       -- otherwise defer to the first later slot that is not
  skipped (the anchor): committed anchor + thick link (2f+1 supporters in
  the anchor's history) commits the leader, committed anchor without a
  thick link skips it, undecided anchor leaves the slot undecided.

All functions are pure with respect to the store: they never mutate it, and
equal stores produce equal decisions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .committee import Committee
from .dag import DagStore, is_support
from .types import Block

WAVE_LENGTH = 2


class ProtocolViolation(Exception):
    """A safety assertion failed; indicates > f faults or an implementation bug."""


def wave_number(round_: int, offset: int = 0) -> int:
    """Wave index of propose round ``round_`` for the wave family ``offset``."""
    if round_ % WAVE_LENGTH != offset % WAVE_LENGTH:
        raise ValueError(f"round {round_} is not a propose round for offset {offset}")
    return (round_ - offset) // WAVE_LENGTH


def propose_round(wave: int, offset: int = 0) -> int:
    return wave * WAVE_LENGTH + offset

def decision_round(wave: int, offset: int = 0) -> int:
    return propose_round(wave, offset) + WAVE_LENGTH - 1


class SlotState(enum.Enum):
    COMMIT = "commit"
    SKIP = "skip"
    UNDECIDED = "undecided"


@dataclass(frozen=True, order=True)
class LeaderSlot:
    """A ranked leader position: (round, rank) plus the elected authority."""

    round: int
    rank: int
    authority: int

    def __str__(self) -> str:
        return f"r{self.round}#{self.rank}@v{self.authority}"


@dataclass(frozen=True)
class LeaderStatus:
    """Decision for one leader slot.  ``block`` is set iff state is COMMIT."""

    slot: LeaderSlot
    state: SlotState
    block: Optional[Block] = None

    def __post_init__(self) -> None:
        if (self.state is SlotState.COMMIT) != (self.block is not None):
            raise ValueError("block must be present exactly when state is COMMIT")


def _decision_tallies(store: DagStore, block: Block) -> tuple[set, set]:
    """Distinct decision-round authors supporting / blaming ``block``.

    Support is per block: a voter references ``block`` itself.  Blame is per
    slot: a voter references no block by the same author at the same round,
    declaring the slot absent.  A voter that references a different variant
    of an equivocating author counts in neither set -- treating it as blame
    would let one variant veto a sibling that honest voters support, and
    which variants a validator happens to hold must never change a decision.

    An author equivocating at the decision round can still appear in both
    sets (one variant supports, another omits the slot); the thresholds make
    that harmless for up to f faulty authors.
    """
    ref = block.ref
    supporters: set = set()
    blamers: set = set()
    for b in store.blocks_at_round(block.round + 1):
        if is_support(b, ref):
            supporters.add(b.author)
        elif not any(p.round == ref.round and p.author == ref.author for p in b.parents):
            blamers.add(b.author)
    return supporters, blamers


def supported_leader(store: DagStore, committee: Committee, leader: Block) -> bool:
    """True iff 4f+1 distinct decision-round authors support ``leader``."""
    supporters, blamers = _decision_tallies(store, leader)
    _check_exclusion(committee, leader, supporters, blamers)
    return len(supporters) >= committee.quorum_threshold()


def skipped_leader(store: DagStore, committee: Committee, leader: Block) -> bool:
    """True iff 4f+1 distinct decision-round authors blame ``leader``'s slot
    (reference no block by that author at that round)."""
    supporters, blamers = _decision_tallies(store, leader)
    _check_exclusion(committee, leader, supporters, blamers)
    return len(blamers) >= committee.quorum_threshold()


def _check_exclusion(committee: Committee, leader: Block, supporters: set, blamers: set) -> None:
    q = committee.quorum_threshold()
    if len(supporters) >= q and len(blamers) >= q:
        raise ProtocolViolation(
            f"block {leader.ref} is both supported ({len(supporters)}) and "
            f"blamed ({len(blamers)}) by {q}+ authors"
        )


def thick_link(store: DagStore, committee: Committee, anchor: Block, leader: Block) -> bool:
    """True iff 2f+1 distinct decision-round authors support ``leader`` from
    within the anchor's causal history."""
    leader_ref = leader.ref
    anchor_ref = anchor.ref
    voters: set = set()
    for b in store.blocks_at_round(leader.round + 1):
        if is_support(b, leader_ref) and store.link(b.ref, anchor_ref):
            voters.add(b.author)
    return len(voters) >= committee.indirect_quorum_threshold()


def try_direct_decide(store: DagStore, committee: Committee, slot: LeaderSlot) -> LeaderStatus:
    """Attempt a direct decision for ``slot`` from the decision-round blocks.

    Support is tallied per candidate block (ascending digest order), blame
    once for the whole slot.  At most one variant can ever gather a support
    quorum and a support quorum excludes a blame quorum below f+1 faults, so
    the outcome is independent of which variants are held locally and of the
    iteration order.  A missing decision round leaves the slot undecided,
    never skipped: candidate blocks may simply not have arrived yet.
    """
    candidates = store.blocks_by_author(slot.round, slot.authority)
    blamers: set = set()
    for block in candidates:
        supporters, blamers = _decision_tallies(store, block)
        _check_exclusion(committee, block, supporters, blamers)
        if len(supporters) >= committee.quorum_threshold():
            return LeaderStatus(slot, SlotState.COMMIT, block)
    if not candidates:
        # With no variant held, no stored voter can reference one (parents
        # precede children into the store), so every present voter blames.
        blamers = store.authors_at_round(slot.round + 1)
    if len(blamers) >= committee.quorum_threshold():
        return LeaderStatus(slot, SlotState.SKIP)
    return LeaderStatus(slot, SlotState.UNDECIDED)


def try_indirect_decide(
    store: DagStore,
    committee: Committee,
    slot: LeaderSlot,
    later_statuses: Sequence[LeaderStatus],
) -> LeaderStatus:
    """Attempt an indirect decision for ``slot`` via its anchor.

    The anchor is the first status in ``later_statuses`` (ascending
    round-then-rank order) whose slot sits strictly after this slot's
    decision round and is not skipped.  A committed anchor decides the slot:
    commit the lowest-digest candidate with a thick link to the anchor if one
    exists, skip otherwise.  An undecided or missing anchor defers again.

    Enumerating locally held variants is exhaustive here: a thickly linked
    variant lies in the anchor's causal history (its voters reference it),
    and a committed anchor's full history is in the store, parents first.
    """
    r_decision = slot.round + WAVE_LENGTH - 1
    anchor: Optional[LeaderStatus] = None
    for status in later_statuses:
        if status.slot.round > r_decision and status.state is not SlotState.SKIP:
            anchor = status
            break
    if anchor is None or anchor.state is SlotState.UNDECIDED:
        return LeaderStatus(slot, SlotState.UNDECIDED)
    assert anchor.block is not None
    for block in store.blocks_by_author(slot.round, slot.authority):
        if thick_link(store, committee, anchor.block, block):
            return LeaderStatus(slot, SlotState.COMMIT, block)
    return LeaderStatus(slot, SlotState.SKIP)


LeaderSchedule = Callable[[int, int], int]


class Committer:
    """Evaluates leader slots over a DAG store.

    ``leader_schedule`` maps (round, rank) to the elected authority index and
    defaults to the committee's round-robin election; tests inject bespoke
    schedules to reproduce specific DAG shapes.  With ``pipelined`` False
    only even rounds open a wave, so odd rounds carry no leader slots.
    """

    def __init__(
        self,
        committee: Committee,
        leaders_per_round: int = 1,
        pipelined: bool = True,
        leader_schedule: Optional[LeaderSchedule] = None,
    ) -> None:
        committee.check_leaders_per_round(leaders_per_round)
        self.committee = committee
        self.leaders_per_round = leaders_per_round
        self.pipelined = pipelined
        self._schedule: LeaderSchedule = leader_schedule or committee.elect_leader

    def authority_of(self, round_: int, rank: int) -> int:
        return self._schedule(round_, rank)

    def has_slots(self, round_: int) -> bool:
        if round_ < 1:
            return False
        return self.pipelined or round_ % WAVE_LENGTH == 0

    def slots_for_round(self, round_: int) -> list[LeaderSlot]:
        if not self.has_slots(round_):
            return []
        return [
            LeaderSlot(round_, rank, self._schedule(round_, rank))
            for rank in range(self.leaders_per_round)
        ]

    def try_decide(self, store: DagStore, r_committed: int, r_highest: int) -> list[LeaderStatus]:
        """Decide every slot in rounds (r_committed, r_highest], highest first.

        Returns statuses in ascending (round, rank) order -- the sequencing
        order.  Pure: repeated calls on an unchanged store return equal
        results, and decisions only strengthen (undecided -> decided) as the
        store grows.
        """
        statuses: list[LeaderStatus] = []
        for r in range(r_highest, r_committed, -1):
            if not self.has_slots(r):
                continue
            for rank in range(self.leaders_per_round - 1, -1, -1):
                slot = LeaderSlot(r, rank, self._schedule(r, rank))
                status = try_direct_decide(store, self.committee, slot)
                if status.state is SlotState.UNDECIDED:
                    status = try_indirect_decide(store, self.committee, slot, statuses)
                statuses.insert(0, status)
        return statuses
