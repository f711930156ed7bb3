"""Committed-leader sequencing and total block ordering.

Consumes the slot statuses produced by the committer: walks them in
ascending order, drops skips, stops at the first undecided slot, and
appends each newly committed leader to the commit sequence.  Every new
leader's causal history is then expanded into the total order -- only the
blocks not already emitted, sorted by (round, author, digest), which places
the leader itself last in its own delta.

One linearizer instance belongs to one observing validator and is
append-only: repeated extension calls never reorder or re-emit blocks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .committer import Committer, LeaderSlot, SlotState
from .dag import DagStore
from .types import Block, BlockRef

_SLOT_RE = re.compile(r"^r(\d+)#(\d+)@v(\d+)$")


def slot_to_text(slot: LeaderSlot) -> str:
    return f"r{slot.round}#{slot.rank}@v{slot.authority}"


def slot_from_text(text: str) -> LeaderSlot:
    m = _SLOT_RE.match(text)
    if not m:
        raise ValueError(f"bad leader slot text: {text!r}")
    return LeaderSlot(int(m.group(1)), int(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class CommitRecord:
    """One block emitted into an observer's total order.

    Serialized as one JSON line with fixed key order so that equal runs
    produce byte-identical logs.
    """

    observer: int
    leader_slot: LeaderSlot
    block_ref: BlockRef
    emit_index: int
    sim_time_ms: float

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "observer": self.observer,
                "leader_slot": slot_to_text(self.leader_slot),
                "block_ref": self.block_ref.to_text(),
                "emit_index": self.emit_index,
                "sim_time_ms": self.sim_time_ms,
            },
            separators=(",", ":"),
        )

    @staticmethod
    def from_json_line(line: str) -> "CommitRecord":
        obj = json.loads(line)
        return CommitRecord(
            observer=obj["observer"],
            leader_slot=slot_from_text(obj["leader_slot"]),
            block_ref=BlockRef.from_text(obj["block_ref"]),
            emit_index=obj["emit_index"],
            sim_time_ms=obj["sim_time_ms"],
        )


class Linearizer:
    """Owns one validator's commit sequence and linearized order."""

    def __init__(self, committer: Committer, store: DagStore, observer: int) -> None:
        self._committer = committer
        self._store = store
        self.observer = observer
        self.commit_sequence: list[BlockRef] = []
        self.commit_slots: list[LeaderSlot] = []
        self.records: list[CommitRecord] = []
        self._last_consumed: Optional[LeaderSlot] = None
        self._emitted_mask = 0

    # The committer re-derives whole rounds, so after consuming a slot that
    # is not the last rank of its round we back the floor up one round and
    # filter the already-consumed slots out of the walk below.
    def _resume_floor(self) -> int:
        last = self._last_consumed
        if last is None:
            return 0
        if last.rank == self._committer.leaders_per_round - 1:
            return last.round
        return last.round - 1

    def extend(self, r_highest: int, now_us: int) -> list[CommitRecord]:
        """Advance the commit sequence as far as the DAG now allows.

        Runs the decision rules over rounds above the last fully consumed
        slot, consumes decided slots in order until the first undecided one,
        and returns the commit records newly appended to the total order
        (empty when nothing new could be decided).  ``now_us`` stamps every
        returned record.
        """
        floor = self._resume_floor()
        if r_highest <= floor:
            return []
        statuses = self._committer.try_decide(self._store, floor, r_highest)
        new_leaders: list[tuple[LeaderSlot, Block]] = []
        for status in statuses:
            if self._last_consumed is not None and status.slot <= self._last_consumed:
                continue
            if status.state is SlotState.UNDECIDED:
                break
            self._last_consumed = status.slot
            if status.state is SlotState.COMMIT:
                assert status.block is not None
                new_leaders.append((status.slot, status.block))
        return self._linearize(new_leaders, now_us)

    def _linearize(self, leaders: list[tuple[LeaderSlot, Block]], now_us: int) -> list[CommitRecord]:
        delta: list[CommitRecord] = []
        for slot, leader in leaders:
            self.commit_sequence.append(leader.ref)
            self.commit_slots.append(slot)
            history = self._store.history_mask(leader.ref)
            fresh = history & ~self._emitted_mask
            self._emitted_mask |= history
            blocks = sorted(
                self._store.blocks_in_mask(fresh),
                key=lambda b: (b.round, b.author, b.digest),
            )
            for block in blocks:
                record = CommitRecord(
                    observer=self.observer,
                    leader_slot=slot,
                    block_ref=block.ref,
                    emit_index=len(self.records),
                    sim_time_ms=now_us / 1000,
                )
                self.records.append(record)
                delta.append(record)
        return delta

    def order_refs(self) -> list[BlockRef]:
        """The linearized order so far, as block references."""
        return [r.block_ref for r in self.records]

    @property
    def last_consumed(self) -> Optional[LeaderSlot]:
        """The last slot walked past (committed or skipped), if any."""
        return self._last_consumed
