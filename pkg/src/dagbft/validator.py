"""Per-validator state machine.

Consumes an ordered stream of events from the simulator -- block deliveries,
fetch traffic, client transactions, timer fires -- and drives the protocol:
validate and store incoming blocks, advance rounds when the propose
conditions hold, assemble and broadcast new blocks, and run the decision
rules + linearizer whenever the local DAG grows.

Round advance requires a quorum of current-round blocks plus one of:

* every leader slot of the round is populated locally,
* the 2*delta leader timeout expired, or
* (early-production optimization) every missing leader has already drawn
  2f+1 blames from next-round blocks of faster peers.

Fault modes -- crash at a given round, or equivocate with k variants per
round -- are implemented here as behavior overrides so the simulator stays
fault-agnostic.
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass
from typing import Optional, Protocol, Union

from .committee import Committee
from .committer import Committer
from .dag import DagStore, Outcome, validate_block
from .linearizer import CommitRecord, Linearizer
from .types import Block, BlockRef, Transaction

log = logging.getLogger(__name__)

SUSPENDED_BUFFER_LIMIT = 10_000
DEFAULT_MAX_BLOCK_BYTES = 262_144


@dataclass(frozen=True)
class BlockMessage:
    block: Block


@dataclass(frozen=True)
class FetchRequest:
    refs: tuple[BlockRef, ...]
    requester: int


@dataclass(frozen=True)
class FetchResponse:
    blocks: tuple[Block, ...]


Message = Union[BlockMessage, FetchRequest, FetchResponse]


class NetworkHandle(Protocol):
    """What a validator needs from the surrounding simulator."""

    def broadcast(self, payload: Message) -> None: ...

    def send(self, to: int, payload: Message) -> None: ...

    def set_timer(self, at_us: int, tag: int) -> None: ...


@dataclass(frozen=True)
class RoundAdvance:
    """Metrics sample: one completed round at one validator."""

    round: int
    entry_us: int
    duration_us: int
    reason: str  # no_slots | all_leaders | blames | timeout


class ValidatorCore:
    def __init__(
        self,
        vid: int,
        committee: Committee,
        committer: Committer,
        net: NetworkHandle,
        *,
        delta_us: int,
        unsafe_parent_threshold: bool = False,
        optimization: bool = True,
        max_block_bytes: int = DEFAULT_MAX_BLOCK_BYTES,
        max_parents: Optional[int] = None,
        crash_at_round: Optional[int] = None,
        equivocate: Optional[int] = None,
        fault_rng: Optional[random.Random] = None,
    ) -> None:
        if equivocate is not None and equivocate < 2:
            raise ValueError("equivocation degree must be >= 2")
        self.vid = vid
        self.committee = committee
        self.committer = committer
        self.net = net
        self.delta_us = delta_us
        self.optimization = optimization
        self.max_block_bytes = max_block_bytes
        self.max_parents = max_parents
        self.crash_at_round = crash_at_round
        self.equivocate = equivocate
        self._fault_rng = fault_rng or random.Random(0)

        self.store = DagStore.bootstrapped(committee)
        self.linearizer = Linearizer(committer, self.store, vid)
        self._min_parents = (
            committee.unsafe_parent_threshold()
            if unsafe_parent_threshold
            else committee.quorum_threshold()
        )
        self._propose_threshold = self._min_parents

        genesis = self.store.blocks_by_author(0, vid)[0]
        self.round = 0
        self.round_entry_us = 0
        self._deadline_us = 2 * delta_us
        self._own_block = genesis
        self._equiv_chains: list[Block] = [genesis] * (equivocate or 0)
        self.crashed = False
        self._max_round = 0
        self.proposing = True  # cleared by the simulator when load stops

        self.mempool: deque[Transaction] = deque()
        self._mempool_set: set[Transaction] = set()
        self._accepted_txs: set[Transaction] = set()
        self._suspended: dict[BlockRef, Block] = {}
        self._waiting_on: dict[BlockRef, set[BlockRef]] = {}

        self.round_metrics: list[RoundAdvance] = []
        self.latency_samples_us: list[int] = []
        self.counters: dict[str, int] = {}

        if crash_at_round is not None and crash_at_round <= 1:
            # Never proposes anything; stays silent from the start.
            self.crashed = True

    # -- event entry points (called by the simulator) -------------------------

    def start(self, now_us: int) -> None:
        """Bootstrap out of the genesis round."""
        if self.crashed:
            return
        self._post_growth(now_us)

    def on_transaction(self, tx: Transaction, now_us: int) -> None:
        if self.crashed:
            return
        if tx in self._mempool_set or tx in self._accepted_txs:
            self._count("tx_duplicate")
            return
        self.mempool.append(tx)
        self._mempool_set.add(tx)

    def on_message(self, payload: Message, now_us: int) -> None:
        if self.crashed:
            return
        grew = False
        if isinstance(payload, BlockMessage):
            grew = self._ingest(payload.block)
        elif isinstance(payload, FetchResponse):
            for b in payload.blocks:
                grew = self._ingest(b) or grew
        elif isinstance(payload, FetchRequest):
            found = tuple(
                b for ref in payload.refs if (b := self.store.get(ref)) is not None
            )
            if found:
                self.net.send(payload.requester, FetchResponse(found))
        else:  # pragma: no cover - defensive
            raise TypeError(f"unknown message payload: {payload!r}")
        if grew:
            self._post_growth(now_us)

    def on_timer(self, tag: int, now_us: int) -> None:
        if self.crashed or tag != self.round:
            return
        if self._maybe_advance(now_us):
            self._run_commit(now_us)

    # -- ingestion -------------------------------------------------------------

    def _ingest(self, block: Block) -> bool:
        """Validate and insert a block plus any suspended blocks it releases.

        Returns True iff the DAG grew.
        """
        grew = False
        queue: deque[Block] = deque([block])
        while queue:
            blk = queue.popleft()
            if self.store.contains(blk.ref):
                self._count("duplicate_block")
                continue
            result = validate_block(blk, self.store, self.committee, self._min_parents)
            if result.outcome is Outcome.ACCEPTED:
                self.store.insert(blk)
                grew = True
                if blk.round > self._max_round:
                    self._max_round = blk.round
                queue.extend(self._release_waiters(blk.ref))
            elif result.outcome is Outcome.SUSPENDED:
                self._suspend(blk, result.missing)
            else:
                assert result.reason is not None
                self._count(f"rejected_{result.reason.value}")
        return grew

    def _suspend(self, block: Block, missing: tuple[BlockRef, ...]) -> None:
        if block.ref in self._suspended:
            for ref in missing:
                self._waiting_on.setdefault(ref, set()).add(block.ref)
            return
        if len(self._suspended) >= SUSPENDED_BUFFER_LIMIT:
            self._count("suspended_overflow")
            return
        self._suspended[block.ref] = block
        for ref in missing:
            self._waiting_on.setdefault(ref, set()).add(block.ref)
        self._count("suspended")
        if block.author != self.vid:
            self.net.send(block.author, FetchRequest(missing, self.vid))

    def _release_waiters(self, ref: BlockRef) -> list[Block]:
        waiters = self._waiting_on.pop(ref, None)
        if not waiters:
            return []
        released = []
        for wref in waiters:
            blk = self._suspended.pop(wref, None)
            if blk is not None:
                released.append(blk)
        # Set iteration order is hash-seed dependent; keep the pipeline
        # reproducible across processes.
        released.sort(key=lambda b: (b.round, b.author, b.digest))
        return released

    # -- round advancement -------------------------------------------------------

    def _post_growth(self, now_us: int) -> None:
        self._maybe_advance(now_us)
        self._run_commit(now_us)

    def _maybe_advance(self, now_us: int) -> bool:
        advanced = False
        while not self.crashed and self.proposing and self._ready_to_propose(now_us):
            self._advance(now_us)
            advanced = True
        return advanced

    def _missing_leaders(self) -> list[int]:
        return [
            slot.authority
            for slot in self.committer.slots_for_round(self.round)
            if not self.store.blocks_by_author(self.round, slot.authority)
        ]

    def _ready_to_propose(self, now_us: int) -> bool:
        if len(self.store.authors_at_round(self.round)) < self._propose_threshold:
            return False
        missing = self._missing_leaders()
        if not missing:
            return True
        if now_us >= self._deadline_us:
            return True
        return self.optimization and self._forced_by_blames(missing)

    def _forced_by_blames(self, missing: list[int]) -> bool:
        """Every locally missing leader already drew 2f+1 next-round blames."""
        next_blocks = self.store.blocks_at_round(self.round + 1)
        if not next_blocks:
            return False
        need = self.committee.indirect_quorum_threshold()
        for authority in missing:
            blamers = {
                b.author
                for b in next_blocks
                if all(p.author != authority for p in b.parents)
            }
            if len(blamers) < need:
                return False
        return True

    def _advance_reason(self, now_us: int) -> str:
        slots = self.committer.slots_for_round(self.round)
        if not slots:
            return "no_slots"
        if not self._missing_leaders():
            return "all_leaders"
        if self.optimization and self._forced_by_blames(self._missing_leaders()):
            return "blames"
        return "timeout"

    def _advance(self, now_us: int) -> None:
        self.round_metrics.append(
            RoundAdvance(
                round=self.round,
                entry_us=self.round_entry_us,
                duration_us=now_us - self.round_entry_us,
                reason=self._advance_reason(now_us),
            )
        )
        new_round = self.round + 1
        if self.crash_at_round is not None and new_round >= self.crash_at_round:
            self.crashed = True
            return
        self.round = new_round
        self.round_entry_us = now_us
        self._deadline_us = now_us + 2 * self.delta_us
        self.net.set_timer(self._deadline_us, new_round)
        if self.equivocate:
            self._propose_equivocating(new_round, now_us)
        else:
            block = self._create_block(new_round, now_us)
            self._own_block = block
            self._ingest(block)
            self.net.broadcast(BlockMessage(block))

    def _parent_refs(self, prev_round: int, own_ref: BlockRef) -> list[BlockRef]:
        parents = [own_ref]
        for author in sorted(self.store.authors_at_round(prev_round)):
            if author == self.vid:
                continue
            if self.max_parents is not None and len(parents) >= self.max_parents:
                break
            parents.append(self.store.blocks_by_author(prev_round, author)[0].ref)
        return parents

    def _create_block(self, round_: int, now_us: int) -> Block:
        parents = self._parent_refs(round_ - 1, self._own_block.ref)
        return Block(self.vid, round_, tuple(parents), self._drain_mempool())

    def _drain_mempool(self) -> tuple[Transaction, ...]:
        taken: list[Transaction] = []
        budget = self.max_block_bytes
        while self.mempool:
            tx = self.mempool[0]
            size = tx.encoded_size()
            if taken and size > budget:
                break
            self.mempool.popleft()
            self._mempool_set.discard(tx)
            self._accepted_txs.add(tx)
            taken.append(tx)
            budget -= size
            if budget <= 0:
                break
        return tuple(taken)

    # -- byzantine behaviors ---------------------------------------------------

    def _propose_equivocating(self, round_: int, now_us: int) -> None:
        """Emit k conflicting blocks, each chained on its own previous variant,
        and partition the peers among them round-robin."""
        k = self.equivocate
        assert k is not None
        prev = round_ - 1
        payload = self._drain_mempool()
        variants: list[Block] = []
        for v in range(k):
            parents = self._parent_refs(prev, self._equiv_chains[v].ref)
            if len(parents) > self._min_parents and k > 1:
                # Vary the parent sets beyond the mandatory self-parent so the
                # variants genuinely disagree about the previous round.
                drop = 1 + (v + round_) % (len(parents) - 1)
                if len(parents) - 1 >= self._min_parents:
                    parents = parents[:drop] + parents[drop + 1 :]
            marker = Transaction(
                payload=f"equiv/{self.vid}/{round_}/{v}".encode(),
                created_us=now_us,
                client=self.vid,
            )
            variants.append(Block(self.vid, round_, tuple(parents), payload + (marker,)))
        self._equiv_chains = variants
        self._own_block = variants[0]
        for block in variants:
            self._ingest(block)
        rotation = self._fault_rng.randrange(k)
        peers = [p for p in self.committee.validators if p != self.vid]
        for i, peer in enumerate(peers):
            self.net.send(peer, BlockMessage(variants[(i + rotation) % k]))

    # -- commit pipeline ---------------------------------------------------------

    def _run_commit(self, now_us: int) -> None:
        for record in self.linearizer.extend(self._max_round, now_us):
            block = self.store.get(record.block_ref)
            assert block is not None
            for tx in block.payload:
                if tx in self._accepted_txs:
                    self.latency_samples_us.append(now_us - tx.created_us)
                    self._accepted_txs.discard(tx)

    # -- misc ----------------------------------------------------------------------

    def _count(self, key: str) -> None:
        self.counters[key] = self.counters.get(key, 0) + 1

    @property
    def max_round_seen(self) -> int:
        return self._max_round

    @property
    def commit_records(self) -> list[CommitRecord]:
        return self.linearizer.records
