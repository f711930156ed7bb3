"""The local DAG store, block validation, and the support/link predicates.

Equivocation is tolerated structurally: the store keeps every valid block,
so one (author, round) slot may hold several blocks. Causal completeness is
enforced on insert -- a block only enters the store once all of its parents
are present -- which keeps ancestry queries store-independent.

Ancestry is tracked as per-block bitmasks over insertion indices, so
``link`` (is `old` in the causal history of `new`?) is a single bit test and
sub-DAG collection walks only the relevant bits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from dagbft.committee import Committee
from dagbft.types import Block, BlockRef, genesis_blocks


class RejectReason(enum.Enum):
    BAD_SIGNATURE = "bad-signature"
    UNKNOWN_AUTHOR = "unknown-author"
    BAD_PARENT_ROUND = "bad-parent-round"
    INSUFFICIENT_PARENTS = "insufficient-parents"
    DUPLICATE_PARENT_AUTHOR = "duplicate-parent-author"
    MISSING_SELF_PARENT = "missing-self-parent"


class Outcome(enum.Enum):
    ACCEPTED = "accepted"
    SUSPENDED = "suspended"
    REJECTED = "rejected"


@dataclass(frozen=True)
class ValidationResult:
    outcome: Outcome
    reason: Optional[RejectReason] = None
    missing: tuple[BlockRef, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ACCEPTED


_ACCEPT = ValidationResult(Outcome.ACCEPTED)


def validate_block(
    block: Block,
    store: "DagStore",
    committee: Committee,
    min_parents: Optional[int] = None,
) -> ValidationResult:
    """Structural validity of ``block`` against a local store.

    Returns accepted / suspended (structurally fine but parents missing
    locally; ``missing`` lists them) / rejected (permanent, with reason).
    ``min_parents`` defaults to the 4f+1 quorum threshold; the unsafe
    variant passes ceil(2n/3) instead.
    """
    if not committee.is_member(block.author):
        return ValidationResult(Outcome.REJECTED, RejectReason.UNKNOWN_AUTHOR)
    if not block.verify_signature():
        return ValidationResult(Outcome.REJECTED, RejectReason.BAD_SIGNATURE)
    if block.round == 0:
        # Genesis is well known; the only acceptable round-0 blocks are the
        # canonical ones already seeded in every store.
        if store.contains(block.ref):
            return _ACCEPT
        if block.parents:
            return ValidationResult(Outcome.REJECTED, RejectReason.BAD_PARENT_ROUND)
        return ValidationResult(Outcome.REJECTED, RejectReason.INSUFFICIENT_PARENTS)
    threshold = committee.quorum_threshold() if min_parents is None else min_parents
    if len(block.parents) < threshold:
        return ValidationResult(Outcome.REJECTED, RejectReason.INSUFFICIENT_PARENTS)
    if any(p.round != block.round - 1 for p in block.parents):
        return ValidationResult(Outcome.REJECTED, RejectReason.BAD_PARENT_ROUND)
    authors = {p.author for p in block.parents}
    if len(authors) != len(block.parents):
        return ValidationResult(Outcome.REJECTED, RejectReason.DUPLICATE_PARENT_AUTHOR)
    if block.parents[0].author != block.author:
        return ValidationResult(Outcome.REJECTED, RejectReason.MISSING_SELF_PARENT)
    missing = tuple(p for p in block.parents if not store.contains(p))
    if missing:
        return ValidationResult(Outcome.SUSPENDED, missing=missing)
    return _ACCEPT


class CausalityError(RuntimeError):
    """Insert attempted before the block's parents were present."""


@dataclass
class DagStore:
    """Round/author-indexed block storage with O(1) ancestry tests."""

    _blocks: dict[BlockRef, Block] = field(default_factory=dict)
    _order: list[Block] = field(default_factory=list)
    _index: dict[BlockRef, int] = field(default_factory=dict)
    _masks: list[int] = field(default_factory=list)
    _by_round: dict[int, dict[int, list[Block]]] = field(default_factory=dict)
    highest_round: int = 0

    @classmethod
    def bootstrapped(cls, committee: Committee) -> "DagStore":
        """A store seeded with the canonical genesis blocks."""
        store = cls()
        for b in genesis_blocks(committee.size):
            store.insert(b)
        return store

    # -- insertion ------------------------------------------------------------

    def insert(self, block: Block) -> bool:
        """Add ``block``; parents must already be present. Idempotent.

        Returns True when the store grew.
        """
        ref = block.ref
        if ref in self._blocks:
            return False
        mask = 0
        for parent in block.parents:
            pi = self._index.get(parent)
            if pi is None:
                raise CausalityError(f"missing parent {parent} for {ref}")
            mask |= self._masks[pi]
        idx = len(self._order)
        mask |= 1 << idx
        self._blocks[ref] = block
        self._order.append(block)
        self._index[ref] = idx
        self._masks.append(mask)
        slot = self._by_round.setdefault(block.round, {}).setdefault(block.author, [])
        slot.append(block)
        if len(slot) > 1:
            slot.sort(key=lambda b: b.digest)
        if block.round > self.highest_round:
            self.highest_round = block.round
        return True

    # -- lookups --------------------------------------------------------------

    def contains(self, ref: BlockRef) -> bool:
        return ref in self._blocks

    def get(self, ref: BlockRef) -> Optional[Block]:
        return self._blocks.get(ref)

    def __len__(self) -> int:
        return len(self._order)

    def __iter__(self) -> Iterator[Block]:
        return iter(self._order)

    def blocks_at_round(self, round: int) -> list[Block]:
        """All blocks of a round, ordered (author, digest)."""
        per_author = self._by_round.get(round)
        if not per_author:
            return []
        out: list[Block] = []
        for author in sorted(per_author):
            out.extend(per_author[author])
        return out

    def authors_at_round(self, round: int) -> set[int]:
        return set(self._by_round.get(round, ()))

    def blocks_by_author(self, round: int, author: int) -> list[Block]:
        """Blocks of one slot, digest-ascending (several iff equivocation)."""
        return list(self._by_round.get(round, {}).get(author, ()))

    # -- ancestry -------------------------------------------------------------

    def link(self, old: BlockRef, new: BlockRef) -> bool:
        """True iff a parent-edge path leads from ``new`` back to ``old``.

        Reflexive: every block links to itself.
        """
        oi = self._index.get(old)
        ni = self._index.get(new)
        if oi is None or ni is None:
            return False
        return (self._masks[ni] >> oi) & 1 == 1

    def history_mask(self, ref: BlockRef) -> int:
        idx = self._index.get(ref)
        if idx is None:
            raise KeyError(ref)
        return self._masks[idx]

    def blocks_in_mask(self, mask: int) -> Iterator[Block]:
        order = self._order
        while mask:
            low = mask & -mask
            yield order[low.bit_length() - 1]
            mask ^= low


def is_support(support: Block, leader: BlockRef) -> bool:
    """Does ``support`` reference ``leader`` as a parent?

    Full-triplet match: an equivocating leader's variants are distinct
    blocks, and a block supports at most the exact variants it referenced.
    """
    return leader in support.parent_set


def link(old: BlockRef, new: BlockRef, store: DagStore) -> bool:
    """Module-level convenience mirroring :meth:`DagStore.link`."""
    return store.link(old, new)


def insert_all(store: DagStore, blocks: Iterable[Block]) -> None:
    """Insert blocks in round order (test/demo helper for ready-made DAGs)."""
    for b in sorted(blocks, key=lambda b: (b.round, b.author, b.digest)):
        store.insert(b)
