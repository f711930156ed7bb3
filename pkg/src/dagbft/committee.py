"""Validator committees for the n = 5f + 1 fault model.

The committee is a fixed, equally-weighted validator set. Validators are
identified by their index in the set, so "stake aggregation" reduces to
counting distinct validator ids. Two vote thresholds matter:

- ``quorum_threshold``          = 4f + 1  (direct decisions, parent gate)
- ``indirect_quorum_threshold`` = 2f + 1  (indirect decisions via an anchor)
"""

from __future__ import annotations

from dataclasses import dataclass, field

ValidatorId = int


class CommitteeError(ValueError):
    """Raised for committee sizes or parameters outside the fault model."""


@dataclass(frozen=True)
class Committee:
    """An equally-staked validator set of size n = 5f + 1, f >= 1."""

    size: int
    f: int = field(init=False)

    def __post_init__(self) -> None:
        if self.size < 6:
            raise CommitteeError(f"committee needs at least 6 validators, got {self.size}")
        if (self.size - 1) % 5 != 0:
            raise CommitteeError(
                f"committee size must satisfy n = 5f + 1 for integer f, got n={self.size}"
            )
        object.__setattr__(self, "f", (self.size - 1) // 5)

    # -- membership ---------------------------------------------------------

    @property
    def validators(self) -> range:
        return range(self.size)

    def is_member(self, vid: ValidatorId) -> bool:
        return 0 <= vid < self.size

    # -- thresholds ---------------------------------------------------------

    def quorum_threshold(self) -> int:
        """Votes needed for direct commit/skip decisions: 4f + 1."""
        return 4 * self.f + 1

    def indirect_quorum_threshold(self) -> int:
        """Votes needed to carry a decision through an anchor: 2f + 1."""
        return 2 * self.f + 1

    def unsafe_parent_threshold(self) -> int:
        """ceil(2n/3); the lowered proposal gate of the unsafe variant."""
        return -(-2 * self.size // 3)

    # -- leader schedule ----------------------------------------------------

    def elect_leader(self, round: int, rank: int = 0) -> ValidatorId:
        """Round-robin leader for ``(round, rank)``: V[(round + rank) mod n].

        ``rank`` 0 is the highest-ranked leader of the round. Callers that
        collapse round and rank into a single offset can pass it as ``round``.
        """
        if rank < 0:
            raise CommitteeError(f"leader rank must be >= 0, got {rank}")
        return (round + rank) % self.size

    def max_leaders_per_round(self) -> int:
        return self.quorum_threshold()

    def check_leaders_per_round(self, count: int) -> int:
        if not 1 <= count <= self.max_leaders_per_round():
            raise CommitteeError(
                f"leaders per round must be in [1, {self.max_leaders_per_round()}], got {count}"
            )
        return count
