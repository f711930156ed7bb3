import random

import pytest

from dagbft.committee import Committee, CommitteeError
from dagbft.committer import (
    Committer,
    LeaderSlot,
    LeaderStatus,
    ProtocolViolation,
    SlotState,
    WAVE_LENGTH,
    decision_round,
    propose_round,
    skipped_leader,
    supported_leader,
    thick_link,
    try_direct_decide,
    try_indirect_decide,
    wave_number,
)
from dagbft.dag import DagStore, insert_all
from dagbft.types import Block, Transaction, genesis_blocks

from dagfixtures import (
    bfs_link,
    build_walkthrough,
    by_ref_index,
    fully_connected_dag,
    random_dag,
)


class TestWaveArithmetic:
    def test_two_round_waves(self):
        assert WAVE_LENGTH == 2
        for wave in range(5):
            p = propose_round(wave)
            assert decision_round(wave) == p + 1
            assert wave_number(p) == wave

    def test_offset_families(self):
        # pipelining runs two interleaved wave families, offsets 0 and 1
        assert propose_round(3, offset=1) == 7
        assert decision_round(3, offset=1) == 8
        assert wave_number(7, offset=1) == 3
        with pytest.raises(ValueError):
            wave_number(7, offset=0)
        with pytest.raises(ValueError):
            wave_number(4, offset=1)


class TestSlotTypes:
    def test_slot_text_and_order(self):
        slot = LeaderSlot(3, 1, 4)
        assert str(slot) == "r3#1@v4"
        assert LeaderSlot(2, 1, 0) < LeaderSlot(3, 0, 0) < LeaderSlot(3, 1, 0)

    def test_status_block_iff_commit(self):
        slot = LeaderSlot(1, 0, 0)
        block = genesis_blocks(6)[0]
        with pytest.raises(ValueError):
            LeaderStatus(slot, SlotState.COMMIT)
        with pytest.raises(ValueError):
            LeaderStatus(slot, SlotState.SKIP, block)
        with pytest.raises(ValueError):
            LeaderStatus(slot, SlotState.UNDECIDED, block)
        LeaderStatus(slot, SlotState.COMMIT, block)
        LeaderStatus(slot, SlotState.SKIP)


class TestWalkthroughDag:
    """Hand-built 4-round DAG with every slot decision derived by hand."""

    EXPECTED = {
        (1, 0): SlotState.SKIP,  # indirectly skipped via the round-3 anchor
        (1, 1): SlotState.COMMIT,  # indirectly committed via the round-3 anchor
        (2, 0): SlotState.UNDECIDED,  # its anchor is still undecided
        (2, 1): SlotState.COMMIT,  # direct: 5 supporters
        (3, 0): SlotState.COMMIT,  # direct: all 6 support
        (3, 1): SlotState.SKIP,  # direct: 5 blamers
        (4, 0): SlotState.UNDECIDED,  # no decision round yet
        (4, 1): SlotState.UNDECIDED,
    }

    def test_slot_outcomes(self):
        committee, store, blocks, committer = build_walkthrough()
        statuses = committer.try_decide(store, 0, 4)
        assert [(s.slot.round, s.slot.rank) for s in statuses] == sorted(self.EXPECTED)
        got = {(s.slot.round, s.slot.rank): s.state for s in statuses}
        assert got == self.EXPECTED

    def test_committed_block_identities(self):
        committee, store, blocks, committer = build_walkthrough()
        by_slot = {
            (s.slot.round, s.slot.rank): s for s in committer.try_decide(store, 0, 4)
        }
        assert by_slot[(1, 1)].block == blocks["C1"]
        assert by_slot[(2, 1)].block == blocks["B2"]
        assert by_slot[(3, 0)].block == blocks["B3"]

    def test_sequencing_prefix(self):
        """Walking the statuses commits exactly one leader before the first
        undecided slot: skip, commit, stop."""
        committee, store, blocks, committer = build_walkthrough()
        statuses = committer.try_decide(store, 0, 4)
        sequence = []
        for status in statuses:
            if status.state is SlotState.UNDECIDED:
                break
            if status.state is SlotState.COMMIT:
                sequence.append(status.block)
        assert sequence == [blocks["C1"]]

    def test_direct_helpers(self):
        committee, store, blocks, _ = build_walkthrough()
        assert supported_leader(store, committee, blocks["B3"])
        assert not skipped_leader(store, committee, blocks["B3"])
        assert skipped_leader(store, committee, blocks["E3"])
        assert not supported_leader(store, committee, blocks["E2"])
        assert not skipped_leader(store, committee, blocks["E2"])

    def test_indirect_skip_counts_only_anchor_history(self):
        """L1a has 3 supporters in the full store but only 2 inside the
        anchor's history, which is what decides."""
        committee, store, blocks, _ = build_walkthrough()
        anchor, leader = blocks["B3"], blocks["D1"]
        supporters = {
            b.author
            for b in store.blocks_at_round(2)
            if leader.ref in b.parent_set
        }
        assert len(supporters) == committee.indirect_quorum_threshold()
        assert not thick_link(store, committee, anchor, leader)
        assert thick_link(store, committee, anchor, blocks["C1"])

    def test_decisions_monotone_as_rounds_arrive(self):
        """Replaying the DAG round by round never flips a decided slot."""
        committee, _, blocks, committer = build_walkthrough()
        history: dict[tuple, list[SlotState]] = {}
        store = DagStore.bootstrapped(committee)
        for upto in (1, 2, 3, 4):
            insert_all(store, [b for b in blocks.values() if b.round == upto])
            for s in committer.try_decide(store, 0, upto):
                history.setdefault((s.slot.round, s.slot.rank), []).append(s.state)
        for key, states in history.items():
            decided = [s for s in states if s is not SlotState.UNDECIDED]
            # once decided, always decided the same way
            assert len(set(decided)) <= 1, f"slot {key} flipped: {states}"
            if decided:
                assert states[-1] is decided[0]
                first = states.index(decided[0])
                assert all(s is decided[0] for s in states[first:])

    def test_try_decide_is_pure(self):
        committee, store, blocks, committer = build_walkthrough()
        size = len(store)
        first = committer.try_decide(store, 0, 4)
        second = committer.try_decide(store, 0, 4)
        assert first == second
        assert len(store) == size

    def test_r_committed_bounds_the_walk(self):
        committee, store, blocks, committer = build_walkthrough()
        statuses = committer.try_decide(store, 2, 4)
        assert [s.slot.round for s in statuses] == [3, 3, 4, 4]

    def test_rounds_without_blocks_stay_undecided(self):
        committee, store, blocks, committer = build_walkthrough()
        statuses = committer.try_decide(store, 0, 6)
        for s in statuses:
            if s.slot.round >= 4:
                assert s.state is SlotState.UNDECIDED


class TestDirectRuleOnEquivocators:
    def _setup(self):
        committee = Committee(6)
        store = DagStore.bootstrapped(committee)
        g = {b.author: b.ref for b in store.blocks_at_round(0)}
        round1 = {}
        for a in range(6):
            if a == 2:
                continue
            blk = Block(a, 1, (g[a],) + tuple(g[o] for o in range(6) if o != a))
            store.insert(blk)
            round1[a] = blk
        v1 = Block(2, 1, (g[2],) + tuple(g[o] for o in range(6) if o != 2), (Transaction(b"first"),))
        v2 = Block(2, 1, (g[2],) + tuple(g[o] for o in range(6) if o != 2), (Transaction(b"second"),))
        store.insert(v1)
        store.insert(v2)
        lo, hi = sorted([v1, v2], key=lambda b: b.digest)
        return committee, store, round1, lo, hi

    def _fill_decision_round(self, store, round1, variant):
        """All six round-2 blocks reference ``variant`` as author 2's block."""
        for a in range(6):
            own = variant.ref if a == 2 else round1[a].ref
            others = [round1[o].ref for o in range(6) if o != a and o != 2]
            if a != 2:
                others.append(variant.ref)
            store.insert(Block(a, 2, (own,) + tuple(others)))

    def test_unsupported_variant_cannot_veto_the_slot(self):
        committee, store, round1, lo, hi = self._setup()
        self._fill_decision_round(store, round1, hi)
        slot = LeaderSlot(1, 0, 2)
        status = try_direct_decide(store, committee, slot)
        # Every voter references `hi`, so nobody blames the slot: `lo`
        # sitting unsupported at a lower digest must not flip this to a
        # skip, or validators holding different variant subsets would
        # decide the same slot differently.
        assert status.state is SlotState.COMMIT
        assert status.block == hi

    def test_commit_names_the_supported_variant(self):
        committee, store, round1, lo, hi = self._setup()
        self._fill_decision_round(store, round1, lo)
        status = try_direct_decide(store, committee, LeaderSlot(1, 0, 2))
        assert status.state is SlotState.COMMIT
        assert status.block == lo

    def test_split_votes_leave_the_slot_undecided(self):
        committee, store, round1, lo, hi = self._setup()
        # Three voters reference `lo`, three reference `hi`: neither variant
        # reaches a support quorum and nobody omits the slot, so the direct
        # rule must defer rather than skip.
        for a in range(6):
            variant = lo if a < 3 else hi
            own = variant.ref if a == 2 else round1[a].ref
            others = [round1[o].ref for o in range(6) if o != a and o != 2]
            if a != 2:
                others.append(variant.ref)
            store.insert(Block(a, 2, (own,) + tuple(others)))
        status = try_direct_decide(store, committee, LeaderSlot(1, 0, 2))
        assert status.state is SlotState.UNDECIDED

    def test_quorum_on_both_sides_is_a_violation(self):
        """Five authors each equivocate at the decision round, one variant
        supporting and one blaming: impossible below f+1 faults."""
        committee = Committee(6)
        store = DagStore.bootstrapped(committee)
        g = {b.author: b.ref for b in store.blocks_at_round(0)}
        round1 = {}
        for a in range(6):
            blk = Block(a, 1, (g[a],) + tuple(g[o] for o in range(6) if o != a))
            store.insert(blk)
            round1[a] = blk
        leader = round1[0]
        for a in range(1, 6):
            support_parents = (round1[a].ref,) + tuple(
                round1[o].ref for o in range(6) if o != a
            )
            blame_parents = (round1[a].ref,) + tuple(
                round1[o].ref for o in range(1, 6) if o != a
            )
            store.insert(Block(a, 2, support_parents, (Transaction(b"s"),)))
            store.insert(Block(a, 2, blame_parents, (Transaction(b"b"),)))
        with pytest.raises(ProtocolViolation):
            try_direct_decide(store, committee, LeaderSlot(1, 0, 0))
        with pytest.raises(ProtocolViolation):
            supported_leader(store, committee, leader)


class TestEmptySlot:
    def _store_without_author0(self, round2_authors):
        committee = Committee(6)
        store = DagStore.bootstrapped(committee)
        g = {b.author: b.ref for b in store.blocks_at_round(0)}
        round1 = {}
        for a in range(1, 6):
            blk = Block(a, 1, (g[a],) + tuple(g[o] for o in range(6) if o != a))
            store.insert(blk)
            round1[a] = blk
        for a in round2_authors:
            others = [round1[o].ref for o in round1 if o != a]
            store.insert(Block(a, 2, (round1[a].ref,) + tuple(others)))
        return committee, store

    def test_empty_slot_skipped_with_full_decision_round(self):
        committee, store = self._store_without_author0(round2_authors=(1, 2, 3, 4, 5))
        status = try_direct_decide(store, committee, LeaderSlot(1, 0, 0))
        assert status.state is SlotState.SKIP

    def test_empty_slot_needs_a_quorum_of_deciders(self):
        committee, store = self._store_without_author0(round2_authors=(1, 2, 3, 4))
        status = try_direct_decide(store, committee, LeaderSlot(1, 0, 0))
        assert status.state is SlotState.UNDECIDED

    def test_empty_slot_without_decision_round_stays_undecided(self):
        committee, store = self._store_without_author0(round2_authors=())
        status = try_direct_decide(store, committee, LeaderSlot(1, 0, 0))
        assert status.state is SlotState.UNDECIDED


class TestIndirectAnchorSelection:
    def _fixture(self):
        committee, store, blocks, _ = build_walkthrough()
        slot = LeaderSlot(1, 0, 3)  # the round-1 rank-0 leader (D1)
        return committee, store, blocks, slot

    def test_no_later_statuses_leaves_undecided(self):
        committee, store, blocks, slot = self._fixture()
        status = try_indirect_decide(store, committee, slot, [])
        assert status.state is SlotState.UNDECIDED

    def test_undecided_anchor_blocks_the_decision(self):
        committee, store, blocks, slot = self._fixture()
        later = [LeaderStatus(LeaderSlot(3, 0, 1), SlotState.UNDECIDED)]
        status = try_indirect_decide(store, committee, slot, later)
        assert status.state is SlotState.UNDECIDED

    def test_statuses_at_or_below_decision_round_are_not_anchors(self):
        committee, store, blocks, slot = self._fixture()
        later = [LeaderStatus(LeaderSlot(2, 1, 1), SlotState.COMMIT, blocks["B2"])]
        status = try_indirect_decide(store, committee, slot, later)
        assert status.state is SlotState.UNDECIDED

    def test_skips_are_passed_over_when_looking_for_the_anchor(self):
        committee, store, blocks, slot = self._fixture()
        later = [
            LeaderStatus(LeaderSlot(3, 0, 1), SlotState.SKIP),
            LeaderStatus(LeaderSlot(4, 0, 2), SlotState.COMMIT, blocks["C4"]),
        ]
        status = try_indirect_decide(store, committee, slot, later)
        # C4's history reaches all three supporters of D1, so with this
        # anchor the same slot commits -- anchor identity decides.
        assert status.state is SlotState.COMMIT
        assert status.block == blocks["D1"]

    def test_committed_anchor_without_thick_link_skips(self):
        committee, store, blocks, slot = self._fixture()
        later = [LeaderStatus(LeaderSlot(3, 0, 1), SlotState.COMMIT, blocks["B3"])]
        status = try_indirect_decide(store, committee, slot, later)
        assert status.state is SlotState.SKIP


class TestThickLinkOracle:
    """thick_link against a brute-force recount over BFS reachability."""

    @pytest.mark.parametrize("seed", [3, 17, 40])
    def test_random_dags(self, seed):
        committee = Committee(6)
        rng = random.Random(seed)
        store, blocks = random_dag(committee, rounds=5, rng=rng)
        index = by_ref_index(list(store))
        threshold = committee.indirect_quorum_threshold()
        checked = 0
        for leader in (b for b in blocks if b.round <= 3):
            anchors = [a for a in blocks if a.round >= leader.round + 2]
            for anchor in rng.sample(anchors, min(4, len(anchors))):
                voters = {
                    b.author
                    for b in store.blocks_at_round(leader.round + 1)
                    if leader.ref in b.parent_set
                    and bfs_link(b.ref, anchor.ref, index)
                }
                expected = len(voters) >= threshold
                assert thick_link(store, committee, anchor, leader) == expected
                checked += 1
        assert checked >= 50


class TestCommitterShape:
    def test_slots_and_schedule_default(self):
        committee = Committee(6)
        committer = Committer(committee, leaders_per_round=3)
        slots = committer.slots_for_round(7)
        assert [(s.rank, s.authority) for s in slots] == [(0, 1), (1, 2), (2, 3)]
        assert committer.authority_of(7, 2) == committee.elect_leader(7, 2)

    def test_no_slots_round_zero_or_below(self):
        committer = Committer(Committee(6))
        assert not committer.has_slots(0)
        assert not committer.has_slots(-3)
        assert committer.slots_for_round(0) == []

    def test_unpipelined_rounds(self):
        committer = Committer(Committee(6), pipelined=False)
        assert [r for r in range(1, 7) if committer.has_slots(r)] == [2, 4, 6]

    def test_unpipelined_decisions(self):
        committee = Committee(6)
        store, _ = fully_connected_dag(committee, rounds=4)
        committer = Committer(committee, pipelined=False)
        statuses = committer.try_decide(store, 0, 4)
        assert [(s.slot.round, s.state) for s in statuses] == [
            (2, SlotState.COMMIT),
            (4, SlotState.UNDECIDED),
        ]

    def test_rejects_bad_leader_count(self):
        with pytest.raises(CommitteeError):
            Committer(Committee(6), leaders_per_round=6)

    def test_full_rotation_all_commit(self):
        """Fully-connected rounds commit every slot of every decidable round,
        authored round-robin."""
        committee = Committee(6)
        store, _ = fully_connected_dag(committee, rounds=21)
        committer = Committer(committee, leaders_per_round=5)
        statuses = committer.try_decide(store, 0, 21)
        decided = [s for s in statuses if s.slot.round <= 20]
        assert len(decided) == 100
        assert all(s.state is SlotState.COMMIT for s in decided)
        for s in decided:
            assert s.block is not None
            assert s.block.author == (s.slot.round + s.slot.rank) % 6
        tail = [s for s in statuses if s.slot.round == 21]
        assert all(s.state is SlotState.UNDECIDED for s in tail)
