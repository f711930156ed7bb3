"""Deterministic discrete-event network simulator.

Virtual time is integer microseconds.  Events are executed in strict
(time, sequence-number) order from a single heap, so a scenario plus its
seed fully determines every observable output -- two runs of the same
scenario produce byte-identical reports.

The network is partially synchronous: every message sent at time t arrives
by max(t, GST) + delta.  Before GST, delays are drawn adversarially up to a
configurable cap (then clamped to the GST + delta horizon); after GST the
sampled delay itself is clamped to delta.  Broadcast is n-1 independent
unicasts.  Randomness comes from named sub-streams of the scenario seed
(one per channel pair, one for load jitter, one per faulty validator), so
toggling one knob never perturbs the other streams.
"""

from __future__ import annotations

import heapq
import logging
import random
from dataclasses import dataclass, field
from typing import Optional

from .committee import Committee
from .committer import Committer, LeaderSlot
from .linearizer import CommitRecord, slot_to_text
from .scenario import DelayModel, Scenario
from .types import Transaction
from .validator import Message, RoundAdvance, ValidatorCore

log = logging.getLogger(__name__)

MS = 1000  # microseconds per millisecond

_DELIVER = 0
_TIMER = 1
_TX = 2
_STOP = 3


class LivenessWatchdog(RuntimeError):
    """The event budget ran out before the run quiesced."""


@dataclass
class ValidatorOutcome:
    """Everything observable about one validator at the end of a run."""

    vid: int
    fault: str  # "" for honest
    crashed: bool
    rounds_completed: int
    max_round_seen: int
    last_consumed_slot: Optional[LeaderSlot]
    commit_slots: list[LeaderSlot]
    commit_sequence_refs: list[str]
    commit_records: list[CommitRecord]
    round_metrics: list[RoundAdvance]
    latency_samples_us: list[int]
    counters: dict[str, int]

    @property
    def honest(self) -> bool:
        return not self.fault


@dataclass
class RunReport:
    scenario: dict
    validators: list[ValidatorOutcome]
    event_counts: dict[str, int]
    final_time_us: int

    def honest_outcomes(self) -> list[ValidatorOutcome]:
        return [v for v in self.validators if v.honest]


class _Channel:
    """Delay sampling for one ordered validator pair."""

    def __init__(self, scenario: Scenario, i: int, j: int) -> None:
        self._rng = random.Random(f"{scenario.seed}:delay:{i}:{j}")
        self._model = scenario.delay
        self._i = i
        self._j = j
        self._delta_us = scenario.delta_us
        self._gst_us = scenario.gst_us
        self._pre_cap_us = scenario.pre_gst_cap_us

    def _model_sample_us(self) -> int:
        m = self._model
        if m.kind == "fixed":
            return int(m.fixed_ms * MS)
        if m.kind == "uniform":
            return int(self._rng.uniform(m.lo_ms, m.hi_ms) * MS)
        if m.kind == "matrix":
            assert m.matrix_ms is not None
            base = m.matrix_ms[self._i][self._j]
            if m.jitter_ms:
                base += self._rng.uniform(0.0, m.jitter_ms)
            return int(base * MS)
        raise ValueError(f"unknown delay model kind: {m.kind}")

    def arrival(self, send_us: int) -> int:
        if send_us >= self._gst_us:
            delay = min(self._model_sample_us(), self._delta_us)
            arrival = send_us + delay
            assert arrival - send_us <= self._delta_us
            return arrival
        raw = int(self._rng.uniform(0.0, self._pre_cap_us))
        return min(send_us + raw, self._gst_us + self._delta_us)


class _Port:
    """A validator's handle onto the simulator (its NetworkHandle)."""

    def __init__(self, sim: "Simulation", vid: int) -> None:
        self._sim = sim
        self._vid = vid

    def broadcast(self, payload: Message) -> None:
        self._sim.broadcast(self._vid, payload)

    def send(self, to: int, payload: Message) -> None:
        self._sim.unicast(self._vid, to, payload)

    def set_timer(self, at_us: int, tag: int) -> None:
        self._sim.set_timer(self._vid, at_us, tag)


class Simulation:
    def __init__(self, scenario: Scenario) -> None:
        scenario.validate()
        self.scenario = scenario
        self.committee = Committee(scenario.n)
        self.committer = Committer(
            self.committee,
            leaders_per_round=scenario.leaders_per_round,
            pipelined=scenario.pipelining,
        )
        self.now_us = 0
        self._heap: list[tuple[int, int, int, int, object]] = []
        self._seq = 0
        self.counts = {
            "events": 0,
            "delivered": 0,
            "dropped_crashed": 0,
            "timers": 0,
            "transactions": 0,
        }
        self._channels: dict[tuple[int, int], _Channel] = {}

        self.validators: list[ValidatorCore] = []
        for vid in range(scenario.n):
            crash_at = scenario.crashes.get(vid)
            equiv = scenario.equivocators.get(vid)
            self.validators.append(
                ValidatorCore(
                    vid,
                    self.committee,
                    self.committer,
                    _Port(self, vid),
                    delta_us=scenario.delta_us,
                    unsafe_parent_threshold=scenario.unsafe_parent_threshold,
                    optimization=scenario.optimization,
                    max_block_bytes=scenario.max_block_bytes,
                    crash_at_round=crash_at,
                    equivocate=equiv,
                    fault_rng=random.Random(f"{scenario.seed}:fault:{vid}"),
                )
            )

    # -- scheduling ------------------------------------------------------------

    def _push(self, at_us: int, kind: int, vid: int, payload: object) -> None:
        heapq.heappush(self._heap, (at_us, self._seq, kind, vid, payload))
        self._seq += 1

    def _channel(self, i: int, j: int) -> _Channel:
        ch = self._channels.get((i, j))
        if ch is None:
            ch = _Channel(self.scenario, i, j)
            self._channels[(i, j)] = ch
        return ch

    def unicast(self, frm: int, to: int, payload: Message) -> None:
        arrival = self._channel(frm, to).arrival(self.now_us)
        self._push(arrival, _DELIVER, to, payload)

    def broadcast(self, frm: int, payload: Message) -> None:
        for to in self.committee.validators:
            if to != frm:
                self.unicast(frm, to, payload)

    def set_timer(self, vid: int, at_us: int, tag: int) -> None:
        self._push(at_us, _TIMER, vid, tag)

    # -- load ------------------------------------------------------------------

    def _schedule_load(self) -> None:
        sc = self.scenario
        if sc.tx_rate <= 0 or sc.duration_us <= 0:
            return
        total = int(sc.tx_rate * sc.duration_us / 1_000_000)
        if total <= 0:
            return
        rng = random.Random(f"{sc.seed}:load")
        spacing = sc.duration_us / total
        body = b"\x00" * max(0, sc.tx_size - 8)
        for k in range(total):
            at = int(k * spacing + rng.uniform(0.0, spacing / 2))
            if at >= sc.duration_us:
                at = sc.duration_us - 1
            tx = Transaction(
                payload=k.to_bytes(8, "big") + body,
                created_us=at,
                client=k % sc.n,
            )
            self._push(at, _TX, k % sc.n, tx)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> RunReport:
        sc = self.scenario
        self._schedule_load()
        self._push(sc.duration_us, _STOP, -1, None)
        for v in self.validators:
            v.start(0)

        budget = sc.event_budget
        while self._heap:
            self.counts["events"] += 1
            if self.counts["events"] > budget:
                raise LivenessWatchdog(
                    f"event budget {budget} exceeded at t={self.now_us}us; "
                    f"heap depth {len(self._heap)}"
                )
            at, _, kind, vid, payload = heapq.heappop(self._heap)
            assert at >= self.now_us, "time went backwards"
            self.now_us = at
            if kind == _STOP:
                for v in self.validators:
                    v.proposing = False
                continue
            target = self.validators[vid]
            if kind == _DELIVER:
                if target.crashed:
                    self.counts["dropped_crashed"] += 1
                    continue
                self.counts["delivered"] += 1
                target.on_message(payload, at)  # type: ignore[arg-type]
            elif kind == _TIMER:
                self.counts["timers"] += 1
                target.on_timer(payload, at)  # type: ignore[arg-type]
            elif kind == _TX:
                if not target.crashed:
                    self.counts["transactions"] += 1
                    target.on_transaction(payload, at)  # type: ignore[arg-type]

        return self._report()

    # -- reporting ---------------------------------------------------------------

    def _report(self) -> RunReport:
        outcomes = []
        for v in self.validators:
            sc = self.scenario
            if v.vid in sc.crashes:
                fault = f"crash@{sc.crashes[v.vid]}"
            elif v.vid in sc.equivocators:
                fault = f"equivocate:{sc.equivocators[v.vid]}"
            else:
                fault = ""
            outcomes.append(
                ValidatorOutcome(
                    vid=v.vid,
                    fault=fault,
                    crashed=v.crashed,
                    rounds_completed=len(v.round_metrics),
                    max_round_seen=v.max_round_seen,
                    last_consumed_slot=v.linearizer.last_consumed,
                    commit_slots=list(v.linearizer.commit_slots),
                    commit_sequence_refs=[
                        r.to_text() for r in v.linearizer.commit_sequence
                    ],
                    commit_records=list(v.linearizer.records),
                    round_metrics=list(v.round_metrics),
                    latency_samples_us=list(v.latency_samples_us),
                    counters=dict(v.counters),
                )
            )
        return RunReport(
            scenario=self.scenario.to_dict(),
            validators=outcomes,
            event_counts=dict(self.counts),
            final_time_us=self.now_us,
        )


def run_scenario(scenario: Scenario) -> RunReport:
    """Build and run one simulation to quiescence."""
    return Simulation(scenario).run()
