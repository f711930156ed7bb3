"""Scenario configuration: what a simulation run looks like.

Scenarios live in YAML files mapping 1:1 onto :class:`Scenario`; the CLI can
override individual fields.  Everything that influences a run -- committee
size, leader schedule shape, delay model, GST, fault plan, load, seed --
is in here, and nothing else is: a scenario plus the code fully determines
the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .committee import Committee


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class DelayModel:
    """One-way message delay distribution.

    kind: fixed | uniform | matrix.  A matrix gives per-(sender, receiver)
    milliseconds; ``sender_classes`` in scenario files is sugar that expands
    to a matrix where every edge takes the sender's class delay.
    """

    kind: str = "fixed"
    fixed_ms: float = 50.0
    lo_ms: float = 10.0
    hi_ms: float = 100.0
    matrix_ms: Optional[tuple[tuple[float, ...], ...]] = None
    jitter_ms: float = 0.0


@dataclass(frozen=True)
class Scenario:
    n: int = 6
    leaders_per_round: int = 1
    pipelining: bool = True
    delta_ms: float = 100.0
    gst_ms: float = 0.0
    pre_gst_cap_ms: float = 500.0
    delay: DelayModel = field(default_factory=DelayModel)
    crashes: dict[int, int] = field(default_factory=dict)
    equivocators: dict[int, int] = field(default_factory=dict)
    tx_rate: float = 0.0
    tx_size: int = 512
    duration_ms: float = 1000.0
    seed: Optional[Union[int, str]] = None
    unsafe_parent_threshold: bool = False
    optimization: bool = True
    max_block_bytes: int = 262_144
    event_budget: int = 2_000_000

    # -- derived -----------------------------------------------------------

    @property
    def delta_us(self) -> int:
        return int(self.delta_ms * 1000)

    @property
    def gst_us(self) -> int:
        return int(self.gst_ms * 1000)

    @property
    def pre_gst_cap_us(self) -> int:
        return int(self.pre_gst_cap_ms * 1000)

    @property
    def duration_us(self) -> int:
        return int(self.duration_ms * 1000)

    def validate(self) -> None:
        committee = Committee(self.n)  # raises on bad n
        committee.check_leaders_per_round(self.leaders_per_round)
        if self.seed is None:
            raise ScenarioError("scenario needs an explicit seed")
        overlap = self.crashes.keys() & self.equivocators.keys()
        if overlap:
            raise ScenarioError(f"validators both crashed and equivocating: {sorted(overlap)}")
        faulty = len(self.crashes) + len(self.equivocators)
        if faulty > committee.f:
            raise ScenarioError(
                f"{faulty} faulty validators exceeds the f={committee.f} bound for n={self.n}"
            )
        for vid in (*self.crashes, *self.equivocators):
            if not committee.is_member(vid):
                raise ScenarioError(f"faulty validator {vid} outside committee")
        for vid, k in self.equivocators.items():
            if k < 2:
                raise ScenarioError(f"equivocator {vid} needs degree >= 2, got {k}")
        for vid, at in self.crashes.items():
            if at < 0:
                raise ScenarioError(f"crash round for {vid} must be >= 0, got {at}")
        if self.delay.kind not in ("fixed", "uniform", "matrix"):
            raise ScenarioError(f"unknown delay kind: {self.delay.kind}")
        if self.delay.kind == "matrix":
            m = self.delay.matrix_ms
            if m is None or len(m) != self.n or any(len(row) != self.n for row in m):
                raise ScenarioError(f"delay matrix must be {self.n}x{self.n}")
        if self.delta_ms <= 0:
            raise ScenarioError("delta_ms must be positive")
        if self.tx_size < 8:
            raise ScenarioError("tx_size must be at least 8 bytes")

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        delay: dict[str, Any] = {"kind": self.delay.kind}
        if self.delay.kind == "fixed":
            delay["fixed_ms"] = self.delay.fixed_ms
        elif self.delay.kind == "uniform":
            delay["lo_ms"] = self.delay.lo_ms
            delay["hi_ms"] = self.delay.hi_ms
        else:
            delay["matrix_ms"] = [list(row) for row in self.delay.matrix_ms or ()]
        if self.delay.jitter_ms:
            delay["jitter_ms"] = self.delay.jitter_ms
        return {
            "n": self.n,
            "leaders_per_round": self.leaders_per_round,
            "pipelining": self.pipelining,
            "delta_ms": self.delta_ms,
            "gst_ms": self.gst_ms,
            "pre_gst_cap_ms": self.pre_gst_cap_ms,
            "delay": delay,
            "faults": {
                "crashes": {str(k): v for k, v in sorted(self.crashes.items())},
                "equivocators": {str(k): v for k, v in sorted(self.equivocators.items())},
            },
            "load": {
                "tx_rate": self.tx_rate,
                "tx_size": self.tx_size,
                "duration_ms": self.duration_ms,
            },
            "seed": self.seed,
            "unsafe_parent_threshold": self.unsafe_parent_threshold,
            "optimization": self.optimization,
            "max_block_bytes": self.max_block_bytes,
            "event_budget": self.event_budget,
        }


def _parse_delay(obj: dict, n: int) -> DelayModel:
    kind = obj.get("kind", "fixed")
    if kind == "sender_classes":
        classes = obj["classes_ms"]
        assignment = obj["assignment"]
        if len(assignment) != n:
            raise ScenarioError(f"sender class assignment must list all {n} validators")
        matrix = tuple(
            tuple(float(classes[assignment[i]]) for _ in range(n)) for i in range(n)
        )
        return DelayModel(kind="matrix", matrix_ms=matrix, jitter_ms=float(obj.get("jitter_ms", 0.0)))
    fields: dict[str, Any] = {"kind": kind}
    for key in ("fixed_ms", "lo_ms", "hi_ms", "jitter_ms"):
        if key in obj:
            fields[key] = float(obj[key])
    if "matrix_ms" in obj:
        fields["matrix_ms"] = tuple(tuple(float(x) for x in row) for row in obj["matrix_ms"])
    return DelayModel(**fields)


def from_dict(obj: dict) -> Scenario:
    """Build a Scenario from a parsed scenario document."""
    known = {
        "n", "leaders_per_round", "pipelining", "delta_ms", "gst_ms",
        "pre_gst_cap_ms", "delay", "faults", "load", "seed",
        "unsafe_parent_threshold", "optimization", "max_block_bytes",
        "event_budget",
    }
    unknown = obj.keys() - known
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
    n = int(obj.get("n", 6))
    kwargs: dict[str, Any] = {"n": n}
    for key in ("leaders_per_round", "max_block_bytes", "event_budget"):
        if key in obj:
            kwargs[key] = int(obj[key])
    for key in ("pipelining", "unsafe_parent_threshold", "optimization"):
        if key in obj:
            kwargs[key] = bool(obj[key])
    for key in ("delta_ms", "gst_ms", "pre_gst_cap_ms"):
        if key in obj:
            kwargs[key] = float(obj[key])
    if "seed" in obj:
        kwargs["seed"] = obj["seed"]
    if "delay" in obj:
        kwargs["delay"] = _parse_delay(dict(obj["delay"]), n)
    faults = obj.get("faults") or {}
    kwargs["crashes"] = {int(k): int(v) for k, v in (faults.get("crashes") or {}).items()}
    kwargs["equivocators"] = {
        int(k): int(v) for k, v in (faults.get("equivocators") or {}).items()
    }
    load = obj.get("load") or {}
    if "tx_rate" in load:
        kwargs["tx_rate"] = float(load["tx_rate"])
    if "tx_size" in load:
        kwargs["tx_size"] = int(load["tx_size"])
    if "duration_ms" in load:
        kwargs["duration_ms"] = float(load["duration_ms"])
    return Scenario(**kwargs)


def load_scenario(path: Union[str, Path], overrides: Optional[dict] = None) -> Scenario:
    """Read a YAML scenario file, apply flat field overrides, and validate."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario file {path} must hold a mapping")
    scenario = from_dict(doc)
    if overrides:
        scenario = replace(scenario, **overrides)
    scenario.validate()
    return scenario
