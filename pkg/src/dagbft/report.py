"""Run output files, summary statistics, and cross-validator verification.

A run produces three kinds of files under its output directory:

* ``commit-v<id>.log``  -- one JSON line per block emitted into that
  validator's total order (the commit log checked by ``verify``);
* ``report.jsonl``      -- kind-tagged records: the scenario echo, one
  record per validator with its metrics, event counts, and the summary;
* ``summary.json``      -- the summary document alone.

All serialization uses fixed key order and no timestamps from the host, so
equal runs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .linearizer import slot_to_text
from .simnet import RunReport, ValidatorOutcome


class ReportError(ValueError):
    pass


# -- summary statistics ---------------------------------------------------------


def nearest_rank(sorted_samples: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile (no interpolation); sample must be sorted."""
    if not sorted_samples:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(pct / 100 * len(sorted_samples)))
    return sorted_samples[rank - 1]


@dataclass(frozen=True)
class SummaryStats:
    median_latency_ms: Optional[float]
    p90_latency_ms: Optional[float]
    committed_tx_count: int
    committed_slot_count: int
    undecided_tail: int

    def to_dict(self) -> dict:
        return {
            "median_latency_ms": self.median_latency_ms,
            "p90_latency_ms": self.p90_latency_ms,
            "committed_tx_count": self.committed_tx_count,
            "committed_slot_count": self.committed_slot_count,
            "undecided_tail": self.undecided_tail,
        }


def _slot_count_through(round_: int, leaders_per_round: int, pipelining: bool) -> int:
    """Number of leader slots in rounds 1..round_ inclusive."""
    if round_ < 1:
        return 0
    rounds = round_ if pipelining else round_ // 2
    return rounds * leaders_per_round


def _undecided_tail(outcome: ValidatorOutcome, leaders_per_round: int, pipelining: bool) -> int:
    """Slots whose decision round this validator has seen but not consumed."""
    decidable = outcome.max_round_seen - 1
    total = _slot_count_through(decidable, leaders_per_round, pipelining)
    last = outcome.last_consumed_slot
    if last is None:
        return total
    consumed = _slot_count_through(last.round - 1, leaders_per_round, pipelining)
    consumed += last.rank + 1
    return max(0, total - consumed)


def summarize_run(report: RunReport) -> SummaryStats:
    honest = report.honest_outcomes()
    samples = sorted(
        us / 1000 for outcome in honest for us in outcome.latency_samples_us
    )
    median = nearest_rank(samples, 50) if samples else None
    p90 = nearest_rank(samples, 90) if samples else None
    if honest:
        reference = max(honest, key=lambda o: (len(o.commit_records), -o.vid))
        slots = len(reference.commit_slots)
        tail = _undecided_tail(
            reference,
            report.scenario["leaders_per_round"],
            report.scenario["pipelining"],
        )
    else:
        slots, tail = 0, 0
    return SummaryStats(
        median_latency_ms=median,
        p90_latency_ms=p90,
        committed_tx_count=len(samples),
        committed_slot_count=slots,
        undecided_tail=tail,
    )


# -- file output ------------------------------------------------------------------


def _round_metric_dict(m) -> dict:
    return {
        "round": m.round,
        "entry_ms": m.entry_us / 1000,
        "duration_ms": m.duration_us / 1000,
        "reason": m.reason,
    }


def _validator_line(outcome: ValidatorOutcome) -> dict:
    return {
        "kind": "validator",
        "vid": outcome.vid,
        "fault": outcome.fault,
        "crashed": outcome.crashed,
        "rounds_completed": outcome.rounds_completed,
        "max_round_seen": outcome.max_round_seen,
        "last_consumed_slot": (
            slot_to_text(outcome.last_consumed_slot)
            if outcome.last_consumed_slot is not None
            else None
        ),
        "commit_slots": [slot_to_text(s) for s in outcome.commit_slots],
        "commit_sequence": list(outcome.commit_sequence_refs),
        "round_metrics": [_round_metric_dict(m) for m in outcome.round_metrics],
        "latency_samples_ms": [us / 1000 for us in outcome.latency_samples_us],
        "counters": dict(sorted(outcome.counters.items())),
    }


def commit_log_name(vid: int) -> str:
    return f"commit-v{vid}.log"


def write_run(report: RunReport, out_dir: Union[str, Path]) -> dict[str, Path]:
    """Write all run output files; returns the paths written by role."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize_run(report)

    paths: dict[str, Path] = {}
    for outcome in report.validators:
        path = out / commit_log_name(outcome.vid)
        with open(path, "w") as fh:
            for record in outcome.commit_records:
                fh.write(record.to_json_line() + "\n")
        paths[f"commit-v{outcome.vid}"] = path

    report_path = out / "report.jsonl"
    with open(report_path, "w") as fh:
        fh.write(json.dumps({"kind": "scenario", "scenario": report.scenario}) + "\n")
        for outcome in report.validators:
            fh.write(json.dumps(_validator_line(outcome)) + "\n")
        fh.write(
            json.dumps(
                {
                    "kind": "events",
                    "counts": dict(sorted(report.event_counts.items())),
                    "final_time_ms": report.final_time_us / 1000,
                }
            )
            + "\n"
        )
        fh.write(json.dumps({"kind": "summary", **summary.to_dict()}) + "\n")
    paths["report"] = report_path

    summary_path = out / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
    paths["summary"] = summary_path
    return paths


def read_report(path: Union[str, Path]) -> list[dict]:
    lines = []
    with open(path) as fh:
        for i, raw in enumerate(fh):
            raw = raw.strip()
            if not raw:
                continue
            try:
                lines.append(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise ReportError(f"{path}:{i + 1}: not valid JSON: {exc}") from exc
    if not lines:
        raise ReportError(f"{path}: empty report")
    return lines


def summarize_report_file(path: Union[str, Path]) -> SummaryStats:
    """Recover the summary from a report.jsonl file."""
    for line in read_report(path):
        if line.get("kind") == "summary":
            return SummaryStats(
                median_latency_ms=line["median_latency_ms"],
                p90_latency_ms=line["p90_latency_ms"],
                committed_tx_count=line["committed_tx_count"],
                committed_slot_count=line["committed_slot_count"],
                undecided_tail=line["undecided_tail"],
            )
    raise ReportError(f"{path}: no summary record found")


# -- commit log verification --------------------------------------------------------


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    message: str


def _load_log(path: Union[str, Path]) -> list[dict]:
    records = []
    with open(path) as fh:
        for i, raw in enumerate(fh):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ReportError(f"{path}:{i + 1}: not valid JSON: {exc}") from exc
            for key in ("observer", "leader_slot", "block_ref", "emit_index"):
                if key not in obj:
                    raise ReportError(f"{path}:{i + 1}: missing field {key!r}")
            records.append(obj)
    return records


def _projection(record: dict) -> tuple:
    # Observer identity and local commit times legitimately differ between
    # validators; the total order itself must not.
    return (record["emit_index"], record["leader_slot"], record["block_ref"])


def verify_logs(paths: Sequence[Union[str, Path]]) -> VerificationResult:
    """Check pairwise prefix consistency and duplicate-freedom of commit logs."""
    if len(paths) < 2:
        raise ReportError("verification needs at least two commit logs")
    logs = [(str(p), _load_log(p)) for p in paths]

    for name, records in logs:
        seen: set[str] = set()
        for i, rec in enumerate(records):
            if rec["emit_index"] != i:
                return VerificationResult(
                    False, f"{name}: record {i} has emit_index {rec['emit_index']}"
                )
            if rec["block_ref"] in seen:
                return VerificationResult(
                    False, f"{name}: duplicate block {rec['block_ref']} at record {i}"
                )
            seen.add(rec["block_ref"])

    for a in range(len(logs)):
        for b in range(a + 1, len(logs)):
            name_a, recs_a = logs[a]
            name_b, recs_b = logs[b]
            for i in range(min(len(recs_a), len(recs_b))):
                pa, pb = _projection(recs_a[i]), _projection(recs_b[i])
                if pa != pb:
                    return VerificationResult(
                        False,
                        f"divergence at record {i}: {name_a} has {pa}, {name_b} has {pb}",
                    )
    total = sum(len(records) for _, records in logs)
    return VerificationResult(True, f"{len(logs)} logs consistent ({total} records)")
