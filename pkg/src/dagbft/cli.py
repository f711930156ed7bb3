"""Command-line front end: run scenarios, verify commit logs, summarize reports.

Exit codes: 0 success, 1 usage error (bad flags, unreadable or invalid
inputs), 2 invariant/verification failure, 3 liveness watchdog trip.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence, Union

import yaml

from .committee import CommitteeError
from .committer import ProtocolViolation
from .report import ReportError, summarize_report_file, verify_logs, write_run
from .scenario import ScenarioError, load_scenario
from .simnet import LivenessWatchdog, run_scenario


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for
    verification failures, so remap usage problems to exit 1."""

    def error(self, message: str) -> "NoReturn":  # type: ignore[name-defined]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_seed(text: str) -> Union[int, str]:
    try:
        return int(text)
    except ValueError:
        return text


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dagbft", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute a scenario and write its outputs")
    run.add_argument("scenario", help="scenario YAML file")
    run.add_argument("--out", "-o", required=True, help="output directory")
    run.add_argument(
        "--seed",
        required=True,
        type=_parse_seed,
        help="run seed (required; there is no ambient randomness)",
    )
    run.add_argument("--delta-ms", type=float, help="override the synchrony bound")
    run.add_argument("--gst-ms", type=float, help="override the stabilization time")
    run.add_argument("--duration-ms", type=float, help="override the load duration")
    run.add_argument("--tx-rate", type=float, help="override the load rate (tx/s)")
    run.add_argument("--leaders-per-round", type=int, help="override leader count")
    run.add_argument("--event-budget", type=int, help="override the watchdog budget")
    run.add_argument(
        "--no-pipelining",
        action="store_true",
        help="open a wave only every second round",
    )
    run.add_argument(
        "--no-optimization",
        action="store_true",
        help="disable early block production on leader blames",
    )
    run.add_argument(
        "--unsafe-parent-threshold",
        action="store_true",
        help="UNSAFE: lower the proposal gate from 4f+1 to ceil(2n/3) parents; "
        "violates the fault model's safety margin and exists for comparison runs",
    )

    verify = sub.add_parser("verify", help="cross-check commit logs for consistency")
    verify.add_argument("logs", nargs="+", help="two or more commit-v<id>.log files")

    summarize = sub.add_parser("summarize", help="print the summary of a report file")
    summarize.add_argument("report", help="report.jsonl produced by run")

    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {"seed": args.seed}
    if args.delta_ms is not None:
        overrides["delta_ms"] = args.delta_ms
    if args.gst_ms is not None:
        overrides["gst_ms"] = args.gst_ms
    if args.duration_ms is not None:
        overrides["duration_ms"] = args.duration_ms
    if args.tx_rate is not None:
        overrides["tx_rate"] = args.tx_rate
    if args.leaders_per_round is not None:
        overrides["leaders_per_round"] = args.leaders_per_round
    if args.event_budget is not None:
        overrides["event_budget"] = args.event_budget
    if args.no_pipelining:
        overrides["pipelining"] = False
    if args.no_optimization:
        overrides["optimization"] = False
    if args.unsafe_parent_threshold:
        overrides["unsafe_parent_threshold"] = True
    return overrides


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario, _overrides_from_args(args))
    except (ScenarioError, CommitteeError, yaml.YAMLError, OSError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 1
    try:
        report = run_scenario(scenario)
    except LivenessWatchdog as exc:
        print(f"liveness watchdog: {exc}", file=sys.stderr)
        return 3
    except ProtocolViolation as exc:
        print(f"protocol invariant violated: {exc}", file=sys.stderr)
        return 2
    paths = write_run(report, args.out)
    with open(paths["summary"]) as fh:
        print(fh.read(), end="")
    print(f"wrote {len(paths)} files under {args.out}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    try:
        result = verify_logs(args.logs)
    except (ReportError, OSError) as exc:
        print(f"cannot verify: {exc}", file=sys.stderr)
        return 1
    print(result.message)
    return 0 if result.ok else 2


def _cmd_summarize(args: argparse.Namespace) -> int:
    try:
        stats = summarize_report_file(args.report)
    except (ReportError, OSError) as exc:
        print(f"cannot summarize: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(stats.to_dict(), indent=2))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return _cmd_verify(args)
    return _cmd_summarize(args)


if __name__ == "__main__":
    sys.exit(main())
