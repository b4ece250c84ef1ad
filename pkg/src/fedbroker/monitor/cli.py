"""``fedbroker-monitor``: scheduled lifecycle probing from the shell."""

from __future__ import annotations

import argparse
import sys

from .probe import DEFAULT_PERIOD_SECONDS, ProbeConfig, ScheduledRunner, run_probe


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedbroker-monitor")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="probe the experiment lifecycle")
    run.add_argument("--url", required=True, help="gateway base url")
    run.add_argument("--period", type=float, default=DEFAULT_PERIOD_SECONDS,
                     help="seconds between probes (default %(default)s)")
    run.add_argument("--once", action="store_true", help="single probe, then exit")
    run.add_argument("--report", help="append one JSON record per run to this file")
    run.add_argument("--testbed", help="reserve on this testbed (default: any)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = ProbeConfig(testbed=args.testbed, report_file=args.report)
    if args.once:
        try:
            report = run_probe(args.url, config)
        except Exception as exc:
            print(f"probe aborted: {exc}", file=sys.stderr)
            return 2
        if report.transport_failure:
            return 2
        return 0 if report.overall == "pass" else 1
    runner = ScheduledRunner(args.url, args.period, config)
    try:
        runner.run_forever()
    except KeyboardInterrupt:
        runner.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
