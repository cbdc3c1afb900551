"""Command-line front end.

``run`` executes a scenario (built-in name or file path) and writes
metrics.csv, events.csv, chain.log and summary.txt to the output directory;
``report`` renders the figures for an existing output directory.

Exit codes: 0 clean run, 2 when security events fired (detection of injected
faults counts as success, the code just flags that events are present),
1 on bad input or I/O problems.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .control_plane import VerifyMode
from .engine import run_scenario
from .ledger import LedgerError
from .provisioning import ProvisioningError
from .scenario import BUILTIN_SCENARIOS, ScenarioError, builtin_text, parse_scenario
from .topology import TopologyError


def _load_text(ref: str) -> str:
    if ref in BUILTIN_SCENARIOS:
        return builtin_text(ref)
    path = Path(ref)
    if not path.exists():
        raise ScenarioError(f"scenario {ref!r} is neither a built-in name nor a file")
    return path.read_text(encoding="utf-8")


def _cmd_run(args: argparse.Namespace) -> int:
    scn = parse_scenario(_load_text(args.scenario))
    verify_mode = VerifyMode(args.verify_mode) if args.verify_mode else None
    sim, result = run_scenario(scn, args.out, ticks=args.ticks,
                               verify_mode=verify_mode,
                               verify_delay=args.verify_delay)
    print(f"ran {result.ticks_run} ticks: "
          f"{result.verifications_pass} verifications passed, "
          f"{result.verifications_fail} failed, "
          f"{result.security_events} security events, "
          f"chain valid: {str(result.chain_valid).lower()}")
    print(f"artifacts in {Path(args.out).resolve()}")
    if args.plot:
        from .report import render_report

        for path in render_report(args.out):
            print(f"rendered {path}")
    return 2 if result.security_events else 0


def _cmd_report(args: argparse.Namespace) -> int:
    from .report import render_report

    for path in render_report(args.out):
        print(f"rendered {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainsdn",
        description="Ledger-backed multi-domain SDN simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write its artifacts")
    run_p.add_argument("--scenario", required=True,
                       help="built-in name (case_a, case_b) or scenario file path")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--ticks", type=int, default=None,
                       help="override the scenario's run length")
    run_p.add_argument("--verify-mode", choices=["immediate", "deferred"],
                       default=None, help="override the verification mode")
    run_p.add_argument("--verify-delay", type=int, default=None,
                       help="verification delay in ticks")
    run_p.add_argument("--plot", action="store_true",
                       help="also render bandwidth.png and loss.png")
    run_p.set_defaults(func=_cmd_run)

    report_p = sub.add_parser("report",
                              help="render figures for an existing run directory")
    report_p.add_argument("--out", required=True,
                          help="directory containing metrics.csv")
    report_p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, TopologyError, LedgerError, ProvisioningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
