"""Command-line interface.

Commands:
    simulate --config <preset|path> --out <dir> [--no-figures]
    check    --config <preset|path> [--dimension N]
    scenario list
    scenario show <name>

Exit codes: 0 success, 2 check failure, 3 blow-up detected, 4 configuration
error, 5 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .outputs import run_certificate_checks, write_outputs
from .runner import STATUS_BLOWUP, STATUS_COMPLETED, run
from .scenarios import ConfigError, PRESETS, load_scenario, preset_names

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4
EXIT_RUNTIME = 5


def _cmd_simulate(args) -> int:
    config = load_scenario(args.config)
    outcome = run(config)
    written = write_outputs(
        outcome, config, out_dir=args.out, figures=not args.no_figures
    )
    for path in written:
        print(path)
    print(f"status: {outcome.status}")
    if outcome.status == STATUS_COMPLETED:
        return EXIT_OK
    if outcome.status == STATUS_BLOWUP:
        print(f"first exceedance at t = {outcome.first_exceedance_time}")
        return EXIT_BLOWUP
    print(f"failure: {outcome.failure_detail}", file=sys.stderr)
    return EXIT_RUNTIME


def _cmd_check(args) -> int:
    config = load_scenario(args.config)
    reports = run_certificate_checks(config, dimension=args.dimension)
    print(json.dumps(reports, indent=2))
    expected = set(config.expected_check_failures)
    unexpected = [
        r["check"] for r in reports if not r["passed"] and r["check"] not in expected
    ]
    return EXIT_CHECK_FAILED if unexpected else EXIT_OK


def _cmd_scenario(args) -> int:
    if args.action == "list":
        for name in preset_names():
            config = load_scenario(name)
            print(f"{name}: {config.description}")
        return EXIT_OK
    config = load_scenario(args.name)
    print(json.dumps(config.to_dict(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bulksurf",
        description="Bulk-surface reaction-diffusion solver on the disk",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario and write outputs")
    p_sim.add_argument("--config", required=True, help="preset name or scenario file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument(
        "--no-figures", action="store_true", help="skip rendering PNG figures"
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_check = sub.add_parser(
        "check", help="run structural certificate checks, print JSON reports"
    )
    p_check.add_argument("--config", required=True, help="preset name or scenario file")
    p_check.add_argument(
        "--dimension",
        type=int,
        default=2,
        help="space dimension for the growth thresholds (default 2)",
    )
    p_check.set_defaults(func=_cmd_check)

    p_scen = sub.add_parser("scenario", help="inspect built-in scenario presets")
    scen_sub = p_scen.add_subparsers(dest="action", required=True)
    p_list = scen_sub.add_parser("list", help="list presets")
    p_list.set_defaults(func=_cmd_scenario, action="list")
    p_show = scen_sub.add_parser("show", help="print a preset's resolved config")
    p_show.add_argument("name", choices=sorted(PRESETS))
    p_show.set_defaults(func=_cmd_scenario, action="show")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # keep the exit-code contract for scripting
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
