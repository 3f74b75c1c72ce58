"""Command-line entry point.

Subcommands::

    dsdlab run <scenario.json | preset-name> [--out PATH] [--seed N]
               [--workers N] [--full-scale]
    dsdlab presets list
    dsdlab validate <scenario.json>

Exit codes: 0 success, 2 scenario validation/parse error, 3 runtime numeric
error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import DsdlabError, ScenarioParseError, ScenarioValidationError
from .harness import emit_csv, run, scale_to_full
from .scenario import load_scenario, preset_names, preset_path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its CSV")
    p_run.add_argument("scenario", help="scenario JSON path or shipped preset name")
    p_run.add_argument("--out", help="output CSV path (default: <name>_results.csv)")
    p_run.add_argument("--seed", type=int, help="override the scenario's master seed")
    p_run.add_argument("--workers", type=int, default=1, help="worker processes")
    p_run.add_argument(
        "--full-scale",
        action="store_true",
        help="restore the published Monte Carlo scale (10x realizations, 5x vectors)",
    )

    p_presets = sub.add_parser("presets", help="preset management")
    presets_sub = p_presets.add_subparsers(dest="presets_command", required=True)
    presets_sub.add_parser("list", help="list shipped scenario presets")

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("scenario", help="scenario JSON path")
    return parser


def _resolve_scenario(arg: str):
    path = Path(arg)
    if path.is_file():
        return load_scenario(path)
    if path.suffix == "" and "/" not in arg:
        return load_scenario(preset_path(arg))
    raise ScenarioParseError(f"scenario file not found: {arg}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "presets":
        for name in preset_names():
            print(f"{name}\t{preset_path(name)}")
        return 0

    if args.command == "validate":
        try:
            scenario = load_scenario(args.scenario)
        except (ScenarioParseError, ScenarioValidationError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 2
        print(
            f"ok: {scenario.name} ({scenario.metric} sweep, "
            f"{len(scenario.points)} points, {len(scenario.detectors)} detectors)"
        )
        return 0

    try:
        scenario = _resolve_scenario(args.scenario)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.full_scale:
        scenario = scale_to_full(scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)

    try:
        result = run(scenario, workers=max(1, args.workers))
    except (DsdlabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3

    out = args.out or f"{scenario.name}_results.csv"
    emit_csv(result, out)
    print(f"wrote {len(result.rows)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
