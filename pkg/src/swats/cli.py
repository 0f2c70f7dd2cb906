"""Command-line entry point: ``swats run|plan-a|sweep|validate``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    SEED_ENV,
    Config,
    build_scenario,
    config_violations,
    load_config,
    run_experiment,
    sweep,
    sweep_table,
    write_results,
)
from .model import dumps_scenario
from .scheduler import PlanAResult, plan_a
from .stochastic import RngStream
from .validation import ScenarioError, check_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _csv_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_common(p):
    p.add_argument("config", nargs="?", help="config file (.json or .toml); defaults apply when omitted")
    p.add_argument("--seed", type=int, help=f"master seed (also read from ${SEED_ENV})")
    p.add_argument("--n-events", type=int)
    p.add_argument("--topology", choices=["star", "ring", "tadpole"])
    p.add_argument("--n-subtasks", type=int)
    p.add_argument("--n-vehicles", type=int)
    p.add_argument("--connectivity-p", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--n-mc-samples", type=int)
    p.add_argument("--policies", type=_csv_list, help="comma-separated policy names")
    p.add_argument("--out-dir", dest="output_dir")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--timed", dest="timed", action="store_true", default=None,
                      help="sequential execution for trustworthy decision times (default)")
    mode.add_argument("--untimed", dest="timed", action="store_false",
                      help="allow parallel event evaluation with --jobs")
    p.add_argument("--jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swats", description="Stage-wise graph task scheduling simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="run the full experiment")
    _add_common(p)
    p.add_argument("--alpha", type=Path, help="reuse a Plan A result written by plan-a")

    p = sub.add_parser("plan-a", help="compute alpha and write it as JSON")
    _add_common(p)
    p.add_argument("--out", type=Path, help="output path (default: <out-dir>/plan_a.json)")

    p = sub.add_parser("sweep", help="one summary per vehicle count or topology")
    _add_common(p)
    p.add_argument("--vehicles", type=lambda t: [int(x) for x in _csv_list(t)])
    p.add_argument("--topologies", type=_csv_list)

    p = sub.add_parser("validate", help="check a config without running anything")
    _add_common(p)
    return parser


_OVERRIDES = (
    "n_events", "topology", "n_subtasks", "n_vehicles", "connectivity_p", "eps1", "eps2",
    "n_mc_samples", "policies", "output_dir", "timed", "jobs",
)


def resolve_config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ScenarioError([f"${SEED_ENV} must be an integer"]) from None
    if seed is not None:
        changes["master_seed"] = seed
    return replace(cfg, **changes)


def _print_summary(summary, out=sys.stdout):
    width = max(len(p) for p in summary.policies)
    print(f"{'policy':<{width}}  {'AVCF':>10}  {'ART (s)':>12}  {'completed':>9}", file=out)
    for p in summary.policies:
        m = summary.metrics[p]
        avcf = f"{m.avcf:.5f}" if m.avcf is not None else "-"
        print(f"{p:<{width}}  {avcf:>10}  {m.art:>12.6f}  {m.completion_rate:>9.2f}", file=out)
    if summary.alpha_usage_rate is not None:
        print(f"alpha usage rate: {summary.alpha_usage_rate:.2f}", file=out)


def _cmd_validate(cfg: Config, args) -> int:
    problems = config_violations(cfg)
    if not problems:
        problems = _scenario_problems(cfg)
    if problems:
        for msg in problems:
            print(f"invalid: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    print("config OK")
    return EXIT_OK


def _scenario_problems(cfg):
    try:
        check_scenario(build_scenario(cfg))
    except ScenarioError as exc:
        return exc.violations
    return []


def _cmd_plan_a(cfg: Config, args) -> int:
    problems = config_violations(cfg)
    if problems:
        raise ScenarioError(problems)
    s = check_scenario(build_scenario(cfg))
    result = plan_a(s, cfg.n_mc_samples, RngStream(cfg.master_seed, "plan_a_mc"))
    out = args.out or Path(cfg.output_dir) / "plan_a.json"
    doc = {"plan_a": result.to_dict(), "master_seed": cfg.master_seed, "scenario": json.loads(dumps_scenario(s))}
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc}") from exc
    alpha = list(result.alpha.assign) if result.alpha else None
    print(f"alpha = {alpha}  E[F] = {result.expected_f:.5f}  candidates = {result.candidates_considered}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_run(cfg: Config, args) -> int:
    plan = None
    if args.alpha is not None:
        try:
            plan = PlanAResult.from_dict(json.loads(args.alpha.read_text())["plan_a"])
        except (OSError, KeyError, ValueError) as exc:
            raise ScenarioError([f"cannot read Plan A result {args.alpha}: {exc}"]) from None
    summary = run_experiment(cfg, plan)
    out = Path(cfg.output_dir)
    csv_path, json_path = write_results(summary, out / "events.csv", out / "summary.json")
    _print_summary(summary)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def _cmd_sweep(cfg: Config, args) -> int:
    if args.vehicles and args.topologies:
        raise ScenarioError(["sweep takes either --vehicles or --topologies, not both"])
    if args.topologies:
        param, values = "topology", args.topologies
    else:
        param, values = "n_vehicles", args.vehicles or [6, 9, 12]
    problems = []
    for v in values:
        problems += config_violations(replace(cfg, **{param: v}))
    if problems:
        raise ScenarioError(sorted(set(problems)))
    points = sweep(cfg, param, values)
    out = Path(cfg.output_dir)
    for value, summary in points:
        d = out / f"sweep-{param}-{value}"
        write_results(summary, d / "events.csv", d / "summary.json")
        print(f"== {param} = {value}")
        _print_summary(summary)
    table = out / "sweep.json"
    try:
        table.write_text(json.dumps(sweep_table(param, points), indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {table}: {exc}") from exc
    print(f"wrote {table}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "plan-a": _cmd_plan_a, "sweep": _cmd_sweep, "validate": _cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ScenarioError as exc:
        return _report_config(exc.violations)
    except (OSError, ValueError, TypeError) as exc:
        return _report_config([str(exc)])
    try:
        return COMMANDS[args.command](cfg, args)
    except ScenarioError as exc:
        return _report_config(exc.violations)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _report_config(messages) -> int:
    for msg in messages:
        print(f"config error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
