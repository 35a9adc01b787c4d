"""Command-line entry point: ``se-sim {volatile,sweep,connectivity,validate}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .actions import ActionSequence, validate_action_sequence
from .connectivity import ConnectivityReport, h_of, h_star
from .harness import ConfigError, ScenarioConfig, run_sweep, run_volatile, sweep_csv

log = logging.getLogger("subset_equalizing")


def _load_config(args) -> ScenarioConfig:
    config = ScenarioConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output = args.out
    return config


def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
        log.info("wrote %s", path)


def cmd_volatile(args) -> int:
    config = _load_config(args)
    if config.kind != "volatile":
        raise ConfigError("config kind must be 'volatile'")
    run = run_volatile(config)
    _write(run.to_csv(), config.output)
    if args.actions_out:
        _write(run.actions_csv(), args.actions_out)
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    if config.kind != "sweep":
        raise ConfigError("config kind must be 'sweep'")
    out = config.output or str(Path(args.config).with_suffix(".csv"))
    rows = run_sweep(config)
    _write(sweep_csv(rows), out)
    capped = [r for r in rows if r.scenarios_converged < config.scenarios]
    for r in capped:
        print(f"error: {r.algorithm} at {config.vary}={r.param_value}: only {r.scenarios_converged}/{config.scenarios} scenarios converged", file=sys.stderr)
    return 1 if capped else 0


def cmd_connectivity(args) -> int:
    seq = ActionSequence.load(args.seq)
    horizon = -1 if args.horizon is None else args.horizon
    if args.window is not None:
        report = h_star(seq, args.window, horizon)
    else:
        report = ConnectivityReport({args.k: h_of(seq, args.k, horizon)})
    print(json.dumps(report.to_json(), indent=2))
    return 0


def cmd_validate(args) -> int:
    if args.seq:
        seq = ActionSequence.load(args.seq)
        problems = validate_action_sequence(seq, args.horizon)
        if problems:
            for p in problems:
                print(f"violation: {p}", file=sys.stderr)
            return 1
        print("ok")
        return 0
    _load_config(args)
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="se-sim", description="Subset Equalizing simulator and analysis tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("--config", required=required, help="scenario config (JSON)")
        p.add_argument("--seed", type=int, help="override the config's base seed")
        p.add_argument("--out", help="output CSV path")

    p = sub.add_parser("volatile", help="SE on a randomly churning agent network")
    with_config(p)
    p.add_argument("--actions-out", help="also write per-agent action classes to this CSV")
    p.set_defaults(func=cmd_volatile)

    p = sub.add_parser("sweep", help="transmission-cost comparison on random geometric graphs")
    with_config(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("connectivity", help="h(k) / h* for an action sequence")
    p.add_argument("--seq", required=True, help="action sequence (JSON)")
    p.add_argument("--k", type=int, default=0, help="origin time")
    p.add_argument("--horizon", type=int, help="search cap H (default: 10*M*K, unbounded if periodic)")
    p.add_argument("--window", type=int, help="report h(k) for k=0..WINDOW and h*")
    p.set_defaults(func=cmd_connectivity)

    p = sub.add_parser("validate", help="check an action sequence or a config")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--seq", help="action sequence (JSON)")
    group.add_argument("--config", help="scenario config (JSON)")
    p.add_argument("--horizon", type=int, help="check steps 1..HORIZON")
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p.add_argument("--out", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
