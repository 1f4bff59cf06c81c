"""Command line: ``crnoma run | list-scenarios | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import checks
from .harness import (
    OUT_DIR_ENV,
    POLICIES,
    builtin_scenarios,
    default_out_dir,
    get_scenario,
    run_experiment,
    summarize,
    with_config,
)
from .netmodel import config_from_mapping


def _load_config(path, base):
    with open(path) as fh:
        values = json.load(fh)
    return config_from_mapping(values, base)


def cmd_run(args) -> int:
    scenario = get_scenario(args.scenario)
    if args.config:
        scenario = with_config(scenario, _load_config(args.config, scenario.config))
    out = args.out if args.out is not None else default_out_dir()
    policies = POLICIES if args.policy == "all" else (args.policy,)
    runs = {}
    for seed in args.seed:
        for policy in policies:
            records = run_experiment(
                scenario, policy, seed, args.episodes, out_dir=out,
                callback=(lambda r: logging.info("episode %d mean %.4f", r.episode, r.mean_reward)),
            )
            runs[f"{policy}/s{seed}"] = records
    print(summarize(runs, args.window).table())
    print(f"CSV written to {out}")
    return 0


def cmd_list(args) -> int:
    for sc in builtin_scenarios():
        c = sc.config
        print(f"{sc.name:<18} M={c.num_primary:<3} fading={sc.fading_mode:<24} episodes={sc.num_episodes}")
    return 0


def cmd_verify(args) -> int:
    results = checks.run_all()
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnoma", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write per-episode CSV")
    run.add_argument("--scenario", required=True, choices=[s.name for s in builtin_scenarios()])
    run.add_argument("--policy", default="ddpg", choices=[*POLICIES, "all"])
    run.add_argument("--episodes", type=int, default=None)
    run.add_argument("--seed", type=int, nargs="+", default=[0])
    run.add_argument("--out", default=None, help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
    run.add_argument("--config", default=None, help="JSON file overriding NetworkConfig fields")
    run.add_argument("--window", type=int, default=20, help="trailing window for the summary")
    run.set_defaults(func=cmd_run)

    ls = sub.add_parser("list-scenarios", help="show the built-in scenarios")
    ls.set_defaults(func=cmd_list)

    verify = sub.add_parser("verify", help="run solver, gradient and invariant self-checks")
    verify.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
