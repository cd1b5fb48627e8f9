"""Command-line front end.

    innoshare simulate --config cfg.json [--out DIR] [--threads N] [--seed K]
    innoshare sweep-b  --config cfg.json ...
    innoshare tradeoff --config cfg.json ...
    innoshare theorem1 --config cfg.json ...
    innoshare protect  --config cfg.json ...

Any other --dotted.key VALUE pair overrides that key in the config, e.g.
--algorithm.step_size 0.02 or --adversary.miss_weights "[0,0.5,1]".
--seed K re-seeds the whole pipeline (problem K, graph K+1, x0 K+2,
adversary K+3).
"""

import argparse
import json
import sys

from .experiments import (apply_overrides, cmd_protect, cmd_simulate,
                          cmd_sweep_b, cmd_theorem1, cmd_tradeoff,
                          config_from_dict)

_COMMANDS = ("simulate", "sweep-b", "tradeoff", "theorem1", "protect")


def _parse_overrides(extras):
    if len(extras) % 2 != 0:
        raise SystemExit(f"dangling override flag: {extras[-1]!r}")
    overrides = {}
    for flag, value in zip(extras[::2], extras[1::2]):
        if not flag.startswith("--") or "." not in flag:
            raise SystemExit(f"unknown argument {flag!r}; overrides look like "
                             "--block.key VALUE")
        overrides[flag[2:]] = value
    return overrides


def build_parser():
    parser = argparse.ArgumentParser(
        prog="innoshare",
        description="Eavesdropping-protection experiments for innovation-sharing "
                    "consensus optimization")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=1, help="sweep worker threads")
        p.add_argument("--seed", type=int, default=None,
                       help="override every seed in the config")
    return parser


def main(argv=None):
    args, extras = build_parser().parse_known_args(argv)
    overrides = _parse_overrides(extras)
    with open(args.config) as fh:
        data = json.load(fh)
    if args.seed is not None:
        overrides.update({"problem.seed": args.seed, "graph.seed": args.seed + 1,
                          "algorithm.init.seed": args.seed + 2,
                          "adversary.seed": args.seed + 3})
    apply_overrides(data, overrides)
    cfg = config_from_dict(data)

    if args.command == "simulate":
        _, summary = cmd_simulate(cfg, args.out)
        print(json.dumps(summary, indent=2, sort_keys=True))
    elif args.command == "sweep-b":
        table = cmd_sweep_b(cfg, args.out, threads=args.threads)
        print(f"wrote {len(table.rows)} rows")
    elif args.command == "tradeoff":
        table = cmd_tradeoff(cfg, args.out, threads=args.threads)
        print(f"wrote {len(table.rows)} rows")
    elif args.command == "theorem1":
        _, summary = cmd_theorem1(cfg, args.out)
        print(json.dumps(summary, indent=2, sort_keys=True))
    elif args.command == "protect":
        report = cmd_protect(cfg, args.out)
        print(f"network protection {report.network_min!r} at node "
              f"{report.network_argmin} (gamma={report.intercept_prob}, "
              f"b={report.miss_weight})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
