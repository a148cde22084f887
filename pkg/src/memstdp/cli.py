"""``memstdp`` command line: one verb per experiment kind."""
from __future__ import annotations

import argparse
import json
import sys
import time

from . import config as config_mod
from .experiments import run


def build_parser():
    ap = argparse.ArgumentParser(prog="memstdp",
                                 description="Memristive STDP synapse experiments.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for kind in config_mod.KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="YAML config file (its kind must match the verb)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (overrides the config)")
    show = sub.add_parser("show-config", help="print the default config of a kind")
    show.add_argument("kind", choices=config_mod.KINDS)
    return ap


def resolve_config(args):
    if args.config:
        cfg = config_mod.load(args.config)
        if cfg.kind != args.verb:
            raise config_mod.ConfigError(
                f"config kind {cfg.kind!r} does not match the command {args.verb!r}")
    else:
        cfg = config_mod.default_config(args.verb, out=f"results/{args.verb}")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verb == "show-config":
        sys.stdout.write(config_mod.dumps(config_mod.default_config(args.kind)))
        return 0
    try:
        cfg = resolve_config(args)
        t0 = time.perf_counter()
        summary = run(cfg)
    except (config_mod.ConfigError, FileNotFoundError) as exc:
        print(f"memstdp: error: {exc}", file=sys.stderr)
        return 2
    summary = dict(summary, out=cfg.out, runtime_s=round(time.perf_counter() - t0, 3))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
