"""Command-line entry point: ``fairshift synth|tabular --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiment import ConfigError, load_config, run_experiment, write_outputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairshift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("synth", "synthetic SCM experiment"), ("tabular", "CSV perturbation experiment")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides config 'output')")
        p.add_argument("--replicates", type=int, help="number of replicates (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(kind: str, message: str, code: int = 2) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    mode = {"synth": "synthetic", "tabular": "tabular"}[args.command]
    try:
        cfg = load_config(args.config, replicates=args.replicates, master_seed=args.seed, output=args.out)
        if cfg.mode != mode:
            raise ConfigError(f"config mode is {cfg.mode!r} but subcommand expects {mode!r}")
        if not cfg.output:
            raise ConfigError("no output directory: pass --out or set 'output'")
    except (OSError, ConfigError, ValueError) as exc:
        return _fail("config", str(exc))
    summary, records = run_experiment(cfg)
    write_outputs(summary, records, cfg.output, cfg)
    print(f"{summary.n_ok} replicates ok, {summary.n_failed} failed -> {cfg.output}")
    for variant, stats in summary.stats.items():
        parts = [f"{m}={stats[m]['median']:.4f}" for m in ("accuracy", "deo", "auprc", "auroc") if m in stats]
        print(f"  {variant:36s} " + " ".join(parts))
    return 0


if __name__ == "__main__":
    sys.exit(main())
