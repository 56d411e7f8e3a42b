"""Command-line entry point.

    qlimits <experiment> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]
    qlimits verify <dir>

Seed precedence: --seed flag, then the QLIMITS_SEED environment variable,
then the config file; the source is logged in the run manifest.  Exit
status: 0 success / verified ok, 1 input or verification problem, 2 a
checked invariant or bound failed during the run.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .config import KINDS, ConfigError, load_config
from .manifest import verify_manifest
from .runner import EXIT_INPUT_ERROR, run_experiment


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors (exit 1)
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="qlimits", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="TOML or JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    v = sub.add_parser("verify", help="verify a run directory against its manifest")
    v.add_argument("directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "verify":
        verdict = verify_manifest(args.directory)
        print(f"{args.directory}: {verdict.status}")
        if verdict.detail:
            print(f"  {verdict.detail}")
        for name in verdict.missing:
            print(f"  missing: {name}")
        for name in verdict.mismatched:
            print(f"  mismatched: {name}")
        return 0 if verdict.status == "ok" else EXIT_INPUT_ERROR

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if config.kind != args.command:
        print(
            f"config error: kind: config declares {config.kind!r} "
            f"but the {args.command!r} command was invoked",
            file=sys.stderr,
        )
        return EXIT_INPUT_ERROR

    seed_source = "config"
    if os.environ.get("QLIMITS_SEED"):
        try:
            config = config.with_seed(int(os.environ["QLIMITS_SEED"]))
        except ValueError:
            print("config error: QLIMITS_SEED must be an integer", file=sys.stderr)
            return EXIT_INPUT_ERROR
        seed_source = "env"
    if args.seed is not None:
        config = config.with_seed(args.seed)
        seed_source = "cli"

    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT_ERROR

    return run_experiment(config, out_dir=args.out, threads=args.threads,
                          seed_source=seed_source)


if __name__ == "__main__":
    raise SystemExit(main())
