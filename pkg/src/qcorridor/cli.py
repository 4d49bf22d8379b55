"""Command-line entry point.

Subcommands: run, converge, oracle-compare, verify-weights.  Exit codes:
0 when every asserted property passes, 2 on a property failure, 1 on a
configuration or runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .scenarios import ConfigError, apply_overrides, load_config, run_scenario

FORCED_SCENARIO = {
    "converge": "convergence",
    "oracle-compare": "oracle_compare",
    "verify-weights": "verify_weights",
}


def _add_common(sub):
    sub.add_argument("--config", required=True, help="path to the JSON config")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--backend", default=None, help="override evolution backend")
    sub.add_argument("--seed", type=int, default=None, help="override the seed")
    sub.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path config override (value parsed as JSON)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcorridor",
        description="measurement-damped quantum dynamics scenarios",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("run", "run a physical scenario (corridor, multislit, zeno, aharonov_bohm)"),
        ("converge", "product-formula convergence study"),
        ("oracle-compare", "sliced-kernel oracle comparison"),
        ("verify-weights", "sample weight certifications"),
    ):
        _add_common(subs.add_parser(name, help=doc))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args.override)
        if args.backend:
            cfg.setdefault("evolution", {})["backend"] = args.backend
        if args.seed is not None:
            cfg["seed"] = args.seed
        forced = FORCED_SCENARIO.get(args.command)
        if forced is not None:
            cfg["scenario"] = forced
        elif cfg.get("scenario") not in ("corridor", "multislit", "zeno",
                                         "aharonov_bohm"):
            raise ConfigError(
                f"scenario: 'run' expects a physical scenario, got "
                f"'{cfg.get('scenario')}'"
            )
        result = run_scenario(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name in result.failures:
        print(f"FAIL {name}", file=sys.stderr)
    if not result.ok:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
