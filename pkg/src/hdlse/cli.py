"""Command line entry point ``lse``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import yaml

from .benchmarks import BenchmarkSpec, build_pool, write_csv_pool
from .domain import InvalidInputError
from .runner import (
    ConfigError,
    ExperimentConfig,
    emit_plot,
    read_trace,
    run_experiment,
    write_chosen,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("hdlse")


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    """Read a flat ``key: value`` YAML file into an :class:`ExperimentConfig`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a flat key/value mapping")
    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: nested sections are not allowed ({', '.join(nested)})")
    if seed is not None:
        raw["seed"] = seed
    return ExperimentConfig.from_mapping(raw)


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = run_experiment(cfg)
    write_trace(traces, out / "traces.csv")
    write_chosen(traces, out / "chosen.csv")
    with (out / "config.yaml").open("w") as fh:
        yaml.safe_dump(
            {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(cfg).items()},
            fh,
            sort_keys=True,
        )
    for tr in traces:
        last = tr.records[-1]
        print(
            f"{tr.method} rep={tr.repetition} n_sampled={last.n_sampled} "
            f"f1_super={last.f1_super:.4f} f1_sub={last.f1_sub:.4f}"
        )
    print(f"wrote {out / 'traces.csv'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    traces = []
    for p in args.traces:
        traces.extend(read_trace(p))
    emit_plot(traces, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_pool(args) -> int:
    try:
        spec = BenchmarkSpec(args.benchmark, args.dim, args.size, 0.0, args.seed)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    write_csv_pool(build_pool(spec), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="lse-out")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="plot F1 traces with standard-error bands")
    p.add_argument("--traces", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("pool", help="write a benchmark pool as CSV")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--size", type=int, default=None, help="default 10000 * dim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pool)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
