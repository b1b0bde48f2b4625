"""Command line entry point: ``revealbandit run | dstar | gen``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigurationError, ParseError, UsageError
from .graph_model import generate, parse_graph_spec, save_matrix
from .harness import (
    PRESETS,
    build_config,
    dstar_rows,
    emit_csv,
    format_dstar_csv,
    read_config_file,
    run_experiment,
    write_dstar_csv,
)

log = logging.getLogger("revealbandit")


def _parse_grid(text: str) -> list[int]:
    try:
        grid = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"bad --n-grid {text!r}") from None
    if not grid or any(v < 1 for v in grid):
        raise ConfigurationError("--n-grid needs positive integers")
    return grid


def cmd_run(args) -> int:
    if args.config is None and args.preset is None:
        raise ConfigurationError("run needs --config and/or --preset")
    values = dict(PRESETS[args.preset]) if args.preset else {}
    if args.config:
        values.update(read_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        values[key] = value
    if args.seed is not None:
        values["seed"] = str(args.seed)
    config = build_config(values)
    out_dir = args.out or config.out
    runs = config.expand()
    # resolve every dataset before the first trial starts
    for _, cfg in runs:
        cfg.validate()
    for suffix, cfg in runs:
        target = os.path.join(out_dir, suffix) if suffix else out_dir
        os.makedirs(target, exist_ok=True)
        table = run_experiment(cfg, workers=args.workers)
        for path in emit_csv(table, os.path.join(target, "regret.csv")):
            log.info("wrote %s", path)
        for label, agg in table.results.items():
            extra = ""
            if agg.mean_D_star is not None:
                extra = f"  T_star={agg.mean_T_star:.1f}  D_star={agg.mean_D_star:.1f}"
            print(f"{cfg.name}  {label}: regret(n)={agg.mean_regret[-1]:.1f}{extra}")
        print(f"{cfg.name}: wall-clock {table.wall_clock:.1f}s")
    return 0


def cmd_dstar(args) -> int:
    spec = parse_graph_spec(args.graph)
    matrix = generate(spec, seed=args.seed)
    rows = dstar_rows(matrix, _parse_grid(args.n_grid))
    if args.out:
        write_dstar_csv(rows, args.out)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(format_dstar_csv(rows))
    return 0


def cmd_gen(args) -> int:
    matrix = generate(parse_graph_spec(args.graph), seed=args.seed)
    save_matrix(matrix, args.out)
    log.info("wrote %s (d=%d, %d entries)", args.out, matrix.d, matrix.nnz)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revealbandit", description="Revealing graph bandit experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write regret CSVs")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    run.set_defaults(func=cmd_run)

    dstar = sub.add_parser("dstar", help="detectable dimension as a function of n")
    dstar.add_argument("--graph", required=True, help="graph spec (e.g. star:d=100,p=1) or edge-list path")
    dstar.add_argument("--n-grid", required=True, help="comma-separated ascending horizons")
    dstar.add_argument("--seed", type=int, default=0)
    dstar.add_argument("--out")
    dstar.set_defaults(func=cmd_dstar)

    gen = sub.add_parser("gen", help="write a generated influence matrix")
    gen.add_argument("--graph", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigurationError, ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
