"""``qcnnlab`` command line: run an experiment config and write CSV + JSON.

Every subcommand other than ``validate`` and ``circuit`` runs one experiment
kind.  Without ``--config`` the shipped default config for that subcommand is
used.  Outputs go to ``<out>/<name>.csv`` (plus ``<name>.<table>.csv`` for
secondary tables) and ``<out>/<name>.meta.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import ANSATZE, make_model
from .config import COMMANDS, ConfigError, default_config, default_config_text, load, validate
from .experiments import SIGN_CONVENTIONS, RunResult, run_experiment
from .hamiltonian import EigensolverError
from .trainer import TrainingError

log = logging.getLogger("qcnnlab")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def config_comment(cfg: dict) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def write_table(path: Path, table, cfg: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# qcnnlab {__version__}\n")
        fh.write(config_comment(cfg) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_value(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_outputs(out_dir: Path, cfg: dict, result: RunResult, wall_time: float) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    name = cfg["name"]
    written = []
    for key, table in result.tables.items():
        path = out_dir / (f"{name}.csv" if key == "" else f"{name}.{key}.csv")
        write_table(path, table, cfg)
        written.append(path)
    meta = {
        "artifact": "qcnnlab",
        "version": __version__,
        "experiment": cfg["experiment"],
        "config": cfg,
        "outputs": [p.name for p in written],
        "sign_conventions": SIGN_CONVENTIONS,
        "summary": result.summary,
        **result.metadata,
        "wall_time_s": round(wall_time, 3),
    }
    meta_path = out_dir / f"{name}.meta.json"
    meta_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return written + [meta_path]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcnnlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qcnnlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command, help=f"run the {COMMANDS[command]} experiment")
        p.add_argument("--config", type=Path, help="YAML config (default: the shipped config)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("--config", type=Path, required=True)
    p = sub.add_parser("show-config", help="print a shipped default config")
    p.add_argument("which", choices=list(COMMANDS))
    p = sub.add_parser("circuit", help="print the gate listing of an ansatz")
    p.add_argument("ansatz", choices=ANSATZE)
    return parser


def _report(problems: list[str], source) -> None:
    print(f"{source}: {len(problems)} problem(s)", file=sys.stderr)
    for msg in problems:
        print(f"  {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        try:
            cfg = load(args.config)
        except ConfigError as exc:
            _report(exc.problems, args.config)
            return 2
        print(f"{args.config}: ok ({cfg['experiment']})")
        return 0
    if args.command == "show-config":
        print(default_config_text(args.which), end="")
        return 0
    if args.command == "circuit":
        print(make_model(args.ansatz).circuit.listing())
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    source = args.config or f"<default {args.command}>"
    try:
        cfg = load(args.config, args.command) if args.config else default_config(args.command)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(["--seed: must be non-negative"])
            cfg = validate({**cfg, "seed": args.seed}, command=args.command)
    except ConfigError as exc:
        _report(exc.problems, source)
        return 2
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return 2

    log.info("running %s (seed %d)", cfg["experiment"], cfg["seed"])
    start = time.perf_counter()
    try:
        result = run_experiment(cfg, args.threads)
    except (TrainingError, EigensolverError) as exc:
        print(f"{cfg['experiment']} failed: {exc}", file=sys.stderr)
        return 3
    for path in write_outputs(args.out, cfg, result, time.perf_counter() - start):
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
