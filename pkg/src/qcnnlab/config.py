"""Experiment configuration files.

Configs are YAML mappings checked against a strict schema: unknown keys,
wrong types and out-of-range values are all reported together, each with the
line it came from.  Validation fills in defaults, so the normalised dict is a
complete description of the run.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import yaml

EXPERIMENTS = ("basis-dump", "fixed-qcnn-scan", "train-classify", "eta-sweep",
               "shots-sweep", "train-noisy", "regress")
# CLI subcommand -> experiment name
COMMANDS = {"basis-dump": "basis-dump", "fixed-scan": "fixed-qcnn-scan",
            "train": "train-classify", "eta-sweep": "eta-sweep",
            "shots-sweep": "shots-sweep", "train-noisy": "train-noisy",
            "regress": "regress"}

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Field:
    kind: Any  # int, float, str, bool, ("list", item kind) or a nested schema dict
    default: Any = REQUIRED
    check: Callable[[Any], str | None] | None = None


def positive(v):
    return None if v > 0 else "must be positive"


def non_negative(v):
    return None if v >= 0 else "must be non-negative"


def at_least(lo):
    return lambda v: None if v >= lo else f"must be at least {lo}"


def between(lo, hi):
    return lambda v: None if lo <= v <= hi else f"must lie in [{lo}, {hi}]"


def one_of(*choices):
    return lambda v: None if v in choices else f"must be one of {', '.join(map(str, choices))}"


def each(check):
    def run(values):
        for i, v in enumerate(values):
            msg = check(v)
            if msg:
                return f"item {i} {msg}"
        return None
    return run


def non_empty(values):
    return None if len(values) else "must not be empty"


def _all(*checks):
    def run(v):
        for c in checks:
            msg = c(v)
            if msg:
                return msg
        return None
    return run


EMBEDDING = {
    "kind": Field(str, "ground_state", one_of("ground_state", "fourier")),
    "n_qubits": Field(int, 9, between(2, 12)),
    "epsilon": Field(float, 0.01, non_negative),
    "eta": Field(float, 2.0, positive),
}
GRID = {
    "start": Field(float, 0.0, between(0.0, 1.0)),
    "stop": Field(float, 1.0, between(0.0, 1.0)),
    "points": Field(int, 101, at_least(2)),
}
DATA = {
    "n_train": Field(int, 4, at_least(1)),
    "n_test": Field(int, 100, at_least(1)),
    "test_std": Field(float, 0.15, positive),
    "epsilon": Field(float, 0.01, non_negative),
}
TRAIN = {
    "learning_rate": Field(float, 0.05, positive),
    "epochs": Field(int, 200, at_least(1)),
    "gradient_step": Field(float, 1e-3, positive),
    "adam_beta1": Field(float, 0.9, between(0.0, 1.0)),
    "adam_beta2": Field(float, 0.999, between(0.0, 1.0)),
    "adam_eps": Field(float, 1e-8, positive),
}
TRAINABLE = one_of("guided", "arbitrary")


def _common(name: str) -> dict:
    return {"experiment": Field(str, REQUIRED, one_of(*EXPERIMENTS)),
            "name": Field(str, name),
            "seed": Field(int, 0, non_negative)}


SCHEMAS: dict[str, dict] = {
    "basis-dump": {
        **_common("basis_dump"),
        "embedding": Field({**EMBEDDING, "n_qubits": Field(int, 3, between(2, 12))}, {}),
        "grid": Field(GRID, {}),
        "antidiagonal": Field(bool, True),
    },
    "fixed-qcnn-scan": {
        **_common("fixed_scan"),
        "epsilon": Field(float, 0.01, non_negative),
        "grid": Field(GRID, {}),
    },
    "train-classify": {
        **_common("train_classify"),
        "ansatz": Field(str, "guided", TRAINABLE),
        "embedding": Field(EMBEDDING, {}),
        "repeats": Field(int, 5, at_least(1)),
        "data": Field(DATA, {}),
        "train": Field(TRAIN, {}),
        "grid": Field(GRID, {}),
    },
    "eta-sweep": {
        **_common("eta_sweep"),
        "ansatz": Field(str, "guided", TRAINABLE),
        "etas": Field(("list", float), REQUIRED, _all(non_empty, each(positive))),
        "n_qubits": Field(int, 9, one_of(9)),
        "repeats": Field(int, 5, at_least(1)),
        "data": Field(DATA, {}),
        "train": Field(TRAIN, {}),
    },
    "shots-sweep": {
        **_common("shots_sweep"),
        "ansatz": Field(str, "guided", TRAINABLE),
        "embeddings": Field(("list", EMBEDDING), REQUIRED, non_empty),
        "shot_grid": Field(("list", int), REQUIRED, _all(non_empty, each(at_least(1)))),
        "trials": Field(int, 10, at_least(1)),
        "data": Field(DATA, {}),
        "train": Field(TRAIN, {}),
        "grid": Field(GRID, {}),
    },
    "train-noisy": {
        **_common("train_noisy"),
        "ansatz": Field(str, "guided", TRAINABLE),
        "embeddings": Field(("list", EMBEDDING), REQUIRED, non_empty),
        "shots": Field(int, 200, at_least(1)),
        "repeats": Field(int, 10, at_least(1)),
        "data": Field(DATA, {}),
        "train": Field(TRAIN, {}),
    },
    "regress": {
        **_common("regress"),
        "ansatz": Field(str, "guided", TRAINABLE),
        "targets": Field(("list", str), ["burgers", "oscillator"],
                         _all(non_empty, each(one_of("burgers", "oscillator")))),
        "nu": Field(float, 0.05, positive),
        "zeta": Field(float, 0.05, lambda v: None if 0 < v < 1 else "must lie in (0, 1)"),
        "embeddings": Field(("list", EMBEDDING), REQUIRED, non_empty),
        "repeats": Field(int, 1, at_least(1)),
        "error_bound": Field(float, 0.05, positive),
        "train": Field({**TRAIN, "epochs": Field(int, 500, at_least(1))}, {}),
    },
}


# --- parsing -------------------------------------------------------------------

def _line_map(node, path=(), lines=None) -> dict[tuple, int]:
    """1-based source line of every key and list item, keyed by its path."""
    lines = {} if lines is None else lines
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            p = path + (key.value,)
            lines[p] = key.start_mark.line + 1
            _line_map(value, p, lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            lines[path + (i,)] = item.start_mark.line + 1
            _line_map(item, path + (i,), lines)
    return lines


def parse(text: str, source: str = "<config>") -> tuple[Any, dict[tuple, int]]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark else source
        raise ConfigError([f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}"]) from exc
    return data, ({} if node is None else _line_map(node))


def _where(lines, path) -> str:
    p = tuple(path)
    while p and p not in lines:
        p = p[:-1]
    dotted = ".".join(str(k) for k in path) or "<root>"
    return f"line {lines[p]}: {dotted}" if p in lines else dotted


def _coerce(kind, value):
    """Return (value, error message)."""
    if kind is bool:
        return (value, None) if isinstance(value, bool) else (None, "must be true or false")
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
        return (value, None) if ok else (None, "must be an integer")
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        return (float(value), None) if ok else (None, "must be a number")
    if kind is str:
        return (value, None) if isinstance(value, str) else (None, "must be a string")
    raise TypeError(kind)


def _check_value(field: Field, value, path, lines, problems):
    kind = field.kind
    if isinstance(kind, dict):
        if not isinstance(value, dict):
            problems.append(f"{_where(lines, path)}: must be a mapping")
            return None
        return _check_mapping(kind, value, path, lines, problems)
    if isinstance(kind, tuple):
        if not isinstance(value, list):
            problems.append(f"{_where(lines, path)}: must be a list")
            return None
        out = []
        for i, item in enumerate(value):
            v = _check_value(Field(kind[1]), item, path + (i,), lines, problems)
            out.append(v)
        if any(v is None for v in out):
            return None
        value = out
    else:
        value, msg = _coerce(kind, value)
        if msg:
            problems.append(f"{_where(lines, path)}: {msg}")
            return None
    if field.check is not None:
        msg = field.check(value)
        if msg:
            problems.append(f"{_where(lines, path)}: {msg}")
            return None
    return value


def _check_mapping(schema: dict, data: dict, path, lines, problems) -> dict:
    out = {}
    for key in data:
        if key not in schema:
            problems.append(f"{_where(lines, path + (key,))}: unknown key "
                            f"(allowed: {', '.join(schema)})")
    for key, field in schema.items():
        if key in data and data[key] is not None:
            out[key] = _check_value(field, data[key], path + (key,), lines, problems)
        elif field.default is REQUIRED:
            problems.append(f"{_where(lines, path)}: missing required field '{key}'")
        elif isinstance(field.kind, dict):
            out[key] = _check_mapping(field.kind, dict(field.default), path + (key,), lines, problems)
        else:
            out[key] = field.default
    return out


def _cross_checks(cfg: dict, lines) -> list[str]:
    problems = []
    exp = cfg["experiment"]
    grid = cfg.get("grid")
    if grid and grid["start"] is not None and grid["stop"] is not None \
            and grid["start"] >= grid["stop"]:
        problems.append(f"{_where(lines, ('grid', 'stop'))}: must exceed grid.start")
    embeddings = ([cfg["embedding"]] if "embedding" in cfg else []) + list(cfg.get("embeddings") or [])
    key = "embedding" if "embedding" in cfg else "embeddings"
    for i, emb in enumerate(embeddings):
        if not emb:
            continue
        path = (key,) if key == "embedding" else (key, i)
        if exp != "basis-dump" and emb.get("n_qubits") not in (None, 9):
            problems.append(f"{_where(lines, path + ('n_qubits',))}: QCNN experiments need 9 qubits")
    if exp == "basis-dump" and cfg["antidiagonal"] and cfg["embedding"] \
            and cfg["embedding"]["kind"] != "ground_state":
        problems.append(f"{_where(lines, ('antidiagonal',))}: antidiagonal products need "
                        "the ground_state embedding")
    return problems


def validate(data, lines: dict | None = None, command: str | None = None) -> dict:
    """Normalised config with defaults, or ConfigError listing every problem."""
    lines = lines or {}
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a mapping"])
    exp = data.get("experiment")
    if exp not in SCHEMAS:
        where = _where(lines, ("experiment",))
        raise ConfigError([f"{where}: experiment must be one of {', '.join(EXPERIMENTS)}"
                           if exp is not None else f"{where}: missing required field 'experiment'"])
    problems: list[str] = []
    if command is not None and COMMANDS[command] != exp:
        problems.append(f"{_where(lines, ('experiment',))}: subcommand '{command}' runs "
                        f"'{COMMANDS[command]}' experiments, not '{exp}'")
    cfg = _check_mapping(SCHEMAS[exp], data, (), lines, problems)
    if not problems:
        problems += _cross_checks(cfg, lines)
    if problems:
        raise ConfigError(problems)
    return cfg


def load(path: str | Path, command: str | None = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config ({exc.strerror})"]) from exc
    data, lines = parse(text, str(path))
    return validate(data, lines, command)


def default_config_text(command: str) -> str:
    return resources.files("qcnnlab.configs").joinpath(f"{command}.yaml").read_text()


def default_config(command: str) -> dict:
    data, lines = parse(default_config_text(command), f"{command}.yaml")
    return validate(data, lines, command)
