"""Experiment runners behind the CLI.

Each runner takes a validated config dict (see :mod:`qcnnlab.config`) and
returns a :class:`RunResult`: named tables of rows plus a small summary.
Repeated runs draw their seeds from ``SeedSequence([master_seed, index])``,
so the output does not depend on how tasks are scheduled over workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .circuits import build_fixed_qcnn, make_model, stage_readouts
from .embeddings import (GROUND_STATE, EmbeddingSpec, antidiagonal_products, basis_dump,
                         bitstring_labels, embed_many)
from .hamiltonian import string_order
from .regression import (RegressionTarget, fit_regression, regression_accuracy,
                         regression_grid, test_grid)
from .sim import PauliString, conjugate_operator, expectation
from .trainer import (EmbeddedModel, TrainConfig, adam_fit, make_classification_sets,
                      shots_sweep, spt_labels, test_accuracy)

SIGN_CONVENTIONS = {
    "qubit_order": "qubit 1 is the most significant bit of the basis index",
    "rotations": "R_P(t) = exp(-i t P / 2), ZZ(t) = exp(-i t Z Z / 2)",
    "string_order": "O = (-1)^N X_1 ... X_N, positive on the SPT side (x < 0.5)",
    "labels": "y = -1 where <O> > 0 (SPT, class A), y = +1 otherwise (class B)",
    "prediction": "class +1 where f >= 0, class -1 where f < 0",
    "fixed_readout": "-X_5 at stage D; f_fixed(x) = -<O>(x)",
    "stage_c_readout": "-X_2 X_5 X_8 at stage C; equals +<O>(x)",
    "trainable_readout": "+X_5 after the final trainable SU2",
}


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class RunResult:
    tables: dict[str, Table]  # "" is the main table, others become <name>.<key>.csv
    summary: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)


def task_seed(master: int, index: int) -> int:
    """Seed of task ``index`` under a master seed, independent of scheduling."""
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def run_tasks(fn: Callable, tasks: Sequence, threads: int = 1) -> list:
    """Map ``fn`` over tasks, in order, optionally on a process pool."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def grid_points(grid: dict) -> np.ndarray:
    return np.linspace(grid["start"], grid["stop"], grid["points"])


def embedding_spec(cfg: dict) -> EmbeddingSpec:
    return EmbeddingSpec(cfg["kind"], cfg["n_qubits"], cfg["epsilon"], cfg["eta"])


def embedding_tag(spec: EmbeddingSpec) -> str:
    if spec.kind == GROUND_STATE:
        return "ground_state"
    return f"fourier_eta{spec.eta:g}"


def train_config(cfg: dict, seed: int, shots: int | None = None) -> TrainConfig:
    return TrainConfig(learning_rate=cfg["learning_rate"], epochs=cfg["epochs"],
                       adam_beta1=cfg["adam_beta1"], adam_beta2=cfg["adam_beta2"],
                       adam_eps=cfg["adam_eps"], seed=seed, shots_per_eval=shots,
                       gradient_step=cfg["gradient_step"])


def _sets(data: dict, seed: int):
    return make_classification_sets(data["n_train"], data["n_test"], seed,
                                    epsilon=data["epsilon"], test_std=data["test_std"])


def gradient_metadata(train: dict, shots: int | None = None) -> dict:
    return {"method": "central finite differences over all slots, one batched stencil",
            "step": train["gradient_step"],
            "shots_per_evaluation": "exact" if shots is None else shots,
            "optimizer": "full-batch Adam"}


# --- basis dump -----------------------------------------------------------------

def run_basis_dump(cfg: dict, threads: int = 1) -> RunResult:
    spec = embedding_spec(cfg["embedding"])
    xs = grid_points(cfg["grid"])
    dump = basis_dump(spec, xs)
    labels = bitstring_labels(spec.n_qubits)
    tables = {"": Table(["x"] + labels, [[x, *p] for x, p in zip(xs, dump.probabilities)])}
    summary = {"max_row_sum_error": float(np.max(np.abs(dump.probabilities.sum(axis=1) - 1)))}
    if cfg["antidiagonal"]:
        prods = antidiagonal_products(spec, xs)
        obs = string_order(spec.n_qubits)
        direct = expectation(embed_many(spec, xs), obs)
        total = obs.sign * prods.sum(axis=1)
        tables["antidiagonal"] = Table(["x"] + labels + ["signed_sum", "string_order"],
                                       [[x, *p, s, d] for x, p, s, d in zip(xs, prods, total, direct)])
        summary["max_sum_vs_direct"] = float(np.max(np.abs(total - direct)))
    return RunResult(tables, summary)


# --- fixed network ----------------------------------------------------------------

def run_fixed_scan(cfg: dict, threads: int = 1) -> RunResult:
    xs = grid_points(cfg["grid"])
    spec = EmbeddingSpec(GROUND_STATE, 9, cfg["epsilon"])
    states = embed_many(spec, xs)
    reads = stage_readouts(9)
    pooled, bare = build_fixed_qcnn(9), build_fixed_qcnn(9, pooling=False)
    cols = {
        "stage_a": expectation(states, reads["A"]),
        "stage_c": expectation(pooled.run(states, stop="C"), reads["C"]),
        "stage_d": expectation(pooled.run(states), reads["D"]),
        "nopool_n3": expectation(bare.run(states, stop="C"), reads["C"]),
        "nopool_n1": expectation(bare.run(states), reads["D"]),
    }
    dressed = conjugate_operator(pooled.bind(), reads["D"])
    ref = PauliString("X" * 9).matrix()
    sigma = 1 if np.linalg.norm(dressed - ref) < np.linalg.norm(dressed + ref) else -1
    # O = -X^9 on nine qubits, so a readout dressed to sigma X^9 reads -sigma <O>
    signs = {"stage_c": 1, "stage_d": -sigma, "nopool_n3": 1, "nopool_n1": -sigma}
    names = list(cols)
    rows = [[x, *(cols[n][i] for n in names)] for i, x in enumerate(xs)]
    window = (xs >= 0.4) & (xs <= 0.6)
    summary = {"dressed_operator_sign": sigma,
               "dressed_operator_error": float(np.linalg.norm(dressed - sigma * ref)),
               "curve_signs": signs}
    for n in names[1:]:
        dev = np.abs(signs[n] * cols[n] - cols["stage_a"])
        summary[f"max_dev_{n}"] = float(dev.max())
        summary[f"max_dev_{n}_window"] = float(dev[window].max()) if window.any() else None
    meta = {"curves": {"stage_a": "string order <O> on the input state",
                       "stage_c": "-X_2 X_5 X_8 after the first pooling and re-preparation",
                       "stage_d": "-X_5 after the full network (model output)",
                       "nopool_n3": "-X_2 X_5 X_8 at stage C with CORRECT layers removed",
                       "nopool_n1": "-X_5 at stage D with CORRECT layers removed"},
            "curve_signs": "curve ~ sign * stage_a"}
    return RunResult({"": Table(["x"] + names, rows)}, summary, meta)


# --- classification -----------------------------------------------------------------

def _classify_task(args) -> dict:
    ansatz, emb, data, train, seed, grid, shots = args
    spec = embedding_spec(emb)
    train_set, test_set = _sets(data, seed)
    model = EmbeddedModel(make_model(ansatz), spec)
    trace = adam_fit(model, None, train_set, train_config(train, seed, shots))
    out = {"seed": seed, "losses": trace.losses, "params": trace.params,
           "accuracy": test_accuracy(model, trace.params, test_set),
           "n_train": len(train_set)}
    if shots is not None:
        out["accuracy_shots"] = test_accuracy(model, trace.params, test_set, shots=shots,
                                              seed=task_seed(seed, 1))
    if grid is not None:
        out["boundary"] = model.values(trace.params, grid_points(grid))
    return out


def _trace_table(results, key_cols: list[str], keys: list[list]) -> Table:
    t = Table(key_cols + ["epoch", "loss"])
    for k, r in zip(keys, results):
        t.rows += [[*k, e, loss] for e, loss in enumerate(r["losses"])]
    return t


def run_train_classify(cfg: dict, threads: int = 1) -> RunResult:
    seeds = [task_seed(cfg["seed"], r) for r in range(cfg["repeats"])]
    tasks = [(cfg["ansatz"], cfg["embedding"], cfg["data"], cfg["train"], s, cfg["grid"], None)
             for s in seeds]
    results = run_tasks(_classify_task, tasks, threads)
    main = Table(["repeat", "seed", "initial_loss", "final_loss", "test_accuracy"],
                 [[r, res["seed"], res["losses"][0], res["losses"][-1], res["accuracy"]]
                  for r, res in enumerate(results)])
    xs = grid_points(cfg["grid"])
    labels = spt_labels(xs, 9, cfg["data"]["epsilon"])
    boundary = Table(["x", "label"] + [f"f_repeat{r}" for r in range(len(results))],
                     [[x, y, *(res["boundary"][i] for res in results)]
                      for i, (x, y) in enumerate(zip(xs, labels))])
    slots = make_model(cfg["ansatz"]).circuit.slot_names
    params = Table(["repeat"] + slots, [[r, *res["params"]] for r, res in enumerate(results)])
    accs = [res["accuracy"] for res in results]
    summary = {"median_test_accuracy": float(np.median(accs)),
               "mean_test_accuracy": float(np.mean(accs))}
    return RunResult({"": main, "trace": _trace_table(results, ["repeat"], [[r] for r in range(len(results))]),
                      "boundary": boundary, "params": params}, summary,
                     {"gradient": gradient_metadata(cfg["train"])})


def run_eta_sweep(cfg: dict, threads: int = 1) -> RunResult:
    seeds = [task_seed(cfg["seed"], r) for r in range(cfg["repeats"])]
    keys, tasks = [], []
    for eta in cfg["etas"]:
        emb = {"kind": "fourier", "n_qubits": cfg["n_qubits"], "epsilon": 0.0, "eta": eta}
        for r, s in enumerate(seeds):
            keys.append([eta, r])
            tasks.append((cfg["ansatz"], emb, cfg["data"], cfg["train"], s, None, None))
    results = run_tasks(_classify_task, tasks, threads)
    main = Table(["eta", "repeat", "seed", "initial_loss", "final_loss", "test_accuracy"],
                 [[*k, res["seed"], res["losses"][0], res["losses"][-1], res["accuracy"]]
                  for k, res in zip(keys, results)])
    summary_rows, medians = [], {}
    for eta in cfg["etas"]:
        accs = [res["accuracy"] for k, res in zip(keys, results) if k[0] == eta]
        summary_rows.append([eta, np.median(accs), np.mean(accs), np.min(accs), np.max(accs)])
        medians[f"{eta:g}"] = float(np.median(accs))
    summary = Table(["eta", "median_accuracy", "mean_accuracy", "min_accuracy", "max_accuracy"],
                    summary_rows)
    return RunResult({"": main, "summary": summary, "trace": _trace_table(results, ["eta", "repeat"], keys)},
                     {"median_test_accuracy": medians},
                     {"gradient": gradient_metadata(cfg["train"])})


# --- shot noise ---------------------------------------------------------------------

def _shots_task(args) -> dict:
    ansatz, emb, data, train, seed, sweep_seed, shot_grid, trials, grid = args
    spec = embedding_spec(emb)
    train_set, test_set = _sets(data, seed)
    model = EmbeddedModel(make_model(ansatz), spec)
    trace = adam_fit(model, None, train_set, train_config(train, seed))
    rows = shots_sweep(model, trace.params, test_set, [None, *shot_grid], trials, sweep_seed)
    return {"tag": embedding_tag(spec), "rows": rows, "final_loss": trace.losses[-1],
            "boundary": model.values(trace.params, grid_points(grid))}


def run_shots_sweep(cfg: dict, threads: int = 1) -> RunResult:
    seed = task_seed(cfg["seed"], 0)
    tasks = [(cfg["ansatz"], emb, cfg["data"], cfg["train"], seed, task_seed(cfg["seed"], 1 + e),
              cfg["shot_grid"], cfg["trials"], cfg["grid"])
             for e, emb in enumerate(cfg["embeddings"])]
    results = run_tasks(_shots_task, tasks, threads)
    main = Table(["embedding", "shots", "mean_accuracy", "std_accuracy"]
                 + [f"trial{t}" for t in range(cfg["trials"])])
    summary: dict[str, Any] = {"train_seed": seed}
    for res in results:
        for row in res["rows"]:
            shots = "inf" if row["shots"] is None else row["shots"]
            main.rows.append([res["tag"], shots, row["mean_accuracy"], row["std_accuracy"],
                              *row["accuracies"]])
        summary[res["tag"]] = {str("inf" if r["shots"] is None else r["shots"]): r["mean_accuracy"]
                               for r in res["rows"]}
    xs = grid_points(cfg["grid"])
    cols = ["x"]
    for res in results:
        cols += [f"f_{res['tag']}", f"var_{res['tag']}"]
    band = Table(cols, [[x, *sum(([res["boundary"][i], 1 - res["boundary"][i] ** 2]
                                  for res in results), [])] for i, x in enumerate(xs)])
    return RunResult({"": main, "band": band}, summary,
                     {"gradient": gradient_metadata(cfg["train"]),
                      "band": "var = 1 - f^2 is the single-shot variance of a +-1 readout"})


def run_train_noisy(cfg: dict, threads: int = 1) -> RunResult:
    seeds = [task_seed(cfg["seed"], r) for r in range(cfg["repeats"])]
    keys, tasks = [], []
    for r, s in enumerate(seeds):
        for emb in cfg["embeddings"]:
            keys.append([r, embedding_tag(embedding_spec(emb))])
            tasks.append((cfg["ansatz"], emb, cfg["data"], cfg["train"], s, None, cfg["shots"]))
    results = run_tasks(_classify_task, tasks, threads)
    main = Table(["repeat", "embedding", "seed", "initial_loss", "final_loss",
                  "test_accuracy_shots", "test_accuracy_exact"],
                 [[*k, res["seed"], res["losses"][0], res["losses"][-1], res["accuracy_shots"],
                   res["accuracy"]] for k, res in zip(keys, results)])
    tags = list(dict.fromkeys(k[1] for k in keys))
    acc = {t: [res["accuracy_shots"] for k, res in zip(keys, results) if k[1] == t] for t in tags}
    summary: dict[str, Any] = {"median_accuracy_shots": {t: float(np.median(a)) for t, a in acc.items()}}
    if len(tags) >= 2:
        first, second = acc[tags[0]], acc[tags[1]]
        summary[f"repeats_{tags[0]}_at_least_{tags[1]}"] = int(np.sum(np.array(first) >= np.array(second)))
    return RunResult({"": main, "trace": _trace_table(results, ["repeat", "embedding"], keys)},
                     summary, {"gradient": gradient_metadata(cfg["train"], cfg["shots"])})


# --- regression ---------------------------------------------------------------------

def _regress_task(args) -> dict:
    ansatz, emb, kind, nu, zeta, train, seed, bound = args
    target = RegressionTarget(kind, nu, zeta)
    model, trace = fit_regression(embedding_spec(emb), ansatz, target, train_config(train, seed))
    xs = test_grid()
    return {"seed": seed, "losses": trace.losses, "a": trace.params[-2], "b": trace.params[-1],
            "accuracy": regression_accuracy(model, target, bound=bound),
            "curve": model(xs), "target": target(xs)}


def run_regress(cfg: dict, threads: int = 1) -> RunResult:
    seeds = [task_seed(cfg["seed"], r) for r in range(cfg["repeats"])]
    keys, tasks = [], []
    for kind in cfg["targets"]:
        for emb in cfg["embeddings"]:
            for r, s in enumerate(seeds):
                keys.append([kind, embedding_tag(embedding_spec(emb)), r])
                tasks.append((cfg["ansatz"], emb, kind, cfg["nu"], cfg["zeta"], cfg["train"], s,
                              cfg["error_bound"]))
    results = run_tasks(_regress_task, tasks, threads)
    main = Table(["target", "embedding", "repeat", "seed", "initial_loss", "final_loss",
                  "accuracy", "scale_a", "shift_b"],
                 [[*k, res["seed"], res["losses"][0], res["losses"][-1], res["accuracy"],
                   res["a"], res["b"]] for k, res in zip(keys, results)])
    xs = test_grid()
    cols, data = ["x"], [xs]
    for kind in cfg["targets"]:
        cols.append(f"target_{kind}")
        data.append(next(res["target"] for k, res in zip(keys, results) if k[0] == kind))
        for k, res in zip(keys, results):
            if k[0] == kind:
                cols.append(f"model_{kind}_{k[1]}_repeat{k[2]}")
                data.append(res["curve"])
    curves = Table(cols, [list(row) for row in zip(*data)])
    train_xs = regression_grid()
    summary = {f"{k[0]}/{k[1]}/repeat{k[2]}": res["accuracy"] for k, res in zip(keys, results)}
    return RunResult({"": main, "curves": curves,
                      "trace": _trace_table(results, ["target", "embedding", "repeat"], keys)},
                     {"accuracy": summary},
                     {"gradient": gradient_metadata(cfg["train"]),
                      "training_grid": [float(x) for x in train_xs],
                      "model": "a * f_circuit(x) + b with a = 1, b = 0 at initialisation"})


RUNNERS = {
    "basis-dump": run_basis_dump,
    "fixed-qcnn-scan": run_fixed_scan,
    "train-classify": run_train_classify,
    "eta-sweep": run_eta_sweep,
    "shots-sweep": run_shots_sweep,
    "train-noisy": run_train_noisy,
    "regress": run_regress,
}


def run_experiment(cfg: dict, threads: int = 1) -> RunResult:
    return RUNNERS[cfg["experiment"]](cfg, threads)
