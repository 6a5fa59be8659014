"""Experiment configuration, single runs, sweeps and graph dumps.

A run writes ``result.json`` (config snapshot, history, selected checkpoint,
test metrics) and ``history.csv`` under its output directory. The ``config``
block of ``result.json`` can be passed back as ``--config`` to repeat the run.
"""
import csv
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from .data import Dataset, SynthConfig, generate, load_features_csv, split
from .diffusion import diffuse
from .errors import InvalidInputError
from .graph import build_graph
from .metrics import select_checkpoint
from .model import TrainConfig, evaluate, train

log = logging.getLogger(__name__)

ABLATIONS = ("full", "no_dir", "no_fc", "no_msd", "baseline")
HISTORY_COLUMNS = ("epoch", "train_mse", "train_odr", "val_qwk", "val_f1", "val_inversion_rate")


class ConfigError(ValueError):
    """Bad configuration or unusable input/output location."""


@dataclass
class ExperimentConfig:
    # training
    lam: float = 1.0
    batch_size: int = 128
    k: int = 25
    steps: List[int] = field(default_factory=lambda: [1, 2, 3])
    learning_rate: float = 1e-4
    epochs: int = 30
    seed: int = 0
    lr_schedule: bool = True
    sigma_rank: Optional[int] = None
    epsilon_sigma: float = 1e-8
    architecture: str = "linear"
    hidden_width: int = 16
    mode: str = "full"
    # data: "synth" or "csv:PATH"
    data: str = "synth"
    m: int = 2000
    d: int = 16
    noise_sigma: float = 0.6
    curvature: int = 4
    class_balance: List[float] = field(default_factory=lambda: [1.0] * 5)
    data_seed: int = 0
    split_fractions: List[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    out: str = "runs/latest"

    def __post_init__(self):
        if self.mode not in ABLATIONS:
            raise ConfigError(f"mode must be one of {ABLATIONS}, got {self.mode!r}")
        if self.data != "synth" and not self.data.startswith("csv:"):
            raise ConfigError(f"data must be 'synth' or 'csv:PATH', got {self.data!r}")
        if self.data.startswith("csv:") and not self.data[4:]:
            raise ConfigError("data=csv: needs a path")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        self.steps = [int(t) for t in self.steps]
        self.class_balance = [float(c) for c in self.class_balance]
        self.split_fractions = [float(f) for f in self.split_fractions]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        payload = dict(payload)
        if "lambda" in payload:
            payload["lam"] = payload.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**payload)

    def replace(self, **overrides) -> "ExperimentConfig":
        payload = asdict(self)
        payload.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(**payload)

    def train_config(self) -> TrainConfig:
        """Translate the ablation mode into graph mode, steps and lambda."""
        graph_mode = {"no_dir": "undirected", "no_fc": "reversed"}.get(self.mode, "directed")
        steps = [1] if self.mode == "no_msd" else self.steps
        lam = 0.0 if self.mode == "baseline" else self.lam
        try:
            return TrainConfig(
                lam=lam,
                batch_size=self.batch_size,
                k=self.k,
                steps=tuple(steps),
                mode=graph_mode,
                learning_rate=self.learning_rate,
                epochs=self.epochs,
                seed=self.seed,
                lr_schedule=self.lr_schedule,
                sigma_rank=self.sigma_rank,
                epsilon_sigma=self.epsilon_sigma,
                architecture=self.architecture,
                hidden_width=self.hidden_width,
            )
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a JSON config; a ``result.json`` is accepted via its ``config`` block."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if isinstance(payload, dict) and isinstance(payload.get("config"), dict):
        payload = payload["config"]
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    return ExperimentConfig.from_dict(payload)


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.data.startswith("csv:"):
        path = config.data[4:]
        try:
            return load_features_csv(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return generate(SynthConfig(
            m=config.m,
            d=config.d,
            noise_sigma=config.noise_sigma,
            curvature=config.curvature,
            class_balance=tuple(config.class_balance),
            seed=config.data_seed,
        ))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc


def _prepare_out(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _fmt(value) -> str:
    return format(float(value), ".17g")


def write_history_csv(history, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for h in history:
            writer.writerow([
                h.epoch,
                _fmt(h.train_mse),
                _fmt(h.train_odr),
                _fmt(h.qwk),
                _fmt(h.macro_f1),
                _fmt(h.forward_inversion_rate),
            ])


def run_experiment(config: ExperimentConfig) -> dict:
    """Train, select a checkpoint on validation, evaluate on test, write outputs."""
    started = time.perf_counter()
    out = _prepare_out(config.out)
    tc = config.train_config()
    dataset = load_dataset(config)
    try:
        train_set, val_set, test_set = split(dataset, config.split_fractions, config.data_seed)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc

    log.info("training %s: mode=%s lambda=%s k=%d bs=%d seed=%d",
             out, config.mode, tc.lam, tc.k, tc.batch_size, tc.seed)
    result = train(tc, train_set, val_set)
    chosen = select_checkpoint(result.history)
    params = result.checkpoints[chosen]
    test = evaluate(params, test_set.features, test_set.labels, tc)

    run = {
        "config": config.to_dict(),
        "train_config": tc.to_dict(),
        "split_sizes": {"train": len(train_set), "val": len(val_set), "test": len(test_set)},
        "history": [h.to_dict() for h in result.history],
        "selected_epoch": chosen,
        "test": {k: float(v) for k, v in test.items() if k != "scores"},
        "checkpoint": params.to_dict(),
        "wall_clock_seconds": time.perf_counter() - started,
    }
    write_history_csv(result.history, out / "history.csv")
    (out / "result.json").write_text(json.dumps(run, indent=2) + "\n", encoding="utf-8")
    return run


def _sweep_point(config: ExperimentConfig):
    try:
        return run_experiment(config), None
    except Exception as exc:  # recorded per point, the sweep keeps going
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(config: ExperimentConfig, lambdas=None, ks=None, batch_sizes=None,
              seeds=None, workers: int = 1) -> dict:
    """Cartesian grid over the given axes, several seeds per point.

    Writes one run directory per (point, seed) and ``summary.csv`` with the
    mean and sample standard deviation of test QWK, macro F1 and inversion rate.
    """
    axes = {"lam": lambdas, "k": ks, "batch_size": batch_sizes}
    for name, values in axes.items():
        if values is not None and len(values) == 0:
            raise ConfigError(f"sweep axis {name} is empty")
    if all(v is None for v in axes.values()):
        raise ConfigError("sweep needs at least one grid axis")
    seeds = list(seeds) if seeds is not None else [config.seed + i for i in range(3)]
    if not seeds:
        raise ConfigError("sweep needs at least one seed")

    out = _prepare_out(config.out)
    grid = [v if v is not None else [getattr(config, n)] for n, v in axes.items()]
    points = list(itertools.product(*grid))
    jobs = []
    for p_idx, (lam, k, bs) in enumerate(points):
        for seed in seeds:
            jobs.append(config.replace(
                lam=lam, k=k, batch_size=bs, seed=seed,
                out=str(out / f"point_{p_idx:03d}" / f"seed_{seed}"),
            ))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_point, jobs))
    else:
        outcomes = [_sweep_point(job) for job in jobs]

    rows, failures = [], []
    for p_idx, (lam, k, bs) in enumerate(points):
        chunk = outcomes[p_idx * len(seeds):(p_idx + 1) * len(seeds)]
        done = [r for r, err in chunk if r is not None]
        for seed, (_, err) in zip(seeds, chunk):
            if err is not None:
                failures.append({"point": p_idx, "seed": seed, "error": err})
                log.error("point %d seed %d failed: %s", p_idx, seed, err)
        row = {"point": p_idx, "lambda": lam, "k": k, "batch_size": bs,
               "n_runs": len(done), "n_failed": len(chunk) - len(done)}
        for key, col in (("qwk", "qwk"), ("macro_f1", "f1"),
                         ("forward_inversion_rate", "inversion_rate")):
            vals = np.array([r["test"][key] for r in done])
            if vals.size == 0:
                mean = std = math.nan
            else:
                mean = float(vals.mean())
                std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            row[f"{col}_mean"], row[f"{col}_std"] = mean, std
        rows.append(row)

    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in row.items()})
    return {"rows": rows, "failures": failures, "seeds": seeds}


def _write_matrix(path, ids, matrix):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + list(ids))
        for sample_id, row in zip(ids, matrix):
            writer.writerow([sample_id] + [_fmt(v) for v in row])


def dump_graph(config: ExperimentConfig, indices) -> dict:
    """Write the graph matrices for the samples at ``indices`` of the full dataset."""
    dataset = load_dataset(config)
    bad = [i for i in indices if not 0 <= i < len(dataset)]
    if bad:
        raise ConfigError(
            f"invalid sample indices {bad} (dataset has {len(dataset)} samples)"
        )
    if not indices:
        raise ConfigError("graph-dump needs at least one index")
    tc = config.train_config()
    batch = dataset.subset(indices)
    try:
        graph = build_graph(batch.features, batch.labels, tc.graph_config())
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    out = _prepare_out(config.out)
    _write_matrix(out / "affinity.csv", batch.ids, graph.affinity)
    _write_matrix(out / "masked_affinity.csv", batch.ids, graph.masked)
    _write_matrix(out / "transition.csv", batch.ids, graph.transition)
    stack = diffuse(graph.transition, tc.steps)
    for step in stack:
        _write_matrix(out / f"diffusion_t{step.t}.csv", batch.ids, step.matrix)
    return {"ids": batch.ids, "graph": graph, "stack": stack}


def read_matrix_csv(path):
    """Inverse of the graph-dump writer: ``(ids, matrix)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    matrix = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return ids, matrix
