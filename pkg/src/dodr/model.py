"""Trainable scorers with manual backpropagation, and the SGD training loop."""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .diffusion import DEFAULT_STEPS, diffuse, normalize_steps
from .errors import InvalidInputError, TrainingDivergedError
from .graph import GraphConfig, as_features, as_labels, build_graph
from .loss import mse_loss, odr_loss, count_violations, total_loss
from .metrics import EpochMetrics, discretize, macro_f1, qwk

ARCHITECTURES = ("linear", "mlp1")


@dataclass
class ScorerParams:
    """Scorer weights keyed by name.

    ``linear``: ``w`` (d,), ``b`` ().
    ``mlp1``: ``W1`` (h, d), ``b1`` (h,), ``w2`` (h,), ``b2`` ();
    the hidden layer uses tanh.
    """

    architecture: str
    arrays: Dict[str, np.ndarray]

    @property
    def d(self) -> int:
        key = "w" if self.architecture == "linear" else "W1"
        return self.arrays[key].shape[-1]

    def copy(self) -> "ScorerParams":
        return ScorerParams(self.architecture, {k: v.copy() for k, v in self.arrays.items()})

    def to_dict(self) -> dict:
        """Flat JSON-friendly form: shapes plus row-major value lists."""
        return {
            "architecture": self.architecture,
            "arrays": {
                name: {"shape": list(a.shape), "values": a.ravel().tolist()}
                for name, a in self.arrays.items()
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ScorerParams":
        arrays = {
            name: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in payload["arrays"].items()
        }
        params = cls(payload["architecture"], arrays)
        _check_params(params)
        return params


def _check_params(params: ScorerParams):
    if params.architecture not in ARCHITECTURES:
        raise InvalidInputError(f"unknown architecture {params.architecture!r}")
    for name, a in params.arrays.items():
        if not np.all(np.isfinite(a)):
            raise InvalidInputError(f"parameter {name} has non-finite entries")


def init_params(d: int, architecture: str = "linear", hidden_width: int = 16, rng=None) -> ScorerParams:
    """Fan-in uniform initialization, zero biases."""
    rng = np.random.default_rng(rng)
    if architecture == "linear":
        bound = 1.0 / math.sqrt(d)
        arrays = {"w": rng.uniform(-bound, bound, d), "b": np.zeros(())}
    elif architecture == "mlp1":
        if hidden_width < 1:
            raise InvalidInputError("hidden_width must be positive")
        b1, b2 = 1.0 / math.sqrt(d), 1.0 / math.sqrt(hidden_width)
        arrays = {
            "W1": rng.uniform(-b1, b1, (hidden_width, d)),
            "b1": np.zeros(hidden_width),
            "w2": rng.uniform(-b2, b2, hidden_width),
            "b2": np.zeros(()),
        }
    else:
        raise InvalidInputError(f"unknown architecture {architecture!r}")
    return ScorerParams(architecture, arrays)


def _inputs(params: ScorerParams, features) -> np.ndarray:
    z = as_features(features)
    if z.shape[1] != params.d:
        raise InvalidInputError(
            f"feature dimension {z.shape[1]} does not match scorer dimension {params.d}"
        )
    return z


def forward(params: ScorerParams, features) -> np.ndarray:
    """Scores for a batch; never touches labels or builds a graph."""
    z = _inputs(params, features)
    a = params.arrays
    if params.architecture == "linear":
        return z @ a["w"] + a["b"]
    return np.tanh(z @ a["W1"].T + a["b1"]) @ a["w2"] + a["b2"]


def backward(params: ScorerParams, features, grad_scores) -> Dict[str, np.ndarray]:
    """Parameter gradients given ``dL/ds`` for each sample."""
    z = _inputs(params, features)
    g = np.asarray(grad_scores, dtype=np.float64)
    if g.shape != (z.shape[0],):
        raise InvalidInputError(f"grad_scores must have shape ({z.shape[0]},)")
    a = params.arrays
    if params.architecture == "linear":
        return {"w": z.T @ g, "b": np.asarray(g.sum())}
    h = np.tanh(z @ a["W1"].T + a["b1"])
    # back through tanh: 1 - h^2
    delta = np.outer(g, a["w2"]) * (1.0 - h * h)
    return {
        "W1": delta.T @ z,
        "b1": delta.sum(axis=0),
        "w2": h.T @ g,
        "b2": np.asarray(g.sum()),
    }


@dataclass
class TrainConfig:
    lam: float = 1.0
    batch_size: int = 128
    k: int = 25
    steps: tuple = DEFAULT_STEPS
    mode: str = "directed"
    learning_rate: float = 1e-4
    epochs: int = 30
    seed: int = 0
    lr_schedule: bool = True
    sigma_rank: Optional[int] = None
    epsilon_sigma: float = 1e-8
    architecture: str = "linear"
    hidden_width: int = 16

    def __post_init__(self):
        self.steps = normalize_steps(self.steps)
        if self.lam < 0:
            raise InvalidInputError("lambda must be non-negative")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be positive")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be non-negative")
        self.graph_config()

    def graph_config(self) -> GraphConfig:
        sigma_rank = self.sigma_rank if self.sigma_rank is not None else min(7, self.k)
        return GraphConfig(self.k, sigma_rank, self.mode, self.epsilon_sigma)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["steps"] = list(self.steps)
        return out


@dataclass
class TrainResult:
    initial: ScorerParams
    history: List[EpochMetrics] = field(default_factory=list)
    checkpoints: List[ScorerParams] = field(default_factory=list)

    @property
    def final(self) -> ScorerParams:
        return self.checkpoints[-1] if self.checkpoints else self.initial


def _batch_loss(params, z, y, config, graph_config):
    s = forward(params, z)
    if config.lam == 0:
        return total_loss(s, y, None, 0.0)
    P = build_graph(z, y, graph_config).transition
    return total_loss(s, y, diffuse(P, config.steps), config.lam)


def evaluate(params: ScorerParams, features, labels, config: TrainConfig) -> dict:
    """Score a split and compute grading metrics plus graph diagnostics.

    Graph diagnostics are built over consecutive chunks of ``batch_size``
    samples in split order, mirroring the training graph scale.
    """
    z = as_features(features)
    y = as_labels(labels, z.shape[0])
    s = forward(params, z)
    pred = discretize(s)
    graph_config = config.graph_config()
    odr_total = 0.0
    violations = support = 0
    for start in range(0, z.shape[0], config.batch_size):
        sl = slice(start, start + config.batch_size)
        stack = diffuse(build_graph(z[sl], y[sl], graph_config).transition, config.steps)
        odr_total += odr_loss(stack, s[sl])[0]
        v, sup = count_violations(stack, s[sl])
        violations += v
        support += sup
    n_chunks = math.ceil(z.shape[0] / config.batch_size)
    return {
        "scores": s,
        "mse": mse_loss(s, y)[0],
        "odr": odr_total / n_chunks,
        "qwk": qwk(y, pred),
        "macro_f1": macro_f1(y, pred),
        "forward_inversion_rate": violations / support if support else 0.0,
    }


def train(config: TrainConfig, train_set, val_set) -> TrainResult:
    """Minibatch SGD on ``mse + lam * odr`` with a per-batch graph.

    ``train_set`` and ``val_set`` are ``(features, labels)`` pairs or objects
    with ``features`` and ``labels`` attributes. Returns the initial weights,
    one ``EpochMetrics`` per epoch and a parameter snapshot per epoch.
    """
    z_tr, y_tr = _unpack(train_set)
    z_va, y_va = _unpack(val_set)
    if len(np.unique(y_va)) < 2:
        raise InvalidInputError("validation split needs at least two distinct labels")
    if z_va.shape[1] != z_tr.shape[1]:
        raise InvalidInputError("train and validation feature dimensions differ")

    rng = np.random.default_rng(config.seed)
    params = init_params(z_tr.shape[1], config.architecture, config.hidden_width, rng)
    result = TrainResult(initial=params.copy())
    graph_config = config.graph_config()

    m = z_tr.shape[0]
    per_epoch = math.ceil(m / config.batch_size)
    total_steps = per_epoch * config.epochs
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(m)
        mse_sum = odr_sum = 0.0
        for b in range(per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            report = _batch_loss(params, z_tr[idx], y_tr[idx], config, graph_config)
            if not math.isfinite(report.total):
                raise TrainingDivergedError(epoch, b, report.total)
            grads = backward(params, z_tr[idx], report.grad_scores)
            lr = config.learning_rate
            if config.lr_schedule:
                lr *= 1.0 - step / total_steps
            for name, g in grads.items():
                params.arrays[name] = params.arrays[name] - lr * g
            if not all(np.all(np.isfinite(a)) for a in params.arrays.values()):
                raise TrainingDivergedError(epoch, b, float("nan"))
            mse_sum += report.mse
            odr_sum += report.odr
            step += 1

        val = evaluate(params, z_va, y_va, config)
        result.history.append(EpochMetrics(
            epoch=epoch,
            qwk=val["qwk"],
            macro_f1=val["macro_f1"],
            forward_inversion_rate=val["forward_inversion_rate"],
            val_mse=val["mse"],
            val_odr=val["odr"],
            train_mse=mse_sum / per_epoch,
            train_odr=odr_sum / per_epoch,
        ))
        result.checkpoints.append(params.copy())
    return result


def _unpack(split):
    if hasattr(split, "features"):
        features, labels = split.features, split.labels
    else:
        features, labels = split
    z = as_features(features)
    return z, as_labels(labels, z.shape[0])
