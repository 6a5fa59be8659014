"""Grading metrics and checkpoint selection."""
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError
from .graph import NUM_CLASSES, as_labels
from .loss import as_scores, count_violations


@dataclass
class EpochMetrics:
    epoch: int
    qwk: float
    macro_f1: float
    forward_inversion_rate: float
    val_mse: float = 0.0
    val_odr: float = 0.0
    train_mse: float = 0.0
    train_odr: float = 0.0

    def to_dict(self):
        return asdict(self)


def discretize(scores) -> np.ndarray:
    """Round half up and clamp to the grade range."""
    s = as_scores(scores)
    return np.clip(np.floor(s + 0.5), 0, NUM_CLASSES - 1).astype(np.int64)


def confusion_matrix(true_labels, pred_labels) -> np.ndarray:
    t = as_labels(true_labels)
    p = as_labels(pred_labels, t.shape[0])
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return counts


def qwk(true_labels, pred_labels) -> float:
    """Quadratic weighted kappa over the five grades."""
    observed = confusion_matrix(true_labels, pred_labels).astype(np.float64)
    total = observed.sum()
    if total == 0:
        raise UndefinedMetricError("QWK of an empty sample is undefined")
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / total
    grades = np.arange(NUM_CLASSES)
    weights = (grades[:, None] - grades[None, :]) ** 2 / (NUM_CLASSES - 1) ** 2
    denom = float(np.sum(weights * expected))
    if denom == 0:
        raise UndefinedMetricError(
            "QWK is undefined: chance disagreement is zero (degenerate marginals)"
        )
    return 1.0 - float(np.sum(weights * observed)) / denom


def macro_f1(true_labels, pred_labels) -> float:
    """Unweighted mean F1 over all five classes; absent classes score 0."""
    counts = confusion_matrix(true_labels, pred_labels)
    if counts.sum() == 0:
        raise InvalidInputError("macro F1 needs at least one sample")
    tp = np.diag(counts).astype(np.float64)
    denom = counts.sum(axis=0) + counts.sum(axis=1)  # 2tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(NUM_CLASSES), where=denom > 0)
    return float(f1.mean())


def forward_inversion_rate(stack, scores, labels=None) -> float:
    """Share of reachable off-diagonal ``(t, i, j)`` triples with ``s_i > s_j``."""
    if labels is not None:
        as_labels(labels, stack.n)
    violations, support = count_violations(stack, scores)
    return violations / support if support else 0.0


def _minmax(values: np.ndarray) -> np.ndarray:
    span = values.max() - values.min()
    if span == 0:
        return np.zeros_like(values)
    return (values - values.min()) / span


def select_checkpoint(history: Sequence[EpochMetrics]) -> int:
    """Index of the epoch maximizing min-max normalized QWK plus macro F1.

    The earliest epoch wins ties.
    """
    if not history:
        raise InvalidInputError("cannot select a checkpoint from an empty history")
    q = np.array([h.qwk for h in history], dtype=np.float64)
    f = np.array([h.macro_f1 for h in history], dtype=np.float64)
    composite = _minmax(q) + _minmax(f)
    return int(np.argmax(composite))
