"""Score-inversion penalty, MSE supervision and the combined objective.

The graph is treated as constant within a batch, so every gradient here is
with respect to the predicted scores only.
"""
from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionStack
from .errors import InvalidInputError


@dataclass
class LossReport:
    mse: float
    odr: float
    total: float
    grad_scores: np.ndarray
    violation_count: int


def as_scores(scores, n=None) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise InvalidInputError(f"scores must be a vector, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores contain non-finite entries")
    if n is not None and s.shape[0] != n:
        raise InvalidInputError(f"expected {n} scores, got {s.shape[0]}")
    return s


def odr_loss(stack: DiffusionStack, scores):
    """Step-weighted sum of ``P^t_ij * max(s_i - s_j, 0)`` over all ``i, j``.

    Returns ``(value, grad)``. The hinge subgradient at a tie is 0.
    """
    s = as_scores(scores, stack.n)
    diff = s[:, None] - s[None, :]
    hinge = np.maximum(diff, 0.0)
    active = (diff > 0).astype(np.float64)
    value = 0.0
    grad = np.zeros_like(s)
    for step in stack:
        P = step.matrix
        value += step.weight * float(np.sum(P * hinge))
        flow = P * active
        # d/ds_i of P_ij (s_i - s_j): +P_ij as the source, -P_ji as the target
        grad += step.weight * (flow.sum(axis=1) - flow.sum(axis=0))
    return value, grad


def count_violations(stack: DiffusionStack, scores) -> tuple:
    """``(violations, support)`` over off-diagonal ``(t, i, j)`` with ``P^t_ij > 0``."""
    s = as_scores(scores, stack.n)
    off = ~np.eye(stack.n, dtype=bool)
    inverted = s[:, None] > s[None, :]
    violations = support = 0
    for step in stack:
        edges = (step.matrix > 0) & off
        support += int(edges.sum())
        violations += int((edges & inverted).sum())
    return violations, support


def mse_loss(scores, labels):
    """Mean squared residual and its gradient ``2 (s - y) / n``."""
    s = as_scores(scores)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape[0] == 0:
        raise InvalidInputError("mse of an empty batch is undefined")
    if y.shape != s.shape:
        raise InvalidInputError(f"scores {s.shape} and labels {y.shape} differ in shape")
    r = s - y
    return float(np.mean(r * r)), 2.0 * r / s.shape[0]


def total_loss(scores, labels, stack, lam: float = 1.0) -> LossReport:
    """``mse + lam * odr`` with gradient. ``stack`` may be None when ``lam == 0``."""
    if lam < 0:
        raise InvalidInputError(f"lambda must be non-negative, got {lam}")
    mse, g_mse = mse_loss(scores, labels)
    if stack is None:
        if lam != 0:
            raise InvalidInputError("a diffusion stack is required when lambda > 0")
        return LossReport(mse, 0.0, mse, g_mse, 0)
    odr, g_odr = odr_loss(stack, scores)
    violations, _ = count_violations(stack, scores)
    return LossReport(mse, odr, mse + lam * odr, g_mse + lam * g_odr, violations)
