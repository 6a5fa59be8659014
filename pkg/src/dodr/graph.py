"""Per-batch directed diffusion graph.

The construction runs in five steps over a mini-batch of encoder features
``z`` (rows are samples) with ordinal labels ``y``:

1. squared Euclidean distances between all rows,
2. mutual k-nearest-neighbour pairs (ties broken by lower sample index),
3. a locally scaled Gaussian kernel ``exp(-|z_i - z_j|^2 / (sigma_i sigma_j))``
   restricted to mutual pairs,
4. a label mask that keeps only edges pointing to an equal or more severe
   grade (or the ablation variants), and
5. identity self-loops followed by row normalization.

Everything is dense; batches are small (the default is 128 samples).
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError

NUM_CLASSES = 5
MAX_BATCH = 512
GRAPH_MODES = ("directed", "undirected", "reversed")


@dataclass(frozen=True)
class GraphConfig:
    """Graph construction settings.

    ``sigma_rank`` defaults to ``min(7, k)`` when left as ``None``.
    """

    k: int = 25
    sigma_rank: Optional[int] = None
    mode: str = "directed"
    epsilon_sigma: float = 1e-8

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidInputError(f"k must be a positive integer, got {self.k!r}")
        if self.sigma_rank is None:
            object.__setattr__(self, "sigma_rank", min(7, self.k))
        if not 1 <= self.sigma_rank <= self.k:
            raise InvalidInputError(
                f"sigma_rank must lie in [1, k={self.k}], got {self.sigma_rank!r}"
            )
        if self.mode not in GRAPH_MODES:
            raise InvalidInputError(
                f"mode must be one of {GRAPH_MODES}, got {self.mode!r}"
            )
        if not self.epsilon_sigma > 0:
            raise InvalidInputError("epsilon_sigma must be positive")


class DirectedGraph(NamedTuple):
    affinity: np.ndarray
    masked: np.ndarray
    transition: np.ndarray


def as_features(features) -> np.ndarray:
    """Return ``features`` as a finite float64 matrix of shape (n, d)."""
    z = np.asarray(features, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise InvalidInputError(f"features must be an n x d matrix, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("features contain non-finite entries")
    return z


def as_labels(labels, n: Optional[int] = None) -> np.ndarray:
    """Return ``labels`` as an int64 vector of grades in {0, ..., 4}."""
    raw = np.asarray(labels)
    if raw.ndim != 1:
        raise InvalidInputError(f"labels must be a vector, got shape {raw.shape}")
    if raw.size and not np.all(np.equal(np.mod(raw, 1), 0)):
        raise InvalidInputError("labels must be integers")
    y = raw.astype(np.int64)
    if np.any((y < 0) | (y >= NUM_CLASSES)):
        raise InvalidInputError(f"labels must lie in 0..{NUM_CLASSES - 1}")
    if n is not None and y.shape[0] != n:
        raise InvalidInputError(f"expected {n} labels, got {y.shape[0]}")
    return y


def pairwise_sq_distances(features) -> np.ndarray:
    """Squared Euclidean distances between all rows of ``features``.

    Computed from explicit differences rather than the Gram expansion, so the
    result is exactly symmetric with an exact zero diagonal.
    """
    z = as_features(features)
    diff = z[:, None, :] - z[None, :, :]
    return np.maximum(np.einsum("ijk,ijk->ij", diff, diff), 0.0)


def knn_lists(distances: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest neighbours of every sample.

    Returns an ``(n, min(k, n - 1))`` integer array whose rows are sorted by
    ascending distance, ties resolved towards the lower sample index. A sample
    is never its own neighbour.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    n = distances.shape[0]
    k_eff = min(k, n - 1)
    if k_eff == 0:
        return np.empty((n, 0), dtype=np.int64)
    # drop the diagonal, then a stable sort keeps index order among ties
    off = ~np.eye(n, dtype=bool)
    candidates = np.broadcast_to(np.arange(n), (n, n))[off].reshape(n, n - 1)
    dist = distances[off].reshape(n, n - 1)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
    return np.take_along_axis(candidates, order, axis=1)


def mutual_knn_mask(distances: np.ndarray, k: int, neighbors=None) -> np.ndarray:
    """Boolean symmetric matrix marking mutual k-nearest-neighbour pairs."""
    if neighbors is None:
        neighbors = knn_lists(distances, k)
    n = distances.shape[0]
    is_nn = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), neighbors.shape[1])
    is_nn[rows, neighbors.ravel()] = True
    return is_nn & is_nn.T


def mutual_knn(distances: np.ndarray, k: int) -> set:
    """Mutual kNN pairs as a set of ``(i, j)`` tuples with ``i < j``."""
    mask = mutual_knn_mask(distances, k)
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(mask, 1)))}


def local_scales(
    distances: np.ndarray,
    neighbors: np.ndarray,
    sigma_rank: int,
    epsilon_sigma: float = 1e-8,
) -> np.ndarray:
    """Per-sample kernel bandwidths.

    ``sigma_i`` is the (unsquared) distance from sample ``i`` to its
    ``sigma_rank``-th nearest neighbour. When a clamped neighbourhood is shorter
    than ``sigma_rank`` the farthest available neighbour is used instead.
    Samples with no neighbours, or whose scale falls below ``epsilon_sigma``,
    get ``epsilon_sigma``.
    """
    n = distances.shape[0]
    if neighbors.shape[1] == 0:
        return np.full(n, float(epsilon_sigma))
    rank = min(sigma_rank, neighbors.shape[1])
    ref = neighbors[:, rank - 1]
    sigma = np.sqrt(distances[np.arange(n), ref])
    return np.where(sigma < epsilon_sigma, float(epsilon_sigma), sigma)


def affinity(distances: np.ndarray, scales: np.ndarray, mutual: np.ndarray) -> np.ndarray:
    """Locally scaled Gaussian kernel on mutual-kNN pairs, zero elsewhere."""
    kernel = np.exp(-distances / np.outer(scales, scales))
    weights = np.where(mutual, kernel, 0.0)
    np.fill_diagonal(weights, 0.0)
    return weights


def apply_direction_mask(weights: np.ndarray, labels, mode: str = "directed") -> np.ndarray:
    """Drop edges that run against the progression direction.

    ``directed`` keeps ``i -> j`` only when ``y_i <= y_j``; ``reversed`` keeps
    it only when ``y_i >= y_j``; ``undirected`` returns the weights unchanged.
    Equal-grade pairs keep both directions in every mode.
    """
    y = as_labels(labels, weights.shape[0])
    if mode == "directed":
        keep = y[:, None] <= y[None, :]
    elif mode == "reversed":
        keep = y[:, None] >= y[None, :]
    elif mode == "undirected":
        return weights.copy()
    else:
        raise InvalidInputError(f"unknown graph mode {mode!r}")
    return np.where(keep, weights, 0.0)


def add_self_loops_and_normalize(masked: np.ndarray) -> np.ndarray:
    """Row-stochastic transition matrix from ``masked + I``."""
    w = masked + np.eye(masked.shape[0])
    return w / w.sum(axis=1, keepdims=True)


def build_graph(features, labels, config: GraphConfig = GraphConfig()) -> DirectedGraph:
    """Run the full construction for one batch."""
    z = as_features(features)
    n = z.shape[0]
    if n > MAX_BATCH:
        raise InvalidInputError(f"batch of {n} exceeds the {MAX_BATCH}-sample cap")
    y = as_labels(labels, n)
    dist = pairwise_sq_distances(z)
    neighbors = knn_lists(dist, config.k)
    mutual = mutual_knn_mask(dist, config.k, neighbors)
    scales = local_scales(dist, neighbors, config.sigma_rank, config.epsilon_sigma)
    w_tilde = affinity(dist, scales, mutual)
    w = apply_direction_mask(w_tilde, y, config.mode)
    return DirectedGraph(w_tilde, w, add_self_loops_and_normalize(w))


def transition_matrix(features, labels, config: GraphConfig = GraphConfig()) -> np.ndarray:
    return build_graph(features, labels, config).transition
