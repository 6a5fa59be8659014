"""Multi-scale random-walk powers of a transition matrix."""
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .errors import InvalidInputError

DEFAULT_STEPS = (1, 2, 3)


@dataclass(frozen=True)
class DiffusionStep:
    t: int
    matrix: np.ndarray

    @property
    def weight(self) -> float:
        return 1.0 / self.t


@dataclass(frozen=True)
class DiffusionStack:
    """``P^t`` for each requested ``t`` in ascending order, weighted by ``1/t``."""

    steps: List[DiffusionStep]

    @property
    def n(self) -> int:
        return self.steps[0].matrix.shape[0]

    @property
    def ts(self) -> List[int]:
        return [s.t for s in self.steps]

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)


def normalize_steps(steps: Iterable[int]) -> tuple:
    ts = sorted(set(int(t) for t in steps))
    if not ts:
        raise InvalidInputError("at least one diffusion step is required")
    if ts[0] < 1:
        raise InvalidInputError(f"diffusion steps must be positive, got {ts}")
    return tuple(ts)


def diffuse(P: np.ndarray, steps: Iterable[int] = DEFAULT_STEPS) -> DiffusionStack:
    """Powers of ``P`` by repeated multiplication.

    Each product reuses the previous power and is clipped to [0, 1] to absorb
    rounding noise.
    """
    ts = normalize_steps(steps)
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidInputError(f"transition matrix must be square, got {P.shape}")
    out = []
    power, current = 1, P
    for t in ts:
        while power < t:
            current = np.clip(current @ P, 0.0, 1.0)
            power += 1
        out.append(DiffusionStep(t, current))
    return DiffusionStack(out)
