"""Injection of never-seen classes into a running simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass
class NoveltyState:
    """Counters feeding the new-class probability.

    ``c_total`` counts every class currently in the pattern's alphabet and
    grows with each addition; ``x_last`` starts at the last index of the
    initial pattern.
    """

    c_new: int
    c_total: int
    x_last: int

    def __post_init__(self):
        if self.c_new < 0 or self.c_total < 0 or self.c_new > self.c_total:
            raise ValueError("need 0 <= c_new <= c_total")

    def record_addition(self, t: int) -> None:
        self.c_new += 1
        self.c_total += 1
        self.x_last = t


def new_class_probability(state: NoveltyState, t: int) -> float:
    """Probability that step ``t`` consumes a brand-new class.

    ``1/(c_new+1) * (1/(c_total+1)) ** (1/(t - x_last + 1))``: grows toward
    ``1/(c_new+1)`` the longer no new class has appeared.
    """
    gap = t - state.x_last
    if gap < 0:
        raise ValueError(f"time index {t} precedes last addition at {state.x_last}")
    return (1.0 / (state.c_new + 1)) * (1.0 / (state.c_total + 1)) ** (1.0 / (gap + 1))


def trigger_new_class(p_new: float, candidate_decision: np.ndarray) -> bool:
    return bool(p_new > np.max(candidate_decision))


def sparsity(matrix: np.ndarray) -> float:
    """Fraction of exactly-zero entries."""
    return float(np.count_nonzero(matrix == 0) / matrix.size)


def _sparse_uniform(n: int, zero_prob: float, rng: np.random.Generator) -> np.ndarray:
    values = 1.0 - rng.random(n)  # uniform on (0, 1]
    values[rng.random(n) < zero_prob] = 0.0
    return values


def expand(matrix: np.ndarray, decision: np.ndarray, rng: np.random.Generator):
    """Grow the chain by one class.

    The new column and new row are uniform (0, 1] draws, each entry zeroed with
    probability equal to the current sparsity of ``matrix``; all rows are then
    renormalised. The returned decision is one-hot on the new class.
    """
    n = matrix.shape[0]
    if matrix.shape != (n, n) or decision.shape != (n,):
        raise ValueError("matrix must be square and match the decision length")
    zero_prob = sparsity(matrix)

    grown = np.zeros((n + 1, n + 1))
    grown[:n, :n] = matrix
    grown[:n, n] = _sparse_uniform(n, zero_prob, rng)
    new_row = _sparse_uniform(n + 1, zero_prob, rng)
    while not new_row.any():
        new_row = _sparse_uniform(n + 1, zero_prob, rng)
    grown[n] = new_row
    grown /= grown.sum(axis=1, keepdims=True)

    new_decision = np.zeros(n + 1)
    new_decision[n] = 1.0
    return grown, new_decision


@dataclass
class NoveltyModel:
    """New-class trigger state plus the names handed out to added classes.

    Names come from ``name_pool`` in order (e.g. held-out dataset classes);
    once that runs dry, ``new_class_<k>`` names are synthesised.
    """

    name_pool: Sequence[str] = ()
    state: Optional[NoveltyState] = None
    _used: int = field(default=0, repr=False)

    def start(self, n_classes: int, last_initial_index: int) -> None:
        self.state = NoveltyState(c_new=0, c_total=n_classes, x_last=last_initial_index)
        self._used = 0

    def probability(self, t: int) -> float:
        return new_class_probability(self.state, t)

    def next_name(self, taken) -> str:
        while self._used < len(self.name_pool):
            name = self.name_pool[self._used]
            self._used += 1
            if name not in taken:
                return name
        k = self.state.c_new + 1 if self.state else 1
        name = f"new_class_{k}"
        while name in taken:
            k += 1
            name = f"new_class_{k}"
        return name
