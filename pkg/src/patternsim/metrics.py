"""Similarity between an initial pattern and a simulated one."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .patterns import ConsumptionPattern, InputError

KL_EPSILON = 1e-6


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: Optional[list] = None


@dataclass(frozen=True)
class EmpiricalDistribution:
    probs: np.ndarray
    support: tuple

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (len(self.support),):
            raise InputError("probabilities do not match support")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "support", tuple(self.support))


def hamming(a, b) -> int:
    return 0 if a == b else 1


def _events(x) -> Sequence:
    return x.events if isinstance(x, ConsumptionPattern) else list(x)


def dtw_distance(a, b, with_path: bool = False) -> DtwResult:
    """Plain symmetric DTW with 0/1 mismatch cost.

    Accepts patterns or raw sequences of comparable labels. Both patterns are
    compared by class *name* when they are patterns with different alphabets.
    """
    if isinstance(a, ConsumptionPattern) and isinstance(b, ConsumptionPattern) \
            and a.alphabet != b.alphabet:
        x, y = a.names, b.names
    else:
        x, y = _events(a), _events(b)
    m, n = len(x), len(y)
    if m == 0 or n == 0:
        raise InputError("empty sequence")

    inf = float("inf")
    D = [[inf] * n for _ in range(m)]
    for i in range(m):
        xi = x[i]
        row, prev = D[i], D[i - 1] if i else None
        for j in range(n):
            cost = 0 if xi == y[j] else 1
            if i == 0 and j == 0:
                best = 0
            elif i == 0:
                best = row[j - 1]
            elif j == 0:
                best = prev[j]
            else:
                best = min(prev[j - 1], row[j - 1], prev[j])
            row[j] = cost + best

    path = _backtrack(D) if with_path else None
    return DtwResult(float(D[m - 1][n - 1]), path)


def _backtrack(D) -> list:
    i, j = len(D) - 1, len(D[0]) - 1
    path = [(i, j)]
    while i or j:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            i, j = min(((i - 1, j - 1), (i, j - 1), (i - 1, j)), key=lambda p: D[p[0]][p[1]])
        path.append((i, j))
    return path[::-1]


def empirical_distribution(pattern, support: Sequence) -> EmpiricalDistribution:
    """Relative frequency of each support entry in ``pattern``.

    ``support`` lists class names when ``pattern`` is a ConsumptionPattern,
    otherwise raw labels.
    """
    if len(support) == 0:
        raise InputError("empty support")
    labels = pattern.names if isinstance(pattern, ConsumptionPattern) else list(pattern)
    if not labels:
        raise InputError("empty sequence")
    index = {s: k for k, s in enumerate(support)}
    counts = np.zeros(len(support))
    for label in labels:
        if label not in index:
            raise InputError(f"class {label!r} not in support")
        counts[index[label]] += 1
    return EmpiricalDistribution(counts / len(labels), tuple(support))


def kl_divergence(p: EmpiricalDistribution, q: EmpiricalDistribution,
                  epsilon: float = KL_EPSILON) -> float:
    """KL(p || q) in nats, after adding ``epsilon`` to every entry of both."""
    if p.support != q.support:
        raise InputError("distributions have different supports")
    ps = p.probs + epsilon
    qs = q.probs + epsilon
    ps /= ps.sum()
    qs /= qs.sum()
    return float(np.sum(ps * np.log(ps / qs)))


def union_support(*patterns: ConsumptionPattern) -> list:
    """Class names appearing in any of ``patterns``, first-appearance order."""
    seen: dict = {}
    for pattern in patterns:
        for name in pattern.names:
            seen.setdefault(name, None)
    return list(seen)


def evaluate(initial: ConsumptionPattern, simulated: ConsumptionPattern) -> dict:
    """DTW(initial, simulated) and KL(simulated || initial) over the union support."""
    support = union_support(initial, simulated)
    kl = kl_divergence(empirical_distribution(simulated, support),
                       empirical_distribution(initial, support))
    return {"dtw": dtw_distance(initial, simulated).distance, "kl": kl}
