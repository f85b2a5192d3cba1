"""First-order Markov chain simulation of consumption patterns.

Two update rules are provided. ``original`` multiplies the decision array by
the transition matrix and takes the argmax (first index on ties), which
quickly locks onto a single class. ``modified`` breaks exact ties at random
and reseeds the decision array whenever a class would appear three times in a
row.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .novelty import NoveltyModel, expand, sparsity, trigger_new_class
from .patterns import (
    ClassAlphabet,
    ConsumptionPattern,
    InputError,
    Method,
    Origin,
    SimulationConfig,
    make_rng,
)

NORMAL = "normal"
TIE_RESET = "tie_reset"
REPETITION_RESET = "repetition_reset"
NEW_CLASS = "new_class"

TIE_RTOL = 1e-12


@dataclass
class ExpansionRecord:
    t: int
    pre_sparsity: float
    new_column_sparsity: float


@dataclass
class SimulationTrace:
    pattern: ConsumptionPattern
    initial_length: int
    decisions: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    expansions: list = field(default_factory=list)
    matrix: Optional[np.ndarray] = None

    @property
    def suffix(self) -> ConsumptionPattern:
        """Generated events only, over the full (possibly grown) alphabet."""
        return ConsumptionPattern(self.pattern.events[self.initial_length:],
                                  self.pattern.alphabet, Origin.SIMULATED)

    def records(self):
        alphabet = self.pattern.alphabet
        for k, tag in enumerate(self.tags):
            t = self.initial_length + k
            yield {"t": t, "class_name": alphabet.name(self.pattern.events[t]), "tag": tag}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())


def build_transition(initial: ConsumptionPattern, alphabet_size: int) -> np.ndarray:
    """Row-normalised transition counts, with all-zero rows repaired.

    A class that is never followed by anything (e.g. only seen as the last
    event) gets the element-wise mean of the non-zero rows.
    """
    events = initial.events
    if len(events) < 2:
        raise InputError("insufficient transitions")
    if alphabet_size < max(events) + 1:
        raise InputError("alphabet_size smaller than classes in the pattern")
    counts = np.zeros((alphabet_size, alphabet_size))
    np.add.at(counts, (events[:-1], events[1:]), 1.0)

    totals = counts.sum(axis=1)
    filled = totals > 0
    if not filled.any():
        raise RuntimeError("transition matrix has no non-zero rows")
    matrix = np.zeros_like(counts)
    matrix[filled] = counts[filled] / totals[filled, None]
    if not filled.all():
        fill = matrix[filled].mean(axis=0)
        matrix[~filled] = fill / fill.sum()
    return matrix


def init_decision(initial: ConsumptionPattern, alphabet_size: int) -> np.ndarray:
    if len(initial) == 0:
        raise InputError("empty pattern")
    decision = np.zeros(alphabet_size)
    decision[initial.events[-1]] = 1.0
    return decision


def _propagate(decision, matrix) -> np.ndarray:
    decision = np.asarray(decision, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or decision.shape != (matrix.shape[0],):
        raise ValueError(f"dimension mismatch: decision {decision.shape}, matrix {matrix.shape}")
    return decision @ matrix


def _one_hot(n: int, k: int) -> np.ndarray:
    out = np.zeros(n)
    out[k] = 1.0
    return out


def tied_maxima(candidate: np.ndarray) -> np.ndarray:
    top = candidate.max()
    return np.flatnonzero(np.abs(candidate - top) <= TIE_RTOL * max(1.0, abs(top)))


def step_original(decision, matrix):
    """One plain Markov step; ties (within ``TIE_RTOL``) go to the lowest index.

    The tolerance matters once the decision converges to a stationary
    distribution with equal entries: without it, rounding noise decides.
    """
    candidate = _propagate(decision, matrix)
    return candidate, int(tied_maxima(candidate)[0])


def step_modified(decision, matrix, last_two, rng: np.random.Generator, candidate=None,
                  reset_weights=None):
    """One modified step. Returns ``(decision, choice, tag)``.

    ``last_two`` holds the two most recent events (``None`` when absent). A
    choice that would make a third identical event in a row is replaced by a
    different class drawn with probability proportional to ``reset_weights``
    (uniform when omitted or all zero), so runs never exceed two.
    """
    if candidate is None:
        candidate = _propagate(decision, matrix)
    n = candidate.shape[0]

    tied = tied_maxima(candidate)
    if len(tied) > 1:
        choice = int(tied[rng.integers(len(tied))])
        new_decision, tag = _one_hot(n, choice), TIE_RESET
    else:
        choice = int(tied[0])
        new_decision, tag = candidate, NORMAL

    prev, last = last_two
    if prev is not None and prev == last == choice and n > 1:
        choice = _reset_class(n, last, reset_weights, rng)
        new_decision, tag = _one_hot(n, choice), REPETITION_RESET
    return new_decision, choice, tag


def _reset_class(n: int, exclude: int, weights, rng) -> int:
    w = np.zeros(n)
    if weights is not None:
        k = min(n, len(weights))
        w[:k] = weights[:k]
    w[exclude] = 0.0
    if w.sum() <= 0:
        w = np.ones(n)
        w[exclude] = 0.0
    return int(rng.choice(n, p=w / w.sum()))


def simulate_random_baseline(n_classes: int, length: int, rng: np.random.Generator,
                             alphabet: Optional[ClassAlphabet] = None) -> ConsumptionPattern:
    """Independent uniform draws over the first ``n_classes`` classes."""
    if n_classes < 1 or length < 1:
        raise InputError("random baseline needs n_classes >= 1 and length >= 1")
    if alphabet is None:
        alphabet = ClassAlphabet(tuple(f"class_{k}" for k in range(n_classes)))
    elif alphabet.size < n_classes:
        raise InputError("alphabet smaller than n_classes")
    events = rng.integers(n_classes, size=length)
    return ConsumptionPattern(tuple(events.tolist()), alphabet, Origin.BASELINE)


Observer = Callable[[int, np.ndarray, np.ndarray, str], None]


def simulate(initial: ConsumptionPattern, config: SimulationConfig,
             novelty: Optional[NoveltyModel] = None,
             rng: Optional[np.random.Generator] = None,
             observer: Optional[Observer] = None) -> SimulationTrace:
    """Extend ``initial`` by ``config.target_generated_length`` events.

    The chain runs over the full alphabet of ``initial``. When a novelty model
    is given (or ``config.allow_new_classes`` is set) a new class is added
    whenever its probability beats every entry of the candidate decision
    array. Repetition resets of the modified rule jump to a class drawn from
    the initial pattern's class frequencies, or uniformly when
    ``config.reset_weighting == "uniform"``. ``observer(t, matrix, decision,
    tag)`` is called after every step.
    """
    if len(initial) < 2:
        raise InputError("insufficient transitions")
    rng = rng if rng is not None else make_rng(config.seed)
    if novelty is None and config.allow_new_classes:
        novelty = NoveltyModel()
    method = config.method
    alphabet = initial.alphabet
    events = list(initial.events)
    trace = SimulationTrace(pattern=initial, initial_length=len(initial))

    if method is Method.RANDOM_BASELINE:
        drawn = simulate_random_baseline(alphabet.size, config.target_generated_length, rng, alphabet)
        events.extend(drawn.events)
        trace.tags = [NORMAL] * len(drawn)
        trace.pattern = ConsumptionPattern(tuple(events), alphabet, Origin.SIMULATED)
        return trace

    n = alphabet.size
    matrix = build_transition(initial, n)
    reset_weights = None
    if config.reset_weighting == "initial":
        reset_weights = np.bincount(initial.events, minlength=n).astype(float)
    decision = init_decision(initial, n)
    if novelty is not None:
        novelty.start(n, len(initial) - 1)

    for t in range(len(initial), len(initial) + config.target_generated_length):
        candidate = _propagate(decision, matrix)
        if novelty is not None and trigger_new_class(novelty.probability(t), candidate):
            pre = sparsity(matrix)
            matrix, decision = expand(matrix, decision, rng)
            alphabet = alphabet.extended(novelty.next_name(alphabet.names))
            novelty.state.record_addition(t)
            trace.expansions.append(ExpansionRecord(t, pre, sparsity(matrix[:, -1])))
            choice, tag = alphabet.size - 1, NEW_CLASS
        elif method is Method.ORIGINAL:
            decision, choice = candidate, int(tied_maxima(candidate)[0])
            tag = NORMAL
        else:
            last_two = (events[-2] if len(events) > 1 else None, events[-1])
            decision, choice, tag = step_modified(decision, matrix, last_two, rng, candidate, reset_weights)
        events.append(choice)
        trace.decisions.append(np.array(decision, copy=True))
        trace.tags.append(tag)
        if observer is not None:
            observer(t, matrix, decision, tag)

    trace.pattern = ConsumptionPattern(tuple(events), alphabet, Origin.SIMULATED)
    trace.matrix = matrix
    return trace


def matrix_to_csv(matrix: np.ndarray, alphabet: ClassAlphabet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(alphabet.names)
    for row in matrix:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
