"""Class alphabets, consumption patterns, seeded randomness and run configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

# Bit generator behind every RandomSource. Bump RNG_VERSION if this changes,
# since seeded outputs (and every frozen test value) depend on it.
RNG_ALGORITHM = "PCG64"
RNG_VERSION = 1

MAX_SEED = 2**64 - 1


class InputError(ValueError):
    """Bad user-supplied data. The CLI maps this to exit code 2."""


class Origin(str, enum.Enum):
    INITIAL = "initial"
    SIMULATED = "simulated"
    BASELINE = "baseline"


class Method(str, enum.Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"
    RANDOM_BASELINE = "random_baseline"


@dataclass(frozen=True)
class ClassAlphabet:
    """Ordered, unique class names; a name's position is its class id."""

    names: tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise InputError("duplicate class names in alphabet")
        object.__setattr__(self, "names", names)

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown class {name!r}") from None

    def name(self, class_id: int) -> str:
        return self.names[class_id]

    def extended(self, name: str) -> "ClassAlphabet":
        if name in self.names:
            raise InputError(f"class {name!r} already in alphabet")
        return ClassAlphabet(self.names + (name,))


@dataclass(frozen=True)
class ConsumptionPattern:
    events: tuple[int, ...]
    alphabet: ClassAlphabet
    origin: Origin = Origin.INITIAL

    def __post_init__(self):
        events = tuple(int(e) for e in self.events)
        n = self.alphabet.size
        for e in events:
            if not 0 <= e < n:
                raise InputError(f"class id {e} outside alphabet of size {n}")
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def names(self) -> list[str]:
        return [self.alphabet.names[e] for e in self.events]

    def distinct(self) -> list[int]:
        """Class ids that occur, in first-appearance order."""
        return list(dict.fromkeys(self.events))

    @classmethod
    def from_names(cls, names: Iterable[str], alphabet: Optional[ClassAlphabet] = None,
                   origin: Origin = Origin.INITIAL) -> "ConsumptionPattern":
        alphabet = alphabet or ClassAlphabet()
        known = list(alphabet.names)
        lookup = {name: i for i, name in enumerate(known)}
        events = []
        for name in names:
            if name not in lookup:
                lookup[name] = len(known)
                known.append(name)
            events.append(lookup[name])
        return cls(tuple(events), ClassAlphabet(tuple(known)), origin)


@dataclass(frozen=True)
class SimulationConfig:
    target_generated_length: int = 100
    allow_new_classes: bool = False
    method: Method = Method.MODIFIED
    seed: int = 0
    reset_weighting: str = "initial"  # or "uniform"

    def __post_init__(self):
        if self.target_generated_length < 1:
            raise InputError("target_generated_length must be >= 1")
        if self.reset_weighting not in ("initial", "uniform"):
            raise InputError("reset_weighting must be 'initial' or 'uniform'")
        object.__setattr__(self, "method", Method(self.method))
        check_seed(self.seed)


def parse_pattern(text: str, alphabet: Optional[ClassAlphabet] = None) -> ConsumptionPattern:
    """Parse one-name-per-line or comma-separated text into a pattern.

    Lines starting with ``#`` are comments. Names unknown to ``alphabet`` are
    appended to it in order of first appearance.
    """
    tokens: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        for token in stripped.split(","):
            token = token.strip()
            if not token:
                raise InputError("empty class name in pattern")
            tokens.append(token)
    if not tokens:
        raise InputError("empty pattern")
    return ConsumptionPattern.from_names(tokens, alphabet)


def format_pattern(pattern: ConsumptionPattern) -> str:
    return "".join(name + "\n" for name in pattern.names)


def read_pattern(path, alphabet: Optional[ClassAlphabet] = None) -> ConsumptionPattern:
    with open(path, encoding="utf-8") as fh:
        return parse_pattern(fh.read(), alphabet)


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) <= MAX_SEED:
        raise InputError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """RandomSource for ``seed``, optionally split by integer ``keys``.

    Streams for different key tuples are independent (numpy SeedSequence), so
    a worker's stream is ``make_rng(seed, worker_index)`` regardless of
    scheduling order.
    """
    entropy = [check_seed(seed), *(int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

