"""Experiment grid: initial patterns x methods x novelty, summarised as mean/std."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .clustering import cluster_class
from .markov import simulate, simulate_random_baseline
from .metrics import evaluate
from .novelty import NoveltyModel
from .patterns import ConsumptionPattern, InputError, Method, SimulationConfig, check_seed, make_rng
from .sampler import DatasetManifest, fit_preference, sample_images

METRICS = ("kl", "dtw")
NOVELTY_SETTINGS = {"off": (False,), "on": (True,), "both": (False, True)}
REPORT_COLUMNS = ("length", "method", "novelty", "metric", "mean", "std", "n")
TRIAL_COLUMNS = ("length", "trial", "method", "novelty", "seed", "dtw", "kl", "n_classes", "n_new")

# stream keys for make_rng(seed, length, trial, key, novelty)
_STREAM = {Method.ORIGINAL: 0, Method.MODIFIED: 1, Method.RANDOM_BASELINE: 2}
_PATTERN_STREAM = 10
_POOL_STREAM = 11
_SAMPLE_STREAM = 12

MIN_SUBSET, MAX_SUBSET = 3, 10
ZIPF_EXPONENT = 1.0


class TrialError(RuntimeError):
    pass


@dataclass
class ExperimentSpec:
    initial_lengths: list = field(default_factory=lambda: [5, 10, 20, 30, 40, 50])
    trials_per_length: int = 20
    methods: list = field(default_factory=lambda: [m.value for m in Method])
    novelty: str = "both"
    seed: int = 0
    generated_length: int = 100

    def __post_init__(self):
        self.initial_lengths = [int(x) for x in self.initial_lengths]
        if not self.initial_lengths or min(self.initial_lengths) < 2:
            raise InputError("initial_lengths must be non-empty and each >= 2")
        if self.trials_per_length < 1:
            raise InputError("trials_per_length must be >= 1")
        if self.generated_length < 1:
            raise InputError("generated_length must be >= 1")
        try:
            self.methods = [Method(m).value for m in self.methods]
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if not self.methods:
            raise InputError("methods must be non-empty")
        if self.novelty not in NOVELTY_SETTINGS:
            raise InputError(f"novelty must be one of {sorted(NOVELTY_SETTINGS)}")
        self.seed = check_seed(self.seed)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown experiment fields: {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class MetricReport:
    rows: list  # dicts keyed by REPORT_COLUMNS
    trials: list = field(default_factory=list)

    def cell(self, length, method, novelty, metric) -> dict:
        for row in self.rows:
            if (row["length"], row["method"], row["novelty"], row["metric"]) == (length, method, novelty, metric):
                return row
        raise KeyError((length, method, novelty, metric))

    def to_csv(self) -> str:
        return _csv(REPORT_COLUMNS, self.rows)

    def trials_csv(self) -> str:
        return _csv(TRIAL_COLUMNS, self.trials)

    def to_json(self) -> str:
        return json.dumps({"cells": self.rows}, indent=2) + "\n"


def _fmt(value):
    return repr(float(value)) if isinstance(value, (float, np.floating)) else value


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def synthetic_manifest(n_classes: int = 101, images_per_class: int = 1) -> DatasetManifest:
    """Placeholder manifest with ``class_000``.. names when no dataset is given."""
    return DatasetManifest({f"class_{c:03d}": [f"class_{c:03d}_{i}" for i in range(images_per_class)]
                            for c in range(n_classes)})


def draw_initial_pattern(class_names, length: int, rng: np.random.Generator) -> ConsumptionPattern:
    """A length-``length`` pattern with Zipf-skewed preference over a few classes.

    Between 3 and 10 classes are picked; the k-th favourite is weighted
    ``1 / k``. Draws with fewer than two distinct classes are rejected, since a
    single-class pattern has no transitions to learn from.
    """
    n = len(class_names)
    if n < 5:
        raise InputError("manifest needs at least 5 classes")
    size = int(rng.integers(MIN_SUBSET, min(MAX_SUBSET, n) + 1))
    subset = rng.choice(n, size=size, replace=False)
    weights = 1.0 / np.arange(1, size + 1) ** ZIPF_EXPONENT
    weights /= weights.sum()
    while True:
        picks = rng.choice(size, size=length, p=weights)
        if len(set(picks.tolist())) >= 2:
            break
    return ConsumptionPattern.from_names([class_names[subset[p]] for p in picks])


def generate_initial_patterns(manifest: DatasetManifest, spec: ExperimentSpec) -> list:
    """One pattern per (length, trial), each from its own seed-derived stream."""
    names = manifest.class_names
    return [draw_initial_pattern(names, length, make_rng(spec.seed, length, trial, _PATTERN_STREAM))
            for length in spec.initial_lengths for trial in range(spec.trials_per_length)]


def _novelty_pool(manifest, initial, rng) -> list:
    held_out = [c for c in manifest.class_names if c not in initial.alphabet]
    return [held_out[i] for i in rng.permutation(len(held_out))]


def run_trial(spec: ExperimentSpec, manifest: DatasetManifest, initial: ConsumptionPattern,
              length: int, trial: int, novelty: bool) -> dict:
    """Simulate every method for one initial pattern; returns ``{method: (trace_pattern, metrics)}``.

    The modified chain always runs, since the random baseline reuses its alphabet.
    """
    nov = int(novelty)
    pool = _novelty_pool(manifest, initial, make_rng(spec.seed, length, trial, _POOL_STREAM))
    out = {}
    for method in (Method.MODIFIED, Method.ORIGINAL):
        if method is Method.ORIGINAL and method.value not in spec.methods:
            continue
        config = SimulationConfig(spec.generated_length, novelty, method, spec.seed)
        trace = simulate(initial, config, NoveltyModel(pool) if novelty else None,
                         rng=make_rng(spec.seed, length, trial, _STREAM[method], nov))
        out[method] = (trace, evaluate(initial, trace.suffix))
    if Method.RANDOM_BASELINE.value in spec.methods:
        alphabet = out[Method.MODIFIED][0].pattern.alphabet
        rng = make_rng(spec.seed, length, trial, _STREAM[Method.RANDOM_BASELINE], nov)
        baseline = simulate_random_baseline(alphabet.size, spec.generated_length, rng, alphabet)
        out[Method.RANDOM_BASELINE] = (baseline, evaluate(initial, baseline))
    return out


def run_experiment(spec: ExperimentSpec, manifest: Optional[DatasetManifest] = None,
                   embeddings: Optional[Mapping] = None, out_dir=None) -> MetricReport:
    """Run the full grid; writes report.csv, report.json and trials.csv when ``out_dir`` is set.

    With ``embeddings``, every modified-method trace is also turned into an
    image timeline under ``out_dir/timelines``.
    """
    manifest = manifest or synthetic_manifest()
    patterns = generate_initial_patterns(manifest, spec)
    settings = NOVELTY_SETTINGS[spec.novelty]
    values: dict = {}
    trials = []
    timelines = {}
    assignments: dict = {}

    idx = 0
    for length in spec.initial_lengths:
        for trial in range(spec.trials_per_length):
            initial = patterns[idx]
            idx += 1
            for novelty in settings:
                try:
                    results = run_trial(spec, manifest, initial, length, trial, novelty)
                except Exception as exc:
                    raise TrialError(f"trial failed (seed={spec.seed}, length={length}, trial={trial}, "
                                     f"novelty={'on' if novelty else 'off'}): {exc}") from exc
                label = "on" if novelty else "off"
                for method in spec.methods:
                    sim, metrics = results[Method(method)]
                    pattern = sim.suffix if hasattr(sim, "suffix") else sim
                    for metric in METRICS:
                        values.setdefault((length, method, label, metric), []).append(metrics[metric])
                    trials.append({"length": length, "trial": trial, "method": method, "novelty": label,
                                   "seed": spec.seed, "dtw": metrics["dtw"], "kl": metrics["kl"],
                                   "n_classes": len(pattern.distinct()),
                                   "n_new": sum(1 for c in pattern.distinct()
                                                if pattern.alphabet.name(c) not in initial.alphabet)})
                if embeddings is not None:
                    trace = results[Method.MODIFIED][0]
                    timelines[(length, trial, label)] = _timeline(
                        spec, manifest, embeddings, assignments, initial, trace, length, trial, novelty)

    rows = []
    for length in spec.initial_lengths:
        for method in spec.methods:
            for novelty in settings:
                label = "on" if novelty else "off"
                for metric in METRICS:
                    v = np.asarray(values[(length, method, label, metric)])
                    rows.append({"length": length, "method": method, "novelty": label, "metric": metric,
                                 "mean": float(v.mean()), "std": float(v.std()), "n": len(v)})
    report = MetricReport(rows, trials)
    if out_dir is not None:
        write_report(report, out_dir, timelines)
    return report


def _timeline(spec, manifest, embeddings, cache, initial, trace, length, trial, novelty):
    suffix = trace.suffix
    needed = [suffix.alphabet.name(c) for c in suffix.distinct()]
    for name in needed:
        if name not in cache:
            if name not in manifest.classes:
                raise InputError(f"class {name!r} not in manifest")
            cache[name] = cluster_class(name, manifest.classes[name], embeddings)
    rng = make_rng(spec.seed, length, trial, _SAMPLE_STREAM, int(novelty))
    profile = fit_preference(None, cache, rng, classes=needed)
    return sample_images(suffix, manifest, cache, profile, rng, start_t=trace.initial_length)


def write_report(report: MetricReport, out_dir, timelines=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "trials.csv").write_text(report.trials_csv(), encoding="utf-8")
    if timelines:
        tdir = out / "timelines"
        tdir.mkdir(exist_ok=True)
        for (length, trial, label), timeline in timelines.items():
            (tdir / f"len{length}_trial{trial}_{label}.csv").write_text(timeline.to_csv(), encoding="utf-8")


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return asdict(spec)
