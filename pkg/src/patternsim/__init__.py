"""Seedable simulation of categorical consumption patterns.

Extends a short initial pattern with a Markov chain (optionally injecting
never-seen classes), samples concrete images per event from embedding
clusters, and scores the result with Hamming-cost DTW and KL divergence.
"""

from .clustering import ClusterAssignment, EmbeddingSet, NeighborGraph, build_knn_graph, cluster_class, pic_cluster
from .harness import ExperimentSpec, MetricReport, generate_initial_patterns, run_experiment
from .markov import (
    SimulationTrace,
    build_transition,
    init_decision,
    simulate,
    simulate_random_baseline,
    step_modified,
    step_original,
)
from .metrics import DtwResult, EmpiricalDistribution, dtw_distance, empirical_distribution, hamming, kl_divergence
from .novelty import NoveltyModel, NoveltyState, expand, new_class_probability, trigger_new_class
from .patterns import (
    RNG_ALGORITHM,
    RNG_VERSION,
    ClassAlphabet,
    ConsumptionPattern,
    InputError,
    Method,
    Origin,
    SimulationConfig,
    make_rng,
    parse_pattern,
)
from .sampler import DatasetManifest, PreferenceProfile, SampledTimeline, fit_preference, sample_images

__version__ = "0.1.0"

__all__ = [
    "ClassAlphabet", "ClusterAssignment", "ConsumptionPattern", "DatasetManifest", "DtwResult",
    "EmbeddingSet", "EmpiricalDistribution", "ExperimentSpec", "InputError", "Method", "MetricReport",
    "NeighborGraph", "NoveltyModel", "NoveltyState", "Origin", "PreferenceProfile", "RNG_ALGORITHM",
    "RNG_VERSION", "SampledTimeline", "SimulationConfig", "SimulationTrace", "build_knn_graph",
    "build_transition", "cluster_class", "dtw_distance", "empirical_distribution", "expand",
    "fit_preference", "generate_initial_patterns", "hamming", "init_decision", "kl_divergence",
    "make_rng", "new_class_probability", "parse_pattern", "pic_cluster", "run_experiment",
    "sample_images", "simulate", "simulate_random_baseline", "step_modified", "step_original",
    "trigger_new_class",
]
