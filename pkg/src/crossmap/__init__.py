"""Neighborhood-structure analysis of cross-modal mappings.

Measures how much of the semantic structure of an input space a learned
(or random) mapping carries over, using the mean nearest neighbor overlap.
"""

from .data import (
    PairedDataset,
    VectorSet,
    aggregate_centroids,
    k_fold_split,
    load_paired_tsv,
    load_vector_set,
    pair_by_keys,
    save_paired_tsv,
    save_vector_set,
    similarity,
)
from .errors import ConfigError, CrossmapError, CrossmapRuntimeError, ParseError, TrainingDiverged, ValidationError
from .evaluation import (
    BenchmarkPairs,
    bonferroni_adjust,
    load_benchmark,
    run_untrained_probe,
    score_word_pairs,
    spearman_rho,
    wilcoxon_rank_sum_p,
)
from .harness import run_experiment1, run_experiment2
from .models import InitScheme, MappingModel, forward, gradients, init_model, load_model, save_model
from .neighbors import NeighborIndex, mean_nn_overlap, nn_overlap, top_k_neighbors
from .report import ExperimentReport, parse_csv, render_report
from .synth import SynthSpec, generate_planted_benchmark, generate_synthetic_paired
from .training import TrainConfig, TrainHistory, evaluate_loss, grid_search_cv, rmsprop_update, select_negative, train

__version__ = "0.1.0"

__all__ = [
    "aggregate_centroids",
    "BenchmarkPairs",
    "bonferroni_adjust",
    "ConfigError",
    "CrossmapError",
    "CrossmapRuntimeError",
    "evaluate_loss",
    "ExperimentReport",
    "forward",
    "generate_planted_benchmark",
    "generate_synthetic_paired",
    "gradients",
    "grid_search_cv",
    "init_model",
    "InitScheme",
    "k_fold_split",
    "load_benchmark",
    "load_model",
    "load_paired_tsv",
    "load_vector_set",
    "MappingModel",
    "mean_nn_overlap",
    "NeighborIndex",
    "nn_overlap",
    "pair_by_keys",
    "PairedDataset",
    "parse_csv",
    "ParseError",
    "render_report",
    "rmsprop_update",
    "run_experiment1",
    "run_experiment2",
    "run_untrained_probe",
    "save_model",
    "save_paired_tsv",
    "save_vector_set",
    "score_word_pairs",
    "select_negative",
    "similarity",
    "spearman_rho",
    "SynthSpec",
    "top_k_neighbors",
    "train",
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "ValidationError",
    "VectorSet",
    "wilcoxon_rank_sum_p",
]
