"""Bayesian averaging over decision trees sampled by reversible-jump MCMC."""

from .core import (
    BDTError,
    ConfigError,
    Dataset,
    DecisionTree,
    Hyperparameters,
    InputError,
    Leaf,
    Split,
    SplitRule,
    StateError,
    StructureError,
    ThresholdSpace,
    build,
    partition,
    predict_tree,
    refit,
)
from .data import SynthConfig, generate_synthetic_stca, load_csv, make_folds, write_csv
from .ensemble import Ensemble, classify_with_envelope, feature_importance, predict_ensemble, vote_confidence
from .likelihood import PriorConfig, count_tree_shapes, log_marginal_likelihood, log_tree_prior
from .model import load_model, save_model
from .sampler import ChainDiagnostics, ChainState, MoveKind, TreeSampler, run_chain, sweep
from .selection import SelectionReport, select_map, select_mapw, select_sc

__all__ = [
    "BDTError", "ConfigError", "Dataset", "DecisionTree", "Hyperparameters", "InputError", "Leaf",
    "Split", "SplitRule", "StateError", "StructureError", "ThresholdSpace", "build", "partition",
    "predict_tree", "refit", "SynthConfig", "generate_synthetic_stca", "load_csv", "make_folds",
    "write_csv", "Ensemble", "classify_with_envelope", "feature_importance", "predict_ensemble",
    "vote_confidence", "PriorConfig", "count_tree_shapes", "log_marginal_likelihood", "log_tree_prior",
    "load_model", "save_model", "ChainDiagnostics", "ChainState", "MoveKind", "TreeSampler",
    "run_chain", "sweep", "SelectionReport", "select_map", "select_mapw", "select_sc",
]
