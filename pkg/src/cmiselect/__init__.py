"""Markov blanket feature selection via learned low-dimensional feature
maps and k-NN conditional mutual information estimation."""

__version__ = "0.1.0"

from .ci_test import CiConfig, CiTestResult, ci_test, local_permutation
from .data import Dataset
from .harness import ExperimentSpec, RocTable, ingest_timeseries, roc_sweep, run_experiment
from .knn_estimators import KnnConfig, digamma, fp_cmi, knn_distances, ksg_mi
from .mapper import (MappingModel, TrainConfig, jeffreys, log_likelihood,
                     sample_mask, surrogate_forward, train)
from .markov_blanket import MbConfig, MbResult, find_markov_blanket, relation_suite
from .nn_core import Adam, DenseNet, GradientTape, adam_step, backward, forward
from .synthetic import (BullseyeConfig, DagSpec, d_separated, default_dag,
                        gen_bullseye_2d, gen_bullseye_dag, mi_oracle_bullseye)

__all__ = [
    "Adam", "BullseyeConfig", "CiConfig", "CiTestResult", "DagSpec",
    "Dataset", "DenseNet", "ExperimentSpec", "GradientTape", "KnnConfig",
    "MappingModel", "MbConfig", "MbResult", "RocTable", "TrainConfig",
    "adam_step", "backward", "ci_test", "d_separated", "default_dag",
    "digamma", "find_markov_blanket", "forward", "fp_cmi", "gen_bullseye_2d",
    "gen_bullseye_dag", "ingest_timeseries", "jeffreys", "knn_distances",
    "ksg_mi", "local_permutation", "log_likelihood", "mi_oracle_bullseye",
    "relation_suite", "roc_sweep", "run_experiment", "sample_mask",
    "surrogate_forward", "train",
]
