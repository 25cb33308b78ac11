"""Human-compatible representations on synthetic insect data.

Train encoders whose embedding space both classifies well and agrees with a
simulated human's similarity judgments, then measure how useful the retrieved
examples are as decision support.
"""
from .evaluate import EvalReport, SyntheticAgent, evaluate_model
from .experiments import Experiment, ExperimentConfig
from .model import ModelConfig, ReprModel, init_model
from .oracle import TABLE1_WEIGHTS, SimilarityOracle, task_alignment
from .synth_data import Linear, Square, generate_dataset
from .train import TrainConfig, train
from .triplets import TripletSet, filter_inconsistent, sample_and_label

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "Experiment",
    "ExperimentConfig",
    "Linear",
    "ModelConfig",
    "ReprModel",
    "SimilarityOracle",
    "Square",
    "SyntheticAgent",
    "TABLE1_WEIGHTS",
    "TrainConfig",
    "TripletSet",
    "evaluate_model",
    "filter_inconsistent",
    "generate_dataset",
    "init_model",
    "sample_and_label",
    "task_alignment",
    "train",
]
