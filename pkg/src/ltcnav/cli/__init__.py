"""Experiment harness: dataset collection, training, evaluation, causal analysis, benchmark."""
from ltcnav.cli.config import ARCHITECTURES, ExperimentConfig

__all__ = ["ARCHITECTURES", "ExperimentConfig"]
