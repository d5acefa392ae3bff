"""Compose binary classifiers into multi-class classifiers from a recursive control language."""

from .composer import TrainedMultiModel, export, load_trained, train_tree
from .control_lang import Dialect, load, loads, serialize, validate
from .data import Dataset, read_data, synth_continuum, write_data
from .engine import Classifier, ClassificationResult
from .metrics import compute_metrics

__version__ = "0.1.0"
