"""Cascade prediction by learning local spreading behaviour and replaying it shell by shell."""

from .cascade import Cascade, CascadeState, Message, UserProfile, ValidationError, observe_before
from .data import SocialData, load_dataset, save_dataset
from .features import FEATURE_NAMES, MECHANISM_NAMES, FeatureExtractor, extract
from .graph import SocialGraph, load_graph
from .pipeline import LearnConfig, TrainedModel, learn
from .propagation import SimConfig, ThresholdRule, run

__version__ = "0.1.0"

__all__ = [
    "Cascade", "CascadeState", "Message", "UserProfile", "ValidationError", "observe_before",
    "SocialData", "load_dataset", "save_dataset",
    "FEATURE_NAMES", "MECHANISM_NAMES", "FeatureExtractor", "extract",
    "SocialGraph", "load_graph",
    "LearnConfig", "TrainedModel", "learn",
    "SimConfig", "ThresholdRule", "run",
]
