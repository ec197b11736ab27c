"""Condition monitoring of wind turbine blade load sensors.

Residual generators (dynamic PCA per operating region, a convolutional LSTM
autoencoder), static and GLR detectors, a synthetic turbine simulator with
sensor fault injection, and the offline/online/campaign pipeline tying them
together.
"""
from .data import AE_SUBSET, FULL, ChannelSet, NormalizerState, RegionBoundaries, RegionLabel, SignalMatrix
from .errors import BladeCMError, DataError, NumericalError, UsageError
from .monitor import ModelSet, monitor_run
from .pipeline import PipelineConfig, load_config, run_campaign, train_offline
from .sim import FaultKind, FaultSpec, SimConfig, generate_healthy, inject_fault

__version__ = "0.1.0"

__all__ = [
    "AE_SUBSET", "FULL", "ChannelSet", "NormalizerState", "RegionBoundaries", "RegionLabel", "SignalMatrix",
    "BladeCMError", "DataError", "NumericalError", "UsageError", "ModelSet", "monitor_run",
    "PipelineConfig", "load_config", "run_campaign", "train_offline",
    "FaultKind", "FaultSpec", "SimConfig", "generate_healthy", "inject_fault",
]
