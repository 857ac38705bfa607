"""
This package contains the pydantic schema definitions for the laboratory.
Schemas cover tasks and datasets, models and training configurations, fingerprints,
score reports and the experiment manifest.
"""

from .data import TaskSpec, Dataset
from .fingerprint import CutMixRecord, OutputSet, CorrelationMatrix, FingerprintRecord, Kernel, LabelMode
from .manifest import (
    ExperimentManifest, DataConfig, ZooConfig, AttackConfigs, SacmConfig, BaselineConfig,
    FingerprintConfig, SweepConfig, FingerprintMode,
)
from .model import ModelSpec, ModelParams, TrainConfig, AdvConfig, ARCHITECTURES
from .report import (
    ScoreEntry, AucCell, ScoreReport, AucSummary, PruningPoint, PruningCurve,
    SampleCountPoint, SampleCountCurve,
)

__all__ = [
    "TaskSpec", "Dataset", "CutMixRecord", "OutputSet", "CorrelationMatrix", "FingerprintRecord",
    "Kernel", "LabelMode", "ExperimentManifest", "DataConfig", "ZooConfig", "AttackConfigs",
    "SacmConfig", "BaselineConfig", "FingerprintConfig", "SweepConfig", "FingerprintMode",
    "ModelSpec", "ModelParams", "TrainConfig", "AdvConfig", "ARCHITECTURES",
    "ScoreEntry", "AucCell", "ScoreReport", "AucSummary", "PruningPoint", "PruningCurve",
    "SampleCountPoint", "SampleCountCurve",
]
