"""
This package contains the service layer modules of the laboratory.
Services include data generation, augmentation, the model zoo, training and
attacks, fingerprinting, evaluation, artifact storage and the job ledger.
"""

from .attack_service import AttackService
from .augment_service import AugmentService
from .data_service import DataService
from .evaluation_service import EvaluationService
from .fingerprint_service import FingerprintService
from .job_service import JobService
from .storage_service import StorageService
from .training_service import TrainingService
from .zoo_service import QueryHandle, ZooService

__all__ = [
    "AttackService", "AugmentService", "DataService", "EvaluationService", "FingerprintService",
    "JobService", "StorageService", "TrainingService", "QueryHandle", "ZooService",
]
