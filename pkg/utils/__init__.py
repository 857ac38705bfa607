"""
This package contains various utility modules for the laboratory.
Utilities include the ledger database, logging setup, the exception hierarchy and hashing.
"""

from .database import Base, get_db, get_engine
from .exceptions import (
    SacException, InvalidInputException, ShapeMismatchException, LabelIndexException,
    ConfigurationException, TrainingFailureException, InsufficientSamplesException,
    GenerationException, TransportException, CheckpointFormatException, JobFailedException,
)
from .hashing import sha256_bytes, sha256_file
from .logger import setup_logging

__all__ = [
    "Base", "get_db", "get_engine", "setup_logging", "sha256_bytes", "sha256_file",
    "SacException", "InvalidInputException", "ShapeMismatchException", "LabelIndexException",
    "ConfigurationException", "TrainingFailureException", "InsufficientSamplesException",
    "GenerationException", "TransportException", "CheckpointFormatException", "JobFailedException",
]
