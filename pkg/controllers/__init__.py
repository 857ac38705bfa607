"""
This package contains the controller layer for experiment orchestration.
"""

from .experiment_controller import ExperimentController, Job, load_manifest

__all__ = ["ExperimentController", "Job", "load_manifest"]
