"""
This package contains the SQLAlchemy ledger models and the provenance enumerations.
"""

from .job import JobRecord
from .provenance import Provenance, JobStatus, STOLEN_TAGS, TRANSFER_TAGS, reference_group

__all__ = ["JobRecord", "Provenance", "JobStatus", "STOLEN_TAGS", "TRANSFER_TAGS", "reference_group"]
