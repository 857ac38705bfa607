"""
SQLAlchemy models for the job ledger.

This module defines the JobRecord model storing one row per zoo or scoring job,
including the content hash of the artifact the job produced.
"""

from sqlalchemy import Column, Integer, String, Float, DateTime, Enum as SAEnum
from sqlalchemy.sql import func

from utils.database import Base
from .provenance import JobStatus


class JobRecord(Base):
    """
    SQLAlchemy model for a ledger entry.
    """
    __tablename__ = "jobs"

    job_id = Column(String, primary_key=True)
    kind = Column(String, nullable=False)
    tag = Column(String, nullable=True)
    seed = Column(String, nullable=False)
    status = Column(SAEnum(JobStatus), nullable=False, default=JobStatus.RUNNING)
    artifact_path = Column(String, nullable=True)
    artifact_sha256 = Column(String, nullable=True)
    duration_s = Column(Float, nullable=True)
    query_count = Column(Integer, nullable=True)
    train_accuracy = Column(Float, nullable=True)
    heldout_accuracy = Column(Float, nullable=True)
    error = Column(String, nullable=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    updated_at = Column(DateTime(timezone=True), onupdate=func.now())
