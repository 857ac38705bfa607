"""
Service layer for the job ledger.

This module provides the JobService class with methods for recording job
starts, completions and failures, and for deciding whether a job's artifact is
already present and intact so that the job can be skipped.
"""

import logging
from pathlib import Path
from typing import List, Optional

from sqlalchemy.orm import Session

from models import JobRecord, JobStatus
from utils.hashing import sha256_file

logger = logging.getLogger(__name__)


class JobService:
    @staticmethod
    def get_job(db: Session, job_id: str) -> Optional[JobRecord]:
        """
        Retrieve a ledger row by job id.

        Returns:
            JobRecord: The row if found, else None.
        """
        return db.query(JobRecord).filter(JobRecord.job_id == job_id).first()

    @staticmethod
    def list_jobs(db: Session, kind: Optional[str] = None, tag: Optional[str] = None) -> List[JobRecord]:
        query = db.query(JobRecord)
        if kind is not None:
            query = query.filter(JobRecord.kind == kind)
        if tag is not None:
            query = query.filter(JobRecord.tag == tag)
        return query.order_by(JobRecord.job_id).all()

    @staticmethod
    def is_complete(db: Session, job_id: str) -> bool:
        """
        A job is complete when its row is done and its artifact still hashes to the recorded value.

        Args:
            db (Session): Ledger session.
            job_id (str): Job identifier.

        Returns:
            bool: True if the job can be skipped.
        """
        job = JobService.get_job(db, job_id)
        if job is None or job.status != JobStatus.DONE or not job.artifact_path:
            return False
        path = Path(job.artifact_path)
        if not path.is_file():
            logger.info("Artifact of job %s is missing; it will be rerun", job_id)
            return False
        if sha256_file(path) != job.artifact_sha256:
            logger.info("Artifact of job %s changed on disk; it will be rerun", job_id)
            return False
        return True

    @staticmethod
    def _upsert(db: Session, job_id: str, **fields) -> JobRecord:
        job = JobService.get_job(db, job_id)
        if job is None:
            job = JobRecord(job_id=job_id, **fields)
            db.add(job)
        else:
            for name, value in fields.items():
                setattr(job, name, value)
        db.commit()
        db.refresh(job)
        return job

    @staticmethod
    def mark_running(db: Session, job_id: str, kind: str, tag: Optional[str], seed: int) -> JobRecord:
        return JobService._upsert(db, job_id, kind=kind, tag=tag, seed=str(seed), status=JobStatus.RUNNING,
                                  error=None)

    @staticmethod
    def mark_done(db: Session, job_id: str, artifact_path, artifact_sha256: str, duration_s: float,
                  query_count: Optional[int] = None, train_accuracy: Optional[float] = None,
                  heldout_accuracy: Optional[float] = None) -> JobRecord:
        """
        Record a finished job and the hash of its artifact.
        """
        return JobService._upsert(db, job_id, status=JobStatus.DONE, artifact_path=str(artifact_path),
                                  artifact_sha256=artifact_sha256, duration_s=duration_s, query_count=query_count,
                                  train_accuracy=train_accuracy, heldout_accuracy=heldout_accuracy, error=None)

    @staticmethod
    def mark_failed(db: Session, job_id: str, error: str) -> JobRecord:
        logger.error("Job %s failed: %s", job_id, error)
        return JobService._upsert(db, job_id, status=JobStatus.FAILED, error=error)

    @staticmethod
    def total_duration(db: Session, kind: str, tag: Optional[str] = None) -> float:
        """
        Sum of the recorded durations of all finished jobs of a kind (and tag).
        """
        return float(sum(job.duration_s or 0.0 for job in JobService.list_jobs(db, kind, tag)
                         if job.status == JobStatus.DONE))
