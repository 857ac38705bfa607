"""
Tests for the job ledger.
"""

import pytest

from models import JobStatus
from services import JobService, StorageService
from utils.database import get_db


@pytest.fixture
def ledger(tmp_path):
    with get_db(f"sqlite:///{tmp_path / 'ledger.sqlite3'}") as db:
        yield db


def test_finished_job_with_intact_artifact_is_complete(ledger, tmp_path):
    artifact = tmp_path / "models" / "source.sacm"
    digest = StorageService.write_text(artifact, "weights")
    JobService.mark_running(ledger, "source", "model", "source", 7)
    assert not JobService.is_complete(ledger, "source")
    JobService.mark_done(ledger, "source", artifact, digest, 1.5, train_accuracy=0.9)
    assert JobService.is_complete(ledger, "source")
    job = JobService.get_job(ledger, "source")
    assert job.status == JobStatus.DONE
    assert (job.seed, job.train_accuracy, job.duration_s) == ("7", 0.9, 1.5)


def test_changed_or_missing_artifacts_are_rerun(ledger, tmp_path):
    artifact = tmp_path / "a.sacm"
    digest = StorageService.write_text(artifact, "v1")
    JobService.mark_running(ledger, "a", "model", "irrelevant", 1)
    JobService.mark_done(ledger, "a", artifact, digest, 0.1)
    StorageService.write_text(artifact, "v2")
    assert not JobService.is_complete(ledger, "a")
    artifact.unlink()
    assert not JobService.is_complete(ledger, "a")
    assert not JobService.is_complete(ledger, "never-ran")


def test_failures_are_recorded(ledger):
    JobService.mark_running(ledger, "b", "model", "extractL", 2)
    JobService.mark_failed(ledger, "b", "loss became non-finite")
    job = JobService.get_job(ledger, "b")
    assert job.status == JobStatus.FAILED
    assert job.error == "loss became non-finite"
    assert not JobService.is_complete(ledger, "b")


def test_listing_and_durations(ledger, tmp_path):
    for index, tag in enumerate(("surrogate", "surrogate", "irrelevant")):
        job_id = f"{tag}/{index}"
        path = tmp_path / f"{index}.sacm"
        JobService.mark_running(ledger, job_id, "model", tag, index)
        JobService.mark_done(ledger, job_id, path, StorageService.write_text(path, job_id), 2.0)
    JobService.mark_running(ledger, "surrogate/9", "model", "surrogate", 9)
    assert [job.job_id for job in JobService.list_jobs(ledger, tag="surrogate")] == [
        "surrogate/0", "surrogate/1", "surrogate/9"]
    assert JobService.total_duration(ledger, "model", "surrogate") == 4.0
    assert JobService.total_duration(ledger, "model") == 6.0
