"""
Desk-scale acceptance recipes on the default manifest.

These run the whole laboratory (two clean zoos) and take several minutes;
they only run with --runslow.
"""

import json
import time

import numpy as np
import pytest

from controllers import ExperimentController, load_manifest
from models import Provenance
from services import FingerprintService, ZooService
from utils.hashing import sha256_file

pytestmark = pytest.mark.slow

SAME_TASK = ("finetuneA", "finetuneL", "pruned(0.3)", "extractL", "extractP")
EXTRACTION = ("extractL", "extractP", "extractAdv")


def _run(path) -> ExperimentController:
    controller = ExperimentController(path, load_manifest(path / "manifest.json"))
    controller.cmd_zoo()
    return controller


@pytest.fixture(scope="module")
def lab(tmp_path_factory):
    started = time.perf_counter()
    controller = _run(tmp_path_factory.mktemp("run-a"))
    reports = {
        "sac-w": controller.cmd_fingerprint("sac-w"),
        "sac-m": controller.cmd_fingerprint("sac-m"),
        "smooth": controller.cmd_fingerprint("sac-w", labels="smooth", smooth_eps=0.1),
        "baseline": controller.cmd_fingerprint("baseline-asr"),
    }
    return controller, reports, time.perf_counter() - started


def test_detection_headline(lab):
    _, reports, elapsed = lab
    for tag in SAME_TASK:
        assert reports["sac-w"].cell(tag).auc >= 0.95, tag
        assert reports["sac-m"].cell(tag).auc >= 0.95, tag
    assert reports["sac-m"].cell("extractAdv").auc >= 0.85
    assert elapsed < 15 * 60


def test_held_out_threshold_detects_probability_extraction(lab):
    _, reports, _ = lab
    report = reports["sac-w"]
    assert report.calibration
    assert not {entry.model_id for entry in report.calibration} & {entry.model_id for entry in report.entries}
    assert report.cell("extractP").detection_rate >= 0.95


def _accuracy(controller, tag: str) -> list:
    return [controller.load_model(item.job_id).heldout_accuracy for item in controller.zoo_plan()
            if item.provenance.value == tag and not item.calibration]


def test_zoo_accuracies(lab):
    controller, _, _ = lab
    source = controller.load_model("source").heldout_accuracy
    assert source >= 0.85
    assert all(abs(value - source) <= 0.03 for value in _accuracy(controller, "finetuneA"))
    for tag in ("extractL", "extractP"):
        assert all(value >= source - 0.05 for value in _accuracy(controller, tag)), tag
    assert np.mean(_accuracy(controller, "extractAdv")) >= np.mean(_accuracy(controller, "extractL")) - 0.06
    transfer_all = _accuracy(controller, "transferA")
    assert all(value >= 0.60 for value in transfer_all)
    assert np.mean(transfer_all) >= 0.70
    assert np.mean(_accuracy(controller, "transferL")) <= np.mean(transfer_all) + 0.02


def test_surrogates_agree_and_leave_enough_samples(lab):
    controller, _, _ = lab
    data = controller.datasets()
    source = controller.load_model("source")
    surrogates = [controller.load_model(item.job_id) for item in controller.zoo_plan()
                  if item.provenance == Provenance.SURROGATE]
    assert len(surrogates) == 5
    validation = data["validation"].images
    for surrogate in surrogates:
        agreement = np.mean(ZooService.predict(surrogate, validation) == ZooService.predict(source, validation))
        assert agreement >= 0.85, surrogate.model_id
    assert FingerprintService.misclassified_mask(data["candidates"], source, surrogates).sum() >= 50


def test_baseline_collapses_under_adversarial_extraction(lab):
    _, reports, _ = lab
    baseline = reports["baseline"]
    label_auc, adversarial_auc = baseline.cell("extractL").auc, baseline.cell("extractAdv").auc
    assert label_auc >= 0.85
    assert adversarial_auc <= 0.70
    assert label_auc - adversarial_auc >= 0.15


def test_transfer_detection(lab):
    _, reports, _ = lab
    for name in ("sac-w", "sac-m"):
        for tag in ("transferA", "transferL"):
            cell = reports[name].cell(tag)
            assert cell.reference_tag == "irrelevantTransfer"
            assert cell.auc >= 0.9, (name, tag)
    for tag in ("transferA", "transferL"):
        assert not reports["baseline"].cell(tag).applicable
        assert reports["baseline"].cell(tag).auc is None


def test_smooth_label_robustness(lab):
    _, reports, _ = lab
    smooth = reports["smooth"]
    for tag in SAME_TASK + ("extractAdv",):
        assert smooth.cell(tag).auc >= 0.9, tag
    transfer = smooth.cell("transferA")
    assert transfer.auc <= 0.5 or transfer.inverted


def test_pruning_sweep_stays_detectable(lab):
    controller, _, _ = lab
    curve = controller.cmd_sweep("pruning")
    assert [point.ratio for point in curve.points] == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    assert curve.points[0].distance == 0.0
    assert all(point.distance < curve.irrelevant_mean for point in curve.points)
    distances = [point.distance for point in curve.points]
    assert all(later >= earlier - 0.02 for earlier, later in zip(distances, distances[1:]))
    accuracy = {point.ratio: point.accuracy for point in curve.points}
    assert accuracy[0.5] <= accuracy[0.1] + 0.02


def test_fifty_samples_detect_extraction(lab):
    controller, _, _ = lab
    curve = controller.cmd_sweep("samples")
    at_fifty = {point.tag: point.auc for point in curve.points if point.n_samples == 50}
    for tag in EXTRACTION:
        assert at_fifty[tag] >= 0.95, tag


def test_sacm_is_much_cheaper_than_sacw(lab):
    controller, _, _ = lab
    timings = json.loads((controller.workspace / "timings.json").read_text())
    assert timings["fingerprint/sac-m-cosine-prob"] < 0.05 * timings["fingerprint/sac-w-cosine-prob"]


def test_clean_runs_produce_identical_reports(lab, tmp_path):
    controller, _, _ = lab
    second = _run(tmp_path)
    second.cmd_fingerprint("sac-m")
    name = "reports/sac-m-cosine-prob.json"
    assert sha256_file(second.workspace / name) == sha256_file(controller.workspace / name)
    assert sha256_file(second.model_path("source")) == sha256_file(controller.model_path("source"))
