"""
Fast checks of the default recipe: the default task, sizes and attack settings with mlp-s models.

The desk-scale zoo with its cnn source and every student architecture runs in
the slow acceptance recipes.
"""

import numpy as np
import pytest

from models import Provenance
from schemas import Dataset, ExperimentManifest, ModelSpec
from services import (
    AttackService, AugmentService, DataService, EvaluationService, FingerprintService, QueryHandle,
    StorageService, TrainingService, ZooService,
)

MANIFEST = ExperimentManifest()
ATTACKS = MANIFEST.attacks
TASK = MANIFEST.data.task


def _seeded(cfg, seed: int):
    return cfg.model_copy(update={"seed": seed})


def _agreement(model, reference, images) -> float:
    return float(np.mean(ZooService.predict(model, images) == ZooService.predict(reference, images)))


@pytest.fixture(scope="module")
def recipe():
    """
    Default-sized splits of the default task and an mlp-s source trained with the default settings.
    """
    data = MANIFEST.data
    full = DataService.gen_synthetic(TASK, data.n_train, seed=21)
    defender, attacker, validation = DataService.split_defender_attacker(full, seed=22)
    spec = ModelSpec(arch="mlp-s", input_shape=TASK.image_shape, k=TASK.k)
    test = DataService.gen_synthetic(TASK, data.n_test, seed=23)
    source = TrainingService.train(defender, spec, ATTACKS.train, seed=24, eval_ds=test, model_id="source")
    return {
        "spec": spec,
        "defender": defender,
        "attacker": attacker,
        "validation": validation,
        "test": test,
        "candidates": DataService.gen_synthetic(TASK, data.n_candidates, seed=25),
        "source": source,
    }


@pytest.fixture(scope="module")
def surrogates(recipe):
    return FingerprintService.train_surrogates(recipe["source"], recipe["defender"], MANIFEST.zoo.surrogates,
                                               [recipe["spec"]], ATTACKS.surrogate, seeds=[31, 32, 33, 34, 35],
                                               eval_ds=recipe["test"])


@pytest.fixture(scope="module")
def label_copy(recipe):
    return AttackService.extract(QueryHandle.from_model(recipe["source"]), recipe["attacker"], recipe["spec"],
                                 _seeded(ATTACKS.extract, 41), "label", recipe["test"], "extractL-0")


def test_reference_model_separates_the_default_task(recipe):
    source = recipe["source"]
    assert source.heldout_accuracy >= 0.85
    # the blended samples keep a real error rate on unseen data
    assert source.heldout_accuracy < 0.99


def test_default_recipe_yields_fifty_qualifying_samples(recipe, surrogates):
    candidates = recipe["candidates"]
    mask = FingerprintService.misclassified_mask(candidates, recipe["source"], surrogates)
    assert int(mask.sum()) >= 50
    selected = FingerprintService.select_misclassified(candidates, recipe["source"], surrogates,
                                                       n_max=MANIFEST.fingerprint.n_inputs)
    assert selected.n == min(MANIFEST.fingerprint.n_inputs, int(mask.sum()))


def test_surrogates_agree_with_the_source(recipe, surrogates):
    assert len(surrogates) == 5
    for surrogate in surrogates:
        assert surrogate.provenance == Provenance.SURROGATE
        assert _agreement(surrogate, recipe["source"], recipe["validation"].images) >= 0.85


def test_finetuning_keeps_the_source_accuracy(recipe):
    source = recipe["source"]
    tuned = TrainingService.finetune(source, recipe["attacker"], "all", _seeded(ATTACKS.finetune, 42),
                                     recipe["test"])
    assert abs(tuned.heldout_accuracy - source.heldout_accuracy) <= 0.03


@pytest.mark.parametrize("mode", ["label", "prob"])
def test_extraction_stays_close_to_the_source(recipe, label_copy, mode):
    if mode == "label":
        stolen = label_copy
    else:
        stolen = AttackService.extract(QueryHandle.from_model(recipe["source"]), recipe["attacker"],
                                       recipe["spec"], _seeded(ATTACKS.extract, 43), "prob", recipe["test"])
    assert stolen.heldout_accuracy >= recipe["source"].heldout_accuracy - 0.05


def test_adversarial_extraction_costs_little_accuracy(recipe, label_copy):
    hardened = AttackService.extract_adv(QueryHandle.from_model(recipe["source"]), recipe["attacker"],
                                         recipe["spec"], _seeded(ATTACKS.extract, 41), _seeded(ATTACKS.adv, 41),
                                         ATTACKS.adv_train, recipe["test"], "extractAdv-0")
    assert hardened.heldout_accuracy >= label_copy.heldout_accuracy - 0.06


def test_transfer_reaches_the_new_task(recipe):
    new_train = DataService.derive_transfer_task(TASK, seed=26, n=MANIFEST.data.n_transfer)
    new_test = DataService.gen_synthetic(DataService.transfer_spec(TASK), 1000, seed=27)
    transferred = {mode: TrainingService.transfer(recipe["source"], new_train, mode, _seeded(ATTACKS.transfer, 44),
                                                  new_test)
                   for mode in ("all", "last")}
    assert transferred["all"].heldout_accuracy >= 0.70
    assert transferred["last"].heldout_accuracy <= transferred["all"].heldout_accuracy + 0.02


def test_pruning_curve_rises_and_stays_detectable(tmp_path, recipe):
    source, sacm = recipe["source"], MANIFEST.fingerprint.sacm
    samples = FingerprintService.select_normal(recipe["defender"], sacm.n_source, seed=51)
    images = AugmentService.build_sacm_inputs(samples.images, sacm.n_out, sacm.rounds, sacm.use_flip, 52)
    inputs = Dataset(images=images, labels=ZooService.predict(source, images), task_id=source.task_id, k=TASK.k)
    path = tmp_path / "inputs.sacd"
    StorageService.save_dataset(inputs, path)
    record = FingerprintService.build_record(source, inputs, path)
    irrelevant = [TrainingService.train(recipe["attacker"], recipe["spec"], ATTACKS.train, seed=seed,
                                        provenance=Provenance.IRRELEVANT) for seed in (61, 62)]
    activation_set = recipe["validation"].subset(np.arange(MANIFEST.zoo.activation_size))
    curve = EvaluationService.pruning_sweep(source, MANIFEST.sweep.pruning_ratios, record, inputs, activation_set,
                                            recipe["test"], irrelevant)
    distances = [point.distance for point in curve.points]
    assert all(later >= earlier - 0.02 for earlier, later in zip(distances, distances[1:]))
    assert all(distance < curve.irrelevant_mean for distance in distances)
    accuracy = {point.ratio: point.accuracy for point in curve.points}
    assert accuracy[0.5] <= accuracy[0.1] + 0.02
