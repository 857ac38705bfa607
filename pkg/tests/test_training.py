"""
Unit tests for training, fine-tuning, pruning and transfer.
"""

import numpy as np
import pytest

from models import Provenance
from ndcore import one_hot
from schemas import ModelParams, TrainConfig
from services import DataService, TrainingService, ZooService
from utils.exceptions import ConfigurationException, TrainingFailureException


def _same_params(a: ModelParams, b: ModelParams, keys=None) -> bool:
    keys = keys if keys is not None else a.params.keys()
    return all(np.array_equal(a.params[key], b.params[key]) for key in keys)


def test_zero_epochs_returns_the_initialisation(tiny_dataset, tiny_spec):
    cfg = TrainConfig(epochs=0)
    model = TrainingService.train(tiny_dataset, tiny_spec, cfg, seed=5)
    init = ZooService.init_model(tiny_spec, 0, Provenance.SOURCE, tiny_dataset.task_id)
    fresh = TrainingService.train(tiny_dataset, tiny_spec, cfg, seed=5)
    assert _same_params(model, fresh)
    assert not _same_params(model, init)
    assert model.train_accuracy is not None


def test_training_is_deterministic(tiny_dataset, tiny_spec, tiny_cfg):
    first = TrainingService.train(tiny_dataset, tiny_spec, tiny_cfg, seed=8)
    second = TrainingService.train(tiny_dataset, tiny_spec, tiny_cfg, seed=8)
    assert _same_params(first, second)


def test_trained_source_learns_the_task(tiny_model):
    assert tiny_model.tag == "source"
    assert tiny_model.train_accuracy > 0.5
    assert tiny_model.heldout_accuracy > 0.5


def test_training_rejects_class_count_mismatch(tiny_dataset, tiny_spec, tiny_cfg):
    with pytest.raises(ConfigurationException):
        TrainingService.train(tiny_dataset, tiny_spec.model_copy(update={"k": 5}), tiny_cfg, seed=0)


def test_non_finite_loss_stops_training(tiny_model, tiny_dataset, tiny_cfg):
    def broken_loss(logits, targets):
        return float("nan"), np.zeros_like(logits)

    with pytest.raises(TrainingFailureException) as info:
        TrainingService.fit(tiny_model, tiny_dataset.images, tiny_dataset.labels, broken_loss, tiny_cfg, seed=0)
    assert info.value.epoch == 0


def test_overflowing_weights_stop_training(tiny_model, tiny_dataset, tiny_cfg):
    huge = tiny_model.model_copy(update={"params": {k: v * np.float32(1e30) for k, v in tiny_model.params.items()}})
    with pytest.raises(TrainingFailureException):
        TrainingService.fit(huge, tiny_dataset.images, tiny_dataset.labels, TrainingService.label_loss,
                            tiny_cfg, seed=0)


def test_finetune_last_only_moves_the_head(tiny_model, tiny_dataset, tiny_cfg):
    tuned = TrainingService.finetune(tiny_model, tiny_dataset, "last", tiny_cfg)
    head = ZooService.head_keys(tiny_model)
    body = [key for key in tiny_model.params if key not in head]
    assert tuned.tag == "finetuneL"
    assert _same_params(tuned, tiny_model, body)
    assert not _same_params(tuned, tiny_model, head)


def test_finetune_with_zero_lr_keeps_parameters(tiny_model, tiny_dataset):
    tuned = TrainingService.finetune(tiny_model, tiny_dataset, "all", TrainConfig(epochs=1, lr=0.0))
    assert tuned.tag == "finetuneA"
    assert _same_params(tuned, tiny_model)


def test_finetune_rejects_foreign_labels(tiny_model, tiny_task, tiny_cfg):
    transfer = DataService.derive_transfer_task(tiny_task, seed=1, n=200)
    with pytest.raises(ConfigurationException):
        TrainingService.finetune(tiny_model, transfer, "all", tiny_cfg)
    with pytest.raises(ConfigurationException):
        TrainingService.finetune(tiny_model, DataService.gen_synthetic(tiny_task, 100, seed=3), "some", tiny_cfg)


def test_pruning_zeroes_the_lowest_activation_units(tiny_model, tiny_test_dataset):
    pruned = TrainingService.prune_by_activation(tiny_model, tiny_test_dataset, 0.3)
    weight = pruned.params["1.weight"]
    zero_columns = np.flatnonzero(~weight.any(axis=0))
    assert len(zero_columns) == 19
    assert np.all(pruned.params["1.bias"][zero_columns] == 0)
    assert pruned.tag == "pruned(0.3)"
    head = ZooService.head_keys(tiny_model)
    assert _same_params(pruned, tiny_model, head)


def test_pruning_ratio_zero_is_the_identity(tiny_model, tiny_test_dataset):
    pruned = TrainingService.prune_by_activation(tiny_model, tiny_test_dataset.images, 0.0)
    assert _same_params(pruned, tiny_model)
    assert pruned.prune_ratio == 0.0


def test_pruning_works_on_convolutions(tiny_cnn, tiny_test_dataset):
    pruned = TrainingService.prune_by_activation(tiny_cnn, tiny_test_dataset, 0.5)
    kernels = pruned.params["0.weight"]
    assert sum(not kernels[u].any() for u in range(kernels.shape[0])) == 4


def test_pruning_rejects_bad_ratios(tiny_model, tiny_test_dataset):
    for ratio in (-0.1, 1.0):
        with pytest.raises(ConfigurationException):
            TrainingService.prune_by_activation(tiny_model, tiny_test_dataset, ratio)


def test_transfer_last_keeps_the_body(tiny_model, tiny_task, tiny_cfg):
    transfer = DataService.derive_transfer_task(tiny_task, seed=4, n=200)
    moved = TrainingService.transfer(tiny_model, transfer, "last", tiny_cfg)
    head = ZooService.head_keys(tiny_model)
    body = [key for key in tiny_model.params if key not in head]
    assert moved.tag == "transferL"
    assert moved.task_id == transfer.task_id
    assert _same_params(moved, tiny_model, body)
    assert moved.params[head[0]].shape == (64, transfer.k)


def test_transfer_rejects_the_source_task(tiny_model, tiny_dataset, tiny_cfg):
    with pytest.raises(ConfigurationException):
        TrainingService.transfer(tiny_model, tiny_dataset, "all", tiny_cfg)


def test_distillation_without_soft_term_is_label_loss():
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((6, 4)).astype(np.float32)
    source = rng.dirichlet(np.ones(4), size=6)
    loss, grad = TrainingService.distillation_loss(logits, source, TrainConfig(alpha=0.0))
    expected_loss, expected_grad = TrainingService.label_loss(logits, source.argmax(axis=1))
    assert loss == pytest.approx(expected_loss)
    np.testing.assert_allclose(grad, expected_grad, atol=1e-7)


def test_distillation_matching_source_has_no_soft_gradient():
    logits = np.array([[2.0, 0.5, -1.0]], dtype=np.float32)
    source = np.exp(logits.astype(np.float64)) / np.exp(logits.astype(np.float64)).sum()
    loss, grad = TrainingService.distillation_loss(logits, source, TrainConfig(alpha=1.0, temperature=5.0))
    assert loss == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(grad, 0.0, atol=1e-6)


def test_soft_target_loss_with_one_hot_targets_equals_label_loss():
    logits = np.array([[1.0, 2.0], [0.0, -1.0]], dtype=np.float32)
    labels = np.array([1, 0])
    assert TrainingService.soft_target_loss(logits, one_hot(labels, 2, np.float64))[0] == pytest.approx(
        TrainingService.label_loss(logits, labels)[0])


def test_a_student_stuck_on_one_class_is_rejected(tiny_dataset, tiny_spec):
    params = {"1.weight": np.zeros((64, 64)), "1.bias": np.zeros(64), "3.weight": np.zeros((64, 4)),
              "3.bias": np.array([1.0, 0.0, 0.0, 0.0])}
    with pytest.raises(TrainingFailureException) as info:
        TrainingService.check_not_collapsed(tiny_spec, params, tiny_dataset.images, tiny_dataset.labels, 3)
    assert info.value.epoch == 3
    single_class = np.zeros(tiny_dataset.n, dtype=np.int64)
    TrainingService.check_not_collapsed(tiny_spec, params, tiny_dataset.images, single_class, 0)
    soft = one_hot(tiny_dataset.labels, 4, np.float64)
    with pytest.raises(TrainingFailureException):
        TrainingService.check_not_collapsed(tiny_spec, params, tiny_dataset.images, soft, 0)
