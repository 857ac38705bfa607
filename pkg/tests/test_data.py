"""
Unit tests for the synthetic benchmark and the data splits.
"""

import numpy as np
import pytest

from schemas import Dataset, TaskSpec
from services import DataService
from utils.exceptions import ConfigurationException


def test_gen_synthetic_is_balanced_and_in_range(tiny_task):
    ds = DataService.gen_synthetic(tiny_task, 402, seed=4)
    assert ds.images.shape == (402, 1, 8, 8)
    assert ds.images.dtype == np.float32
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
    counts = ds.class_counts()
    assert counts.max() - counts.min() <= 1
    assert ds.task_id == tiny_task.task_id


def test_gen_synthetic_is_deterministic(tiny_task):
    first = DataService.gen_synthetic(tiny_task, 200, seed=9)
    second = DataService.gen_synthetic(tiny_task, 200, seed=9)
    other = DataService.gen_synthetic(tiny_task, 200, seed=10)
    assert np.array_equal(first.images, second.images)
    assert np.array_equal(first.labels, second.labels)
    assert not np.array_equal(first.images, other.images)


def test_gen_synthetic_rejects_too_few_samples(tiny_task):
    with pytest.raises(ConfigurationException):
        DataService.gen_synthetic(tiny_task, 20 * tiny_task.k - 1, seed=0)


def test_templates_are_distinct_per_class(tiny_task):
    templates = [DataService.render_template(tiny_task, t) for t in DataService.template_ids(tiny_task)]
    for i in range(len(templates)):
        for j in range(i + 1, len(templates)):
            assert not np.array_equal(templates[i], templates[j])


def test_unknown_family_is_a_configuration_error():
    with pytest.raises(ConfigurationException):
        DataService.render_template(TaskSpec(family="digits"), 0)


def test_split_default_sizes_and_disjointness():
    ds = DataService.gen_synthetic(TaskSpec(), 6000, seed=1)
    defender, attacker, validation = DataService.split_indices(ds, seed=2)
    assert (len(defender), len(attacker), len(validation)) == (2700, 3000, 300)
    everything = np.concatenate([defender, attacker, validation])
    assert len(np.unique(everything)) == 6000
    assert np.all(np.bincount(ds.labels[validation], minlength=10) == 30)


def test_split_is_stratified_and_deterministic(tiny_dataset):
    first = DataService.split_defender_attacker(tiny_dataset, seed=3)
    second = DataService.split_defender_attacker(tiny_dataset, seed=3)
    for a, b in zip(first, second):
        assert np.array_equal(a.images, b.images)
    defender, attacker, validation = first
    halves = defender.class_counts() + validation.class_counts()
    assert np.abs(halves - attacker.class_counts()).max() <= 1


def test_split_rejects_tiny_inputs(tiny_task):
    ds = DataService.gen_synthetic(tiny_task, 100, seed=0)
    with pytest.raises(ConfigurationException):
        DataService.split_defender_attacker(ds, seed=0)


def test_transfer_task_has_a_new_label_space(tiny_task):
    transfer = DataService.derive_transfer_task(tiny_task, seed=5, n=200)
    assert transfer.task_id != tiny_task.task_id
    assert transfer.k == tiny_task.k
    source_template = DataService.render_template(tiny_task, 0)
    assert not np.array_equal(source_template, DataService.render_template(DataService.transfer_spec(tiny_task), 4))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(images=np.full((2, 1, 2, 2), 2.0), labels=[0, 1], task_id="t", k=2)
    with pytest.raises(ValueError):
        Dataset(images=np.zeros((2, 1, 2, 2)), labels=[0, 2], task_id="t", k=2)
    ds = Dataset(images=np.zeros((3, 1, 2, 2)), labels=[0, 1, 1], task_id="t", k=2)
    with pytest.raises(ValueError):
        ds.images[0, 0, 0, 0] = 1.0


def test_blended_samples_often_look_like_their_partner_class(tiny_task):
    clean = tiny_task.model_copy(update={"sigma": 0.0, "jitter": False})
    templates = np.stack([DataService.render_template(clean, t) for t in DataService.template_ids(clean)])

    def nearest_is_own(task):
        ds = DataService.gen_synthetic(task, 400, seed=6)
        distances = np.linalg.norm((ds.images[:, None] - templates[None]).reshape(ds.n, clean.k, -1), axis=2)
        return distances.argmin(axis=1) == ds.labels

    assert nearest_is_own(clean.model_copy(update={"ambiguity": 0.0})).all()
    confusable = 1.0 - nearest_is_own(clean.model_copy(update={"ambiguity": 1.0})).mean()
    assert 0.35 <= confusable <= 0.7
