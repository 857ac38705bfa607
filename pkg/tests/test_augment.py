"""
Unit tests for CutMix, flips and the augmented input pipeline.
"""

import numpy as np
import pytest

from ndcore import make_rng
from schemas import CutMixRecord, TaskSpec
from services import AugmentService, DataService
from utils.exceptions import ConfigurationException, ShapeMismatchException
from utils.hashing import sha256_bytes


def test_cutmix_conserves_pixels_and_label_mass():
    rng = make_rng(21)
    for trial in range(100):
        x0, x1 = rng.uniform(size=(2, 3, 8, 8)).astype(np.float32)
        y0, y1 = np.eye(5)[rng.integers(5, size=2)]
        mixed, label, record = AugmentService.cutmix(x0, y0, x1, y1, seed=trial)
        mask = record.mask.astype(bool)
        assert np.array_equal(mixed[:, mask], x0[:, mask])
        assert np.array_equal(mixed[:, ~mask], x1[:, ~mask])
        assert record.alpha == mask.mean()
        np.testing.assert_allclose(label, record.alpha * y0 + (1 - record.alpha) * y1)
        assert label.sum() == pytest.approx(1.0)


def test_cutmix_with_explicit_rectangle():
    x0, x1 = np.ones((1, 4, 4)), np.zeros((1, 4, 4))
    mixed, label, record = AugmentService.cutmix(x0, np.array([1.0, 0.0]), x1, np.array([0.0, 1.0]),
                                                 rect=(0, 0, 2, 2), parents=(3, 7))
    assert record.alpha == 0.25
    assert record.parents == (3, 7)
    assert mixed.sum() == 4
    np.testing.assert_allclose(label, [0.25, 0.75])


def test_random_rect_sides_stay_in_range():
    rng = make_rng(2)
    for _ in range(200):
        top, left, height, width = AugmentService.random_rect(16, 16, rng)
        assert 4 <= height <= 12 and 4 <= width <= 12
        assert top + height <= 16 and left + width <= 16


def test_cutmix_shape_errors():
    with pytest.raises(ShapeMismatchException):
        AugmentService.cutmix(np.zeros((1, 4, 4)), np.ones(2), np.zeros((1, 5, 5)), np.ones(2))
    with pytest.raises(ShapeMismatchException):
        AugmentService.cutmix(np.zeros((1, 4, 4)), np.ones(2), np.zeros((1, 4, 4)), np.ones(3))


def test_cutmix_record_rejects_inconsistent_alpha():
    with pytest.raises(ValueError):
        CutMixRecord(mask=np.ones((2, 2)), alpha=0.5)


def test_flips():
    x = np.arange(2 * 3 * 3, dtype=np.float32).reshape(2, 3, 3)
    flipped = AugmentService.flip(x)
    assert flipped[0, 0, 1] == x[0, 1, 0]
    assert np.array_equal(AugmentService.flip(flipped), x)
    assert np.array_equal(AugmentService.flip(x, "mirror")[..., 0], x[..., -1])
    with pytest.raises(ShapeMismatchException):
        AugmentService.flip(np.zeros((1, 2, 3)))
    with pytest.raises(ConfigurationException):
        AugmentService.flip(x, "rotate")


def test_build_sacm_inputs_is_seeded(tiny_dataset):
    samples = tiny_dataset.images[:10]
    first = AugmentService.build_sacm_inputs(samples, 25, seed=4)
    second = AugmentService.build_sacm_inputs(samples, 25, seed=4)
    assert first.shape == (25, 1, 8, 8)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, AugmentService.build_sacm_inputs(samples, 25, seed=5))
    assert first.min() >= 0.0 and first.max() <= 1.0


def test_build_sacm_inputs_without_mixing_or_flip_returns_the_samples(tiny_dataset):
    samples = tiny_dataset.images[:6]
    outputs = AugmentService.build_sacm_inputs(samples, 12, rounds=0, use_flip=False)
    assert np.array_equal(outputs[7], samples[1])


def test_build_sacm_inputs_preconditions(tiny_dataset):
    with pytest.raises(ConfigurationException):
        AugmentService.build_sacm_inputs(tiny_dataset.images[:1], 5)
    with pytest.raises(ConfigurationException):
        AugmentService.build_sacm_inputs(tiny_dataset.images[:4], 0)


@pytest.mark.parametrize("seed", range(10))
def test_default_sacm_inputs_are_all_distinct(seed):
    samples = DataService.gen_synthetic(TaskSpec(), 200, seed=70 + seed).images[:100]
    outputs = AugmentService.build_sacm_inputs(samples, 200, seed=seed)
    assert outputs.shape == (200, 1, 16, 16)
    assert len({sha256_bytes(image.tobytes()) for image in outputs}) == 200
