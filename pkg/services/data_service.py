"""
Service layer for the synthetic benchmark.

This module provides the DataService class that renders procedural shape classes,
splits a collection into defender, attacker and validation parts, and derives
transfer-learning tasks over disjoint label spaces.
"""

import logging

import numpy as np

from ndcore import derive_seed, make_rng
from schemas import Dataset, TaskSpec
from utils.exceptions import ConfigurationException

logger = logging.getLogger(__name__)

MIN_PER_CLASS = 20
JITTER = 2
# Blend weights straddle 0.5, so a blended sample is equally explained by either of its two classes.
BLEND_SPREAD = 0.2
SUPPORTED_FAMILIES = ("shapes",)


def _draw_primitive(canvas: np.ndarray, rng: np.random.Generator) -> None:
    h, w = canvas.shape
    kind = rng.integers(4)
    intensity = rng.uniform(0.6, 1.0)
    top, left = rng.integers(0, h // 2), rng.integers(0, w // 2)
    height, width = rng.integers(h // 4, h // 2 + 1), rng.integers(w // 4, w // 2 + 1)
    rows, cols = np.mgrid[0:h, 0:w]
    if kind == 0:  # filled box
        region = (rows >= top) & (rows < top + height) & (cols >= left) & (cols < left + width)
    elif kind == 1:  # box outline
        inside = (rows >= top) & (rows < top + height) & (cols >= left) & (cols < left + width)
        core = (rows > top) & (rows < top + height - 1) & (cols > left) & (cols < left + width - 1)
        region = inside & ~core
    elif kind == 2:  # ellipse ring
        cy, cx = top + height / 2.0, left + width / 2.0
        radius = ((rows - cy) / (height / 2.0)) ** 2 + ((cols - cx) / (width / 2.0)) ** 2
        region = (radius <= 1.0) & (radius >= 0.45)
    else:  # diagonal stroke
        direction = 1 if rng.random() < 0.5 else -1
        offset = rng.integers(-h // 3, h // 3 + 1)
        region = np.abs(direction * (rows - h / 2.0) - (cols - w / 2.0) - offset) <= 1.0
    canvas[region] = np.maximum(canvas[region], intensity)


def _shift(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    shifted = np.zeros_like(image)
    h, w = image.shape[-2:]
    src_rows = slice(max(0, -dy), h - max(0, dy))
    dst_rows = slice(max(0, dy), h - max(0, -dy))
    src_cols = slice(max(0, -dx), w - max(0, dx))
    dst_cols = slice(max(0, dx), w - max(0, -dx))
    shifted[..., dst_rows, dst_cols] = image[..., src_rows, src_cols]
    return shifted


class DataService:
    @staticmethod
    def template_ids(spec: TaskSpec) -> list:
        """
        Template ids backing the classes of a task.
        """
        return list(range(spec.template_offset, spec.template_offset + spec.k))

    @staticmethod
    def render_template(spec: TaskSpec, template_id: int) -> np.ndarray:
        """
        Render one class template, a deterministic function of family and template id.

        Args:
            spec (TaskSpec): Task whose family and image shape are used.
            template_id (int): Template identifier.

        Returns:
            np.ndarray: Template of shape (c, h, w) in [0, 1].
        """
        if spec.family not in SUPPORTED_FAMILIES:
            raise ConfigurationException(f"Unknown generator family: {spec.family}")
        c, h, w = spec.image_shape
        rng = make_rng(derive_seed(0, f"{spec.family}/template/{template_id}/{h}x{w}"))
        channels = []
        for _ in range(c):
            canvas = np.zeros((h, w), dtype=np.float64)
            for _ in range(3):
                _draw_primitive(canvas, rng)
            channels.append(canvas)
        return np.stack(channels).astype(np.float32)

    @staticmethod
    def gen_synthetic(spec: TaskSpec, n: int, seed: int) -> Dataset:
        """
        Generate a class-balanced synthetic dataset.

        Each sample is its class template, optionally blended with another class
        template (ambiguity), shifted by up to two pixels (jitter) and perturbed
        with Gaussian noise of standard deviation sigma, then clipped to [0, 1].
        Blend weights lie in [0.3, 0.7], so about half of the blended samples look
        more like their partner class than their own: unseen data carries an error
        rate of roughly ambiguity / 2 for any classifier.

        Args:
            spec (TaskSpec): Task descriptor.
            n (int): Number of samples, at least 20 per class.
            seed (int): Generation seed.

        Returns:
            Dataset: The generated dataset.

        Raises:
            ConfigurationException: If n < 20 * k.
        """
        if n < MIN_PER_CLASS * spec.k:
            raise ConfigurationException(f"n={n} is below {MIN_PER_CLASS} samples per class for k={spec.k}")
        logger.info("Generating %d samples for task %s (seed %d)", n, spec.task_id, seed)
        templates = np.stack([DataService.render_template(spec, t) for t in DataService.template_ids(spec)])
        rng = make_rng(derive_seed(seed, f"synthetic/{spec.model_dump_json()}/{n}"))
        labels = rng.permutation(np.arange(n) % spec.k)
        images = np.empty((n,) + tuple(spec.image_shape), dtype=np.float32)
        for index, label in enumerate(labels):
            image = templates[label].astype(np.float64)
            if spec.ambiguity > 0 and rng.random() < spec.ambiguity:
                other = (label + 1 + rng.integers(spec.k - 1)) % spec.k
                weight = rng.uniform(0.5 - BLEND_SPREAD, 0.5 + BLEND_SPREAD)
                image = (1.0 - weight) * image + weight * templates[other]
            if spec.jitter:
                dy, dx = rng.integers(-JITTER, JITTER + 1, size=2)
                image = _shift(image, int(dy), int(dx))
            if spec.sigma > 0:
                image = image + spec.sigma * rng.standard_normal(image.shape)
            images[index] = np.clip(image, 0.0, 1.0)
        return Dataset(images=images, labels=labels, task_id=spec.task_id, k=spec.k)

    @staticmethod
    def split_indices(dataset: Dataset, seed: int, validation_fraction: float = 0.1):
        """
        Class-stratified defender / attacker / validation index split.

        Each class is shuffled and halved; odd leftovers alternate between the halves.
        The validation slice is carved from the defender half in class round-robin order.

        Returns:
            tuple: Sorted index arrays (defender, attacker, validation).

        Raises:
            ConfigurationException: If the input is too small or a class is too rare.
        """
        k = dataset.k
        if dataset.n < 2 * MIN_PER_CLASS * k:
            raise ConfigurationException(f"Need at least {2 * MIN_PER_CLASS * k} samples to split, got {dataset.n}")
        counts = dataset.class_counts()
        if counts.min() < 2 * MIN_PER_CLASS:
            raise ConfigurationException(
                f"Class {int(counts.argmin())} has {int(counts.min())} samples, {2 * MIN_PER_CLASS} required")
        rng = make_rng(derive_seed(seed, "split"))
        defender_groups, attacker, leftovers = [], [], []
        for label in range(k):
            members = rng.permutation(np.flatnonzero(dataset.labels == label))
            half = len(members) // 2
            defender_groups.append(list(members[:half]))
            attacker.extend(members[half:2 * half])
            leftovers.extend(members[2 * half:])
        for position, index in enumerate(leftovers):
            if position % 2 == 0:
                attacker.append(index)
            else:
                defender_groups[dataset.labels[index]].append(index)
        # Round-robin over classes keeps the validation slice balanced.
        order = [group[r] for r in range(max(map(len, defender_groups)))
                 for group in defender_groups if r < len(group)]
        n_validation = int(len(order) * validation_fraction)
        validation = np.sort(np.asarray(order[:n_validation], dtype=np.int64))
        defender = np.sort(np.asarray(order[n_validation:], dtype=np.int64))
        return defender, np.sort(np.asarray(attacker, dtype=np.int64)), validation

    @staticmethod
    def split_defender_attacker(dataset: Dataset, seed: int, validation_fraction: float = 0.1):
        """
        Split a dataset into defender, attacker and validation parts.

        Args:
            dataset (Dataset): The full collection.
            seed (int): Split seed.
            validation_fraction (float): Share of the defender half used for validation.

        Returns:
            tuple: (D_defender, D_attacker, D_validation) datasets.
        """
        defender, attacker, validation = DataService.split_indices(dataset, seed, validation_fraction)
        logger.info("Split %d samples into defender=%d attacker=%d validation=%d",
                    dataset.n, len(defender), len(attacker), len(validation))
        return dataset.subset(defender), dataset.subset(attacker), dataset.subset(validation)

    @staticmethod
    def transfer_spec(spec: TaskSpec) -> TaskSpec:
        """
        Task over the next block of k templates: same geometry, disjoint label space.
        """
        return spec.model_copy(update={"template_offset": spec.template_offset + spec.k})

    @staticmethod
    def derive_transfer_task(spec: TaskSpec, seed: int, n: int = 3000) -> Dataset:
        """
        Generate a related task with a new label space for transfer-learning attacks.

        Args:
            spec (TaskSpec): Source task.
            seed (int): Generation seed.
            n (int): Number of samples.

        Returns:
            Dataset: Dataset whose task_id differs from the source task's.
        """
        return DataService.gen_synthetic(DataService.transfer_spec(spec), n, seed)
