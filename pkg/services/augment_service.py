"""
Service layer for CutMix and flip augmentation.

This module provides the AugmentService class used to build the augmented
fingerprint inputs: rectangular CutMix with area-consistent label mixing, the
spatial transpose flip (or a horizontal mirror) and the seeded pipeline that
combines them.
"""

import logging
from typing import Tuple, Union

import numpy as np

from ndcore import derive_seed, make_rng
from schemas import CutMixRecord
from utils.exceptions import ConfigurationException, ShapeMismatchException

logger = logging.getLogger(__name__)

Rect = Tuple[int, int, int, int]


class AugmentService:
    @staticmethod
    def random_rect(h: int, w: int, rng: np.random.Generator) -> Rect:
        """
        Draw (top, left, height, width) with sides uniform in [size/4, 3*size/4].
        """
        height = int(rng.integers(max(1, h // 4), max(1, (3 * h) // 4) + 1))
        width = int(rng.integers(max(1, w // 4), max(1, (3 * w) // 4) + 1))
        top = int(rng.integers(0, h - height + 1))
        left = int(rng.integers(0, w - width + 1))
        return top, left, height, width

    @staticmethod
    def cutmix(x0: np.ndarray, y0: np.ndarray, x1: np.ndarray, y1: np.ndarray,
               rect: Union[Rect, str] = "random", seed: int = 0, parents: Tuple[int, int] = (0, 1)):
        """
        Mix two labelled images: the rectangle comes from x0, the rest from x1.

        x_mix = M * x0 + (1 - M) * x1 and y_mix = alpha * y0 + (1 - alpha) * y1,
        where alpha is the realised share of ones in M.

        Args:
            x0, x1 (np.ndarray): Images of identical shape (c, h, w).
            y0, y1 (np.ndarray): One-hot or soft labels over the same k.
            rect: (top, left, height, width) or "random".
            seed (int): Seed for the random rectangle.
            parents (tuple): Indices of the parents, recorded in the result.

        Returns:
            tuple: (mixed image, mixed label, CutMixRecord)

        Raises:
            ShapeMismatchException: If image or label shapes differ.
        """
        x0, x1 = np.asarray(x0), np.asarray(x1)
        y0, y1 = np.asarray(y0, dtype=np.float64), np.asarray(y1, dtype=np.float64)
        if x0.shape != x1.shape or x0.ndim < 2:
            raise ShapeMismatchException(f"cutmix images differ: {x0.shape} vs {x1.shape}")
        if y0.shape != y1.shape:
            raise ShapeMismatchException(f"cutmix labels differ: {y0.shape} vs {y1.shape}")
        h, w = x0.shape[-2:]
        if isinstance(rect, str):
            rect = AugmentService.random_rect(h, w, make_rng(seed))
        top, left, height, width = rect
        mask = np.zeros((h, w), dtype=np.float32)
        mask[top:top + height, left:left + width] = 1.0
        alpha = float(mask.sum()) / mask.size
        mixed = np.where(mask.astype(bool), x0, x1).astype(x0.dtype)
        label = alpha * y0 + (1.0 - alpha) * y1
        return mixed, label, CutMixRecord(mask=mask, alpha=alpha, parents=parents)

    @staticmethod
    def flip(x: np.ndarray, mode: str = "transpose") -> np.ndarray:
        """
        Flip images spatially; works on (h, w), (c, h, w) or (n, c, h, w).

        Args:
            x (np.ndarray): Image or batch with square spatial dims for "transpose".
            mode (str): "transpose" swaps rows and columns, "mirror" reverses columns.

        Returns:
            np.ndarray: Flipped copy.
        """
        x = np.asarray(x)
        if mode == "mirror":
            return np.ascontiguousarray(x[..., ::-1])
        if mode != "transpose":
            raise ConfigurationException(f"Unknown flip mode: {mode}")
        if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
            raise ShapeMismatchException(f"transpose flip needs square images, got {x.shape}")
        return np.ascontiguousarray(np.swapaxes(x, -1, -2))

    @staticmethod
    def build_sacm_inputs(samples: np.ndarray, n_out: int, rounds: int = 1, use_flip: bool = True,
                          seed: int = 0, flip_mode: str = "transpose") -> np.ndarray:
        """
        Build CutMix-augmented fingerprint inputs.

        Output i starts from sample i mod |samples| and is mixed `rounds` times
        with randomly drawn partners, then optionally flipped. Each output uses
        its own derived seed.

        Args:
            samples (np.ndarray): Source images (m, c, h, w), m >= 2.
            n_out (int): Number of outputs.
            rounds (int): CutMix passes per output.
            use_flip (bool): Whether to flip after mixing.
            seed (int): Pipeline seed.
            flip_mode (str): "transpose" or "mirror".

        Returns:
            np.ndarray: Augmented images (n_out, c, h, w).

        Raises:
            ConfigurationException: If fewer than two samples are given or n_out < 1.
        """
        samples = np.asarray(samples, dtype=np.float32)
        if samples.ndim != 4 or samples.shape[0] < 2:
            raise ConfigurationException("build_sacm_inputs needs at least two samples")
        if n_out < 1:
            raise ConfigurationException(f"n_out must be positive, got {n_out}")
        m = samples.shape[0]
        dummy = np.ones(1)
        outputs = np.empty((n_out,) + samples.shape[1:], dtype=np.float32)
        for index in range(n_out):
            rng = make_rng(derive_seed(seed, f"sacm/{index}"))
            base = index % m
            image = samples[base]
            for _ in range(rounds):
                partner = (base + 1 + int(rng.integers(m - 1))) % m
                image, _, _ = AugmentService.cutmix(image, dummy, samples[partner], dummy,
                                                    rect="random", seed=int(rng.integers(1 << 62)),
                                                    parents=(base, partner))
            outputs[index] = AugmentService.flip(image, flip_mode) if use_flip else image
        logger.info("Built %d augmented inputs from %d samples (rounds=%d, flip=%s)", n_out, m, rounds, use_flip)
        return outputs
