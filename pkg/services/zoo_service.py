"""
Model zoo service module.

This module defines the four tiny architectures of the laboratory, model
initialisation and inference, and the QueryHandle through which suspects and
extraction victims are accessed as black boxes.
"""

import logging
import threading
from functools import lru_cache
from typing import Callable

import numpy as np

from models.provenance import Provenance
from ndcore import Conv2d, Dense, Flatten, MaxPool2x2, ReLU, Sequential, make_rng, softmax_t
from schemas import Dataset, ModelParams, ModelSpec
from utils.exceptions import ConfigurationException, TransportException

logger = logging.getLogger(__name__)


def _layers_for(spec: ModelSpec) -> list:
    c, h, w = spec.input_shape
    flat = c * h * w
    if spec.arch == "mlp-s":
        return [Flatten(), Dense(flat, 64), ReLU(), Dense(64, spec.k)]
    if spec.arch == "mlp-w":
        return [Flatten(), Dense(flat, 128), ReLU(), Dense(128, 64), ReLU(), Dense(64, spec.k)]
    if spec.arch == "cnn-s":
        return [Conv2d(c, 8), ReLU(), MaxPool2x2(), Flatten(),
                Dense(8 * (h // 2) * (w // 2), 64), ReLU(), Dense(64, spec.k)]
    if spec.arch == "cnn-p":
        return [Conv2d(c, 8), ReLU(), MaxPool2x2(), Conv2d(8, 16), ReLU(), MaxPool2x2(), Flatten(),
                Dense(16 * (h // 4) * (w // 4), 32), ReLU(), Dense(32, spec.k)]
    raise ConfigurationException(f"Unknown architecture: {spec.arch}")


class ZooService:
    @staticmethod
    @lru_cache(maxsize=None)
    def build_network(spec: ModelSpec) -> Sequential:
        """
        Build (once per spec) the layer stack of an architecture.
        """
        return Sequential(_layers_for(spec), spec.input_shape)

    @staticmethod
    def init_model(spec: ModelSpec, seed: int, provenance: Provenance, task_id: str,
                   model_id: str = "", prune_ratio=None) -> ModelParams:
        """
        Create freshly initialised parameters for a spec.

        Args:
            spec (ModelSpec): Architecture descriptor.
            seed (int): Initialisation seed.
            provenance (Provenance): Provenance tag of the new model.
            task_id (str): Label space the model is trained for.
            model_id (str): Identifier used in reports.

        Returns:
            ModelParams: The initialised model.
        """
        network = ZooService.build_network(spec)
        params = network.init_params(make_rng(seed))
        return ModelParams(spec=spec, params=params, provenance=provenance, task_id=task_id,
                           model_id=model_id, prune_ratio=prune_ratio)

    @staticmethod
    def logits(model: ModelParams, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
        network = ZooService.build_network(model.spec)
        return network.logits(np.asarray(images, dtype=np.float32), model.params, batch_size)

    @staticmethod
    def probabilities(model: ModelParams, images: np.ndarray, T: float = 1.0) -> np.ndarray:
        return softmax_t(ZooService.logits(model, images), T)

    @staticmethod
    def predict(model: ModelParams, images: np.ndarray) -> np.ndarray:
        return ZooService.logits(model, images).argmax(axis=1)

    @staticmethod
    def accuracy(model: ModelParams, dataset: Dataset) -> float:
        """
        Fraction of correctly classified samples.
        """
        if dataset.n == 0:
            return float("nan")
        return float(np.mean(ZooService.predict(model, dataset.images) == dataset.labels))

    @staticmethod
    def head_keys(model: ModelParams) -> tuple:
        head = ZooService.build_network(model.spec).head_index
        return f"{head}.weight", f"{head}.bias"


class QueryHandle:
    """
    Black-box access to a classifier: probabilities and labels only.

    The handle exposes the label space (k and task id) as a deployed API would,
    counts queries, and never exposes parameters.
    """

    def __init__(self, query_fn: Callable[[np.ndarray], np.ndarray], k: int, task_id: str,
                 model_id: str = "", tag: str = ""):
        self._query_fn = query_fn
        self.k = k
        self.task_id = task_id
        self.model_id = model_id
        self.tag = tag
        self.query_count = 0
        self._lock = threading.Lock()

    @classmethod
    def from_model(cls, model: ModelParams) -> "QueryHandle":
        return cls(lambda images: ZooService.probabilities(model, images), model.spec.k, model.task_id,
                   model_id=model.model_id, tag=model.tag)

    def probabilities(self, images: np.ndarray) -> np.ndarray:
        """
        Query output probabilities for a batch.

        Raises:
            TransportException: If the underlying model cannot answer.
        """
        images = np.asarray(images, dtype=np.float32)
        try:
            probs = np.asarray(self._query_fn(images), dtype=np.float32)
        except Exception as e:
            logger.error("Query to model %s failed: %s", self.model_id or "<anonymous>", e)
            raise TransportException(f"Query to model {self.model_id or '<anonymous>'} failed: {e}") from e
        if probs.shape != (images.shape[0], self.k):
            raise TransportException(f"Model {self.model_id} answered with shape {probs.shape}")
        with self._lock:
            self.query_count += images.shape[0]
        return probs

    def labels(self, images: np.ndarray) -> np.ndarray:
        return self.probabilities(images).argmax(axis=1)
