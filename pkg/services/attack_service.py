"""
Service layer for black-box stealing attacks and adversarial examples.

This module provides the AttackService class: label- and probability-based
model extraction through a QueryHandle, FGSM / PGD adversarial examples, and
adversarial extraction (label extraction followed by adversarial training
against the source's labels).
"""

import logging
from typing import Optional, Union

import numpy as np

from models.provenance import Provenance
from ndcore import derive_seed, one_hot
from schemas import AdvConfig, Dataset, ModelParams, ModelSpec, TrainConfig
from utils.exceptions import ConfigurationException
from .training_service import TrainingService
from .zoo_service import QueryHandle, ZooService

logger = logging.getLogger(__name__)

NO_PARAM_GRADS = frozenset()


def _as_targets(targets, k: int) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.ndim == 1:
        return one_hot(targets, k, np.float64)
    return targets.astype(np.float64)


def _perturb(network, params: dict, x: np.ndarray, targets: np.ndarray, adv: AdvConfig,
             targeted: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    direction = -1.0 if targeted else 1.0
    delta = np.zeros_like(x)
    for _ in range(adv.steps):
        logits, caches, _ = network.forward(x + delta, params)
        _, grad_logits = TrainingService.soft_target_loss(logits, targets)
        grad_x, _ = network.backward(grad_logits, caches, params, trainable=NO_PARAM_GRADS)
        delta = delta + np.float32(direction * adv.step) * np.sign(grad_x).astype(np.float32)
        delta = np.clip(delta, -adv.epsilon, adv.epsilon)
        delta = np.clip(x + delta, 0.0, 1.0) - x
    return np.clip(x + delta, 0.0, 1.0).astype(np.float32)


class AttackService:
    @staticmethod
    def adv_example(model: ModelParams, x: np.ndarray, target_probs, adv: AdvConfig,
                    targeted: bool = False) -> np.ndarray:
        """
        Craft L-infinity adversarial examples against a model.

        With steps == 1 this is FGSM, x + eps * sign(grad); with more steps it is
        projected gradient ascent inside the eps ball. The result is always
        clipped to [0, 1].

        Args:
            model (ModelParams): Model whose gradient is followed.
            x (np.ndarray): Clean inputs in [0, 1].
            target_probs: Reference labels (n,) or distributions (n, k) of the loss.
            adv (AdvConfig): Bound, step size and step count.
            targeted (bool): Descend towards target_probs instead of ascending away from them.

        Returns:
            np.ndarray: Adversarial inputs with |x_adv - x|_inf <= eps.
        """
        network = ZooService.build_network(model.spec)
        return _perturb(network, model.params, x, _as_targets(target_probs, model.spec.k), adv, targeted)

    @staticmethod
    def _handle(source: Union[QueryHandle, ModelParams]) -> QueryHandle:
        return source if isinstance(source, QueryHandle) else QueryHandle.from_model(source)

    @staticmethod
    def _query(source: QueryHandle, images, spec: ModelSpec) -> tuple:
        if spec.k != source.k:
            raise ConfigurationException(f"Stolen head has {spec.k} classes but the source answers {source.k}")
        images = images.images if isinstance(images, Dataset) else np.asarray(images, dtype=np.float32)
        return images, source.probabilities(images)

    @staticmethod
    def extract(source, images, spec: ModelSpec, cfg: TrainConfig, mode: str = "label",
                eval_ds: Optional[Dataset] = None, model_id: str = "") -> ModelParams:
        """
        Train a copy of a black-box source from its answers on attacker images.

        Label mode minimises CE against the source's predicted labels; prob mode
        minimises the distillation loss against its returned distributions.

        Args:
            source: QueryHandle (a ModelParams is wrapped into one).
            images: Attacker images (labels are ignored when a Dataset is given).
            spec (ModelSpec): Architecture of the copy; spec.k must match the source.
            cfg (TrainConfig): Optimisation and distillation settings.
            mode (str): "label" or "prob".

        Returns:
            ModelParams: The extracted model with its query count.

        Raises:
            ConfigurationException: On a class-count mismatch or an unknown mode.
            TrainingFailureException: If the copy diverges or collapses to a single class.
        """
        if mode not in ("label", "prob"):
            raise ConfigurationException(f"Unknown extraction mode: {mode}")
        handle = AttackService._handle(source)
        images, probs = AttackService._query(handle, images, spec)
        provenance = Provenance.EXTRACT_L if mode == "label" else Provenance.EXTRACT_P
        logger.info("Extracting %s (%s mode) with %d queries", spec.arch, mode, len(images))
        start = ZooService.init_model(spec, derive_seed(cfg.seed, "init"), provenance, handle.task_id, model_id)
        if mode == "label":
            params = TrainingService.fit(start, images, probs.argmax(axis=1), TrainingService.label_loss,
                                         cfg, cfg.seed)
        else:
            params = TrainingService.fit(start, images, probs,
                                         lambda logits, t: TrainingService.distillation_loss(logits, t, cfg),
                                         cfg, cfg.seed)
        if cfg.epochs > 0:
            TrainingService.check_not_collapsed(spec, params, images, probs, cfg.epochs - 1)
        return TrainingService._finish(start, params, None, eval_ds, query_count=len(images))

    @staticmethod
    def extract_adv(source, images, spec: ModelSpec, cfg: TrainConfig, adv: AdvConfig,
                    adv_cfg: Optional[TrainConfig] = None, eval_ds: Optional[Dataset] = None,
                    model_id: str = "") -> ModelParams:
        """
        Label extraction followed by adversarial training with the source's labels.

        Each adversarial epoch crafts examples against the current stolen model
        (ascending its loss w.r.t. the source label) and trains on the clean and
        adversarial batch together.

        Args:
            adv (AdvConfig): Attack bound, steps and the number of adversarial epochs.
            adv_cfg (TrainConfig): Optimiser for the adversarial phase; defaults to cfg.

        Returns:
            ModelParams: Model tagged extractAdv.
        """
        handle = AttackService._handle(source)
        images, probs = AttackService._query(handle, images, spec)
        labels = probs.argmax(axis=1)
        logger.info("Adversarial extraction of %s: %d queries, %d adversarial epochs",
                    spec.arch, len(images), adv.epochs)
        start = ZooService.init_model(spec, derive_seed(cfg.seed, "init"), Provenance.EXTRACT_ADV,
                                      handle.task_id, model_id)
        params = TrainingService.fit(start, images, labels, TrainingService.label_loss, cfg, cfg.seed)
        stolen = start.model_copy(update={"params": params})
        network = ZooService.build_network(spec)

        def with_adversarial(current: dict, x: np.ndarray, t: np.ndarray):
            x_adv = _perturb(network, current, x, one_hot(t, spec.k, np.float64), adv, targeted=False)
            return np.concatenate([x, x_adv]), np.concatenate([t, t])

        phase = (adv_cfg or cfg).model_copy(update={"epochs": adv.epochs})
        params = TrainingService.fit(stolen, images, labels, TrainingService.label_loss, phase, adv.seed,
                                     perturb=with_adversarial)
        if cfg.epochs + phase.epochs > 0:
            TrainingService.check_not_collapsed(spec, params, images, labels, cfg.epochs + phase.epochs - 1)
        return TrainingService._finish(start, params, None, eval_ds, query_count=len(images))
