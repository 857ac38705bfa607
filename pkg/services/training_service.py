"""
Service layer for supervised training and white-box model modification.

This module provides the TrainingService class: the minibatch SGD loop, the
label and distillation losses, standard training, fine-tuning, activation-based
pruning and transfer to a new label space.
"""

import logging
import math
from typing import Callable, Optional

import numpy as np

from models.provenance import Provenance
from ndcore import Dense, derive_seed, make_rng, one_hot, sgd_step, softmax_t
from ndcore.functional import CLAMP
from schemas import Dataset, ModelParams, ModelSpec, TrainConfig
from utils.exceptions import ConfigurationException, TrainingFailureException
from .zoo_service import ZooService

logger = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray, np.ndarray], tuple]


class TrainingService:
    @staticmethod
    def label_loss(logits: np.ndarray, labels: np.ndarray):
        """
        Mean cross-entropy against hard labels.

        Returns:
            tuple: (loss as float64, gradient w.r.t. the logits as float32)
        """
        return TrainingService.soft_target_loss(logits, one_hot(labels, logits.shape[1], np.float64))

    @staticmethod
    def soft_target_loss(logits: np.ndarray, targets: np.ndarray):
        """
        Mean cross-entropy against target distributions.
        """
        probs = softmax_t(logits.astype(np.float64), 1.0)
        n = logits.shape[0]
        loss = float(-np.sum(targets * np.log(np.maximum(probs, CLAMP))) / n)
        return loss, ((probs - targets) / n).astype(np.float32)

    @staticmethod
    def distillation_loss(logits: np.ndarray, source_probs: np.ndarray, cfg: TrainConfig):
        """
        alpha * KL(source^T || student^T) + (1 - alpha) * CE(student, source label).

        The source's tempered distribution is rebuilt from its returned
        probabilities as softmax(log p / T), which equals softmax(z / T) for the
        source logits z. With distill_t2_scaling the KL term is multiplied by T^2.

        Returns:
            tuple: (loss as float64, gradient w.r.t. the logits as float32)
        """
        T = cfg.temperature
        n, k = logits.shape
        labels = source_probs.argmax(axis=1)
        ce_loss, ce_grad = TrainingService.label_loss(logits, labels)
        source_t = softmax_t(np.log(np.maximum(source_probs.astype(np.float64), CLAMP)), T)
        student_t = softmax_t(logits.astype(np.float64), T)
        scale = T * T if cfg.distill_t2_scaling else 1.0
        kl = float(np.sum(source_t * (np.log(np.maximum(source_t, CLAMP)) - np.log(np.maximum(student_t, CLAMP)))) / n)
        kl_grad = (student_t - source_t) / (T * n)
        loss = cfg.alpha * scale * kl + (1.0 - cfg.alpha) * ce_loss
        grad = cfg.alpha * scale * kl_grad + (1.0 - cfg.alpha) * ce_grad.astype(np.float64)
        return loss, grad.astype(np.float32)

    @staticmethod
    def fit(model: ModelParams, images: np.ndarray, targets: np.ndarray, loss_fn: LossFn, cfg: TrainConfig,
            seed: int, trainable: Optional[set] = None, perturb=None) -> dict:
        """
        Minibatch SGD with momentum over (images, targets).

        Args:
            model (ModelParams): Starting point; it is not modified.
            images (np.ndarray): Training inputs.
            targets (np.ndarray): Labels or target distributions, one per image.
            loss_fn: Callable (logits, targets) -> (loss, dlogits).
            cfg (TrainConfig): Epochs, batch size, lr and momentum.
            seed (int): Shuffling seed.
            trainable (set): Layer indices to update; None updates all.
            perturb: Optional callable (params, x, targets) -> (x, targets) applied per batch.

        Returns:
            dict: The trained parameter store.

        Raises:
            TrainingFailureException: If the loss becomes non-finite.
        """
        network = ZooService.build_network(model.spec)
        params = dict(model.params)
        velocity = {}
        rng = make_rng(derive_seed(seed, "shuffle"))
        n = len(images)
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                x, t = images[batch], targets[batch]
                if perturb is not None:
                    x, t = perturb(params, x, t)
                logits, caches, _ = network.forward(x, params)
                if not np.all(np.isfinite(logits)):
                    raise TrainingFailureException(epoch, "logits became non-finite")
                loss, grad_logits = loss_fn(logits, t)
                if not math.isfinite(loss):
                    raise TrainingFailureException(epoch)
                _, grads = network.backward(grad_logits, caches, params, trainable=trainable)
                params, velocity = sgd_step(params, grads, velocity, cfg.lr, cfg.momentum, cfg.clip_norm)
                total += loss * len(batch)
            logger.debug("epoch %d/%d loss %.4f", epoch + 1, cfg.epochs, total / max(n, 1))
        return params

    @staticmethod
    def check_not_collapsed(spec: ModelSpec, params: dict, images: np.ndarray, targets: np.ndarray,
                            epoch: int) -> None:
        """
        Reject a student that predicts one class for every input although its targets span several.

        Raises:
            TrainingFailureException: For a collapsed student.
        """
        expected = targets if targets.ndim == 1 else targets.argmax(axis=1)
        if len(np.unique(expected)) < 2:
            return
        predicted = np.unique(ZooService.build_network(spec).logits(images, params).argmax(axis=1))
        if len(predicted) == 1:
            raise TrainingFailureException(epoch, f"collapsed to predicting class {int(predicted[0])} for every input")

    @staticmethod
    def _finish(template: ModelParams, params: dict, train_ds: Optional[Dataset], eval_ds: Optional[Dataset],
                **updates) -> ModelParams:
        model = template.model_copy(update={"params": params, **updates})
        model = ModelParams(**{name: getattr(model, name) for name in ModelParams.model_fields})
        train_acc = None
        if train_ds is not None and train_ds.k == model.spec.k:
            train_acc = ZooService.accuracy(model, train_ds)
        heldout_acc = ZooService.accuracy(model, eval_ds) if eval_ds is not None else None
        return model.model_copy(update={"train_accuracy": train_acc, "heldout_accuracy": heldout_acc})

    @staticmethod
    def train(ds: Dataset, spec: ModelSpec, cfg: TrainConfig, seed: int, eval_ds: Optional[Dataset] = None,
              provenance: Provenance = Provenance.SOURCE, model_id: str = "") -> ModelParams:
        """
        Train a model from scratch with cross-entropy.

        Args:
            ds (Dataset): Training data; its class count must match spec.k.
            spec (ModelSpec): Architecture.
            cfg (TrainConfig): Optimisation settings.
            seed (int): Seed for initialisation and shuffling.
            eval_ds (Dataset): Optional held-out data for the recorded accuracy.
            provenance (Provenance): Tag of the trained model.
            model_id (str): Identifier used in reports.

        Returns:
            ModelParams: The trained model with recorded accuracies.
        """
        if ds.k != spec.k:
            raise ConfigurationException(f"Dataset has {ds.k} classes but the model expects {spec.k}")
        logger.info("Training %s model %s on %d samples (seed %d)", spec.arch, model_id or "<unnamed>", ds.n, seed)
        model = ZooService.init_model(spec, derive_seed(seed, "init"), provenance, ds.task_id, model_id)
        params = TrainingService.fit(model, ds.images, ds.labels, TrainingService.label_loss, cfg, seed)
        trained = TrainingService._finish(model, params, ds, eval_ds)
        logger.info("Model %s reached train=%.3f heldout=%s", model_id or "<unnamed>",
                    trained.train_accuracy, trained.heldout_accuracy)
        return trained

    @staticmethod
    def finetune(model: ModelParams, ds_attacker: Dataset, mode: str, cfg: TrainConfig,
                 eval_ds: Optional[Dataset] = None, model_id: str = "") -> ModelParams:
        """
        Fine-tune all layers (mode "all") or only the head (mode "last") on labelled data.

        Raises:
            ConfigurationException: If the data's label space differs from the model's.
        """
        if ds_attacker.task_id != model.task_id or ds_attacker.k != model.spec.k:
            raise ConfigurationException(
                f"Cannot fine-tune a {model.task_id} model on {ds_attacker.task_id} data")
        trainable = TrainingService._trainable(model, mode)
        params = TrainingService.fit(model, ds_attacker.images, ds_attacker.labels, TrainingService.label_loss,
                                     cfg, cfg.seed, trainable=trainable)
        provenance = Provenance.FINETUNE_A if mode == "all" else Provenance.FINETUNE_L
        return TrainingService._finish(model, params, ds_attacker, eval_ds, provenance=provenance,
                                       prune_ratio=None, model_id=model_id or model.model_id)

    @staticmethod
    def _trainable(model: ModelParams, mode: str):
        if mode == "all":
            return None
        if mode == "last":
            return {ZooService.build_network(model.spec).head_index}
        raise ConfigurationException(f"Unknown fine-tuning mode: {mode}")

    @staticmethod
    def prune_by_activation(model: ModelParams, activation_set, ratio: float, eval_ds: Optional[Dataset] = None,
                            model_id: str = "") -> ModelParams:
        """
        Zero the hidden units with the lowest mean absolute activation on a reference set.

        Every parametrised layer except the head is pruned: exactly floor(ratio * units)
        units per layer lose their incoming weights and bias.

        Args:
            model (ModelParams): Model to prune; it is not modified.
            activation_set: Images (n, c, h, w) or a Dataset the activations are measured on.
            ratio (float): Share of units to remove, in [0, 1).
            eval_ds (Dataset): Optional held-out data for the recorded accuracy.

        Returns:
            ModelParams: Pruned model tagged pruned(ratio).
        """
        if not 0 <= ratio < 1:
            raise ConfigurationException(f"Pruning ratio must lie in [0, 1), got {ratio}")
        images = (activation_set.images if isinstance(activation_set, Dataset)
                  else np.asarray(activation_set, dtype=np.float32))
        network = ZooService.build_network(model.spec)
        _, _, outputs = network.forward(images, model.params, keep_cache=False)
        params = dict(model.params)
        for index, layer in enumerate(network.layers):
            if not layer.prunable or index == network.head_index:
                continue
            follows_relu = index + 1 < len(network.layers) and network.layers[index + 1].kind == "relu"
            activation = np.abs(outputs[index + 1] if follows_relu else outputs[index]).astype(np.float64)
            axes = (0,) if activation.ndim == 2 else (0, 2, 3)
            scores = activation.mean(axis=axes)
            count = math.floor(ratio * len(scores) + 1e-9)
            if count == 0:
                continue
            pruned_units = np.argsort(scores, kind="stable")[:count]
            weight = np.array(params[f"{index}.weight"])
            bias = np.array(params[f"{index}.bias"])
            if isinstance(layer, Dense):
                weight[:, pruned_units] = 0.0
            else:
                weight[pruned_units] = 0.0
            bias[pruned_units] = 0.0
            params[f"{index}.weight"], params[f"{index}.bias"] = weight, bias
            logger.debug("Pruned %d/%d units of layer %d", count, len(scores), index)
        return TrainingService._finish(model, params, None, eval_ds, provenance=Provenance.PRUNED,
                                       prune_ratio=float(ratio), model_id=model_id or model.model_id)

    @staticmethod
    def transfer(model: ModelParams, new_ds: Dataset, mode: str, cfg: TrainConfig,
                 eval_ds: Optional[Dataset] = None, model_id: str = "") -> ModelParams:
        """
        Replace the head with a fresh k'-way head and fine-tune on a new task.

        Raises:
            ConfigurationException: If new_ds belongs to the model's own task.
        """
        if new_ds.task_id == model.task_id:
            raise ConfigurationException(f"Transfer needs a new task, got the source task {model.task_id}")
        trainable = TrainingService._trainable(model, mode)
        spec = model.spec.model_copy(update={"k": new_ds.k})
        network = ZooService.build_network(spec)
        head = network.head_index
        fresh = network.layers[head].init_params(make_rng(derive_seed(cfg.seed, "transfer-head")))
        params = dict(model.params)
        params[f"{head}.weight"], params[f"{head}.bias"] = fresh["weight"], fresh["bias"]
        start = ModelParams(spec=spec, params=params, provenance=model.provenance, prune_ratio=model.prune_ratio,
                            task_id=new_ds.task_id, model_id=model_id or model.model_id)
        trained = TrainingService.fit(start, new_ds.images, new_ds.labels, TrainingService.label_loss,
                                      cfg, cfg.seed, trainable=trainable)
        provenance = Provenance.TRANSFER_A if mode == "all" else Provenance.TRANSFER_L
        return TrainingService._finish(start, trained, new_ds, eval_ds, provenance=provenance, prune_ratio=None)
