"""
Schemas for model architectures, parameter stores and training configurations.
"""

from typing import Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.provenance import Provenance
from ndcore import frozen

Architecture = Literal["mlp-s", "mlp-w", "cnn-s", "cnn-p"]
ARCHITECTURES = ("mlp-s", "mlp-w", "cnn-s", "cnn-p")


class ModelSpec(BaseModel):
    """
    Architecture descriptor: architecture id, per-sample input shape and class count.
    """
    arch: Architecture
    input_shape: Tuple[int, int, int] = (1, 16, 16)
    k: int = Field(10, ge=2)

    model_config = ConfigDict(frozen=True)


class ModelParams(BaseModel):
    """
    Flat parameter store keyed by "<layer index>.<name>" plus provenance and metrics.
    """
    spec: ModelSpec
    params: Dict[str, np.ndarray]
    provenance: Provenance
    prune_ratio: Optional[float] = None
    task_id: str
    model_id: str = ""
    train_accuracy: Optional[float] = None
    heldout_accuracy: Optional[float] = None
    query_count: int = 0

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, protected_namespaces=())

    @field_validator("params", mode="before")
    @classmethod
    def _freeze_params(cls, value):
        return {key: frozen(np.ascontiguousarray(array, dtype=np.float32)) for key, array in value.items()}

    @model_validator(mode="after")
    def _check_pruning(self):
        if (self.provenance == Provenance.PRUNED) != (self.prune_ratio is not None):
            raise ValueError("prune_ratio is set exactly for pruned models")
        return self

    @property
    def tag(self) -> str:
        if self.provenance == Provenance.PRUNED:
            return f"pruned({self.prune_ratio:g})"
        return self.provenance.value

    def mutable_params(self) -> dict:
        """Writable copies of the parameters, for training loops."""
        return {key: np.array(value) for key, value in self.params.items()}


class TrainConfig(BaseModel):
    """
    Optimisation settings shared by training, fine-tuning and extraction.
    """
    epochs: int = Field(10, ge=0)
    batch_size: int = Field(64, ge=1)
    lr: float = Field(0.05, ge=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    alpha: float = Field(0.9, ge=0.0, le=1.0)
    temperature: float = Field(20.0, gt=0.0)
    distill_t2_scaling: bool = True
    clip_norm: float = Field(5.0, ge=0.0)
    seed: int = 0

    model_config = ConfigDict(frozen=True)


class AdvConfig(BaseModel):
    """
    L-infinity attack settings: steps == 1 is FGSM, steps > 1 is PGD.
    """
    epsilon: float = Field(8.0 / 255.0, gt=0.0)
    step_size: Optional[float] = Field(None, gt=0.0)
    steps: int = Field(1, ge=1)
    epochs: int = Field(3, ge=0)
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_step(self):
        if self.step_size is not None and self.step_size > self.epsilon:
            raise ValueError("step_size must not exceed epsilon")
        return self

    @property
    def step(self) -> float:
        """FGSM always moves by epsilon; step_size only applies to PGD."""
        if self.steps == 1:
            return self.epsilon
        if self.step_size is not None:
            return self.step_size
        return min(self.epsilon, 2.5 * self.epsilon / self.steps)
