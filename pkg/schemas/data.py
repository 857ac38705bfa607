"""
Schemas for synthetic tasks and labelled image collections.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ndcore import as_tensor, frozen


class TaskSpec(BaseModel):
    """
    Descriptor of a procedural image-classification task.
    """
    k: int = Field(10, ge=2)
    image_shape: Tuple[int, int, int] = (1, 16, 16)
    family: str = "shapes"
    sigma: float = Field(0.15, ge=0.0)
    ambiguity: float = Field(0.2, ge=0.0, le=1.0)
    jitter: bool = True
    template_offset: int = Field(0, ge=0)

    model_config = ConfigDict(frozen=True)

    @property
    def task_id(self) -> str:
        """Name of the label space: generator family, first template id and class count."""
        return f"{self.family}:{self.template_offset}:{self.k}"


class Dataset(BaseModel):
    """
    Labelled images of shape (n, c, h, w) with values in [0, 1].
    """
    images: np.ndarray
    labels: np.ndarray
    task_id: str
    k: int = Field(ge=2)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("images", mode="before")
    @classmethod
    def _freeze_images(cls, value):
        return frozen(as_tensor(value))

    @field_validator("labels", mode="before")
    @classmethod
    def _freeze_labels(cls, value):
        return frozen(np.ascontiguousarray(value, dtype=np.int64))

    @model_validator(mode="after")
    def _check_contents(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (n, c, h, w), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError("labels must hold one entry per image")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("images must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        return self

    @property
    def n(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(images=self.images[indices], labels=self.labels[indices], task_id=self.task_id, k=self.k)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)
