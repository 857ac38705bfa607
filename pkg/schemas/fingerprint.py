"""
Schemas for augmentation records, model outputs, correlation matrices and fingerprints.
"""

from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ndcore import as_tensor, frozen

Kernel = Literal["cosine", "rbf"]
LabelMode = Literal["probability", "smooth"]

SYMMETRY_TOL = 1e-6
ROW_SUM_TOL = 1e-5


class CutMixRecord(BaseModel):
    """
    Mask, combination ratio and parent indices of one CutMix draw.
    """
    mask: np.ndarray
    alpha: float = Field(ge=0.0, le=1.0)
    parents: Tuple[int, int] = (0, 1)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("mask", mode="before")
    @classmethod
    def _freeze_mask(cls, value):
        return frozen(np.ascontiguousarray(value, dtype=np.float32))

    @model_validator(mode="after")
    def _check_alpha(self):
        if self.alpha != float(self.mask.sum()) / self.mask.size:
            raise ValueError("alpha must equal the mask's share of ones")
        return self


class OutputSet(BaseModel):
    """
    Outputs o_1..o_n of one model on the fingerprint inputs, shape (n, k).
    """
    outputs: np.ndarray
    kind: Literal["probability", "smooth-label", "raw"] = "probability"

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("outputs", mode="before")
    @classmethod
    def _freeze_outputs(cls, value):
        return frozen(as_tensor(value))

    @model_validator(mode="after")
    def _check_rows(self):
        if self.outputs.ndim != 2:
            raise ValueError(f"outputs must be (n, k), got {self.outputs.shape}")
        if self.kind != "raw" and self.outputs.size:
            sums = self.outputs.astype(np.float64).sum(axis=1)
            if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
                raise ValueError("probability rows must sum to 1")
        return self

    @property
    def n(self) -> int:
        return int(self.outputs.shape[0])


class CorrelationMatrix(BaseModel):
    """
    Pairwise sample-correlation matrix of one model.
    """
    matrix: np.ndarray
    kernel: Kernel = "cosine"
    delta: Optional[float] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("matrix", mode="before")
    @classmethod
    def _freeze_matrix(cls, value):
        return frozen(as_tensor(value))

    @model_validator(mode="after")
    def _check_invariants(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"correlation matrix must be square, got {m.shape}")
        if self.kernel == "rbf" and (self.delta is None or self.delta <= 0):
            raise ValueError("rbf matrices need a positive delta")
        if m.size:
            if np.max(np.abs(m - m.T)) >= SYMMETRY_TOL:
                raise ValueError("correlation matrix must be symmetric")
            if np.max(np.abs(np.diag(m) - 1.0)) > SYMMETRY_TOL:
                raise ValueError("correlation matrix diagonal must be 1")
            low = -1.0 if self.kernel == "cosine" else 0.0
            if m.min() < low - SYMMETRY_TOL or m.max() > 1.0 + SYMMETRY_TOL:
                raise ValueError(f"correlation entries must lie in [{low}, 1]")
        return self

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def kernel_id(self) -> str:
        return "cosine" if self.kernel == "cosine" else f"rbf({self.delta!r})"


class FingerprintRecord(BaseModel):
    """
    The defender's fingerprint: input set reference, source matrix and creation manifest.
    """
    input_path: str
    input_hash: str
    source: CorrelationMatrix
    manifest: dict = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @property
    def kernel_id(self) -> str:
        return self.source.kernel_id

    @property
    def n(self) -> int:
        return self.source.n
