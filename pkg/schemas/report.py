"""
Schemas for detection scores, AUC tables and sweep curves.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

ScoreKind = Literal["corr-distance", "asr"]


class ScoreEntry(BaseModel):
    """
    Raw fingerprint score of one suspect model.
    """
    model_id: str
    tag: str
    score: Optional[float] = None
    kind: ScoreKind = "corr-distance"
    applicable: bool = True

    model_config = ConfigDict(protected_namespaces=())


class AucCell(BaseModel):
    """
    Detection AUC of one stolen tag against its irrelevant reference group.
    """
    tag: str
    reference_tag: str
    auc: Optional[float] = Field(None, ge=0.0, le=1.0)
    n_stolen: int = 0
    n_reference: int = 0
    applicable: bool = True
    inverted: bool = False
    detection_rate: Optional[float] = None


class ScoreReport(BaseModel):
    """
    Per-model scores and the per-attack AUC table of one fingerprinting run.
    """
    mode: str
    kernel: str
    label_mode: str
    manifest_hash: str
    entries: List[ScoreEntry] = Field(default_factory=list)
    auc_table: List[AucCell] = Field(default_factory=list)
    threshold: Optional[float] = None
    calibration: List[ScoreEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_unique_models(self):
        ids = [entry.model_id for entry in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("every scored model must appear exactly once")
        return self

    def cell(self, tag: str) -> Optional[AucCell]:
        return next((cell for cell in self.auc_table if cell.tag == tag), None)

    def scores(self, tag: str) -> List[float]:
        return [entry.score for entry in self.entries if entry.tag == tag and entry.score is not None]


class AucSummary(BaseModel):
    """
    AUC of one tag aggregated over several runs.
    """
    tag: str
    mean: Optional[float] = None
    min: Optional[float] = None
    max: Optional[float] = None
    runs: int = 0


class PruningPoint(BaseModel):
    ratio: float
    accuracy: float
    distance: float


class PruningCurve(BaseModel):
    """
    Accuracy and correlation distance of the pruned source per ratio.
    """
    points: List[PruningPoint]
    irrelevant_mean: float
    kernel: str


class SampleCountPoint(BaseModel):
    n_samples: int
    tag: str
    auc: float


class SampleCountCurve(BaseModel):
    points: List[SampleCountPoint]
    pool_size: int
