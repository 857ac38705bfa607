"""
Schemas for the experiment manifest.

The manifest is the single structured-text description of an experiment: task,
zoo composition, attack and fingerprint configurations, and the content hashes
of every artifact a run produced.
"""

from typing import Dict, List, Literal, Union

from pydantic import BaseModel, Field, field_validator

from utils.hashing import sha256_bytes
from .data import TaskSpec
from .fingerprint import Kernel, LabelMode
from .model import ARCHITECTURES, AdvConfig, Architecture, TrainConfig

FingerprintMode = Literal["sac-w", "sac-m", "sac-normal", "sac-source", "baseline-asr"]


class DataConfig(BaseModel):
    """
    Task and dataset sizes. Candidates are defender-owned samples no model is trained on;
    the misclassification-based fingerprints select their inputs from them.
    """
    task: TaskSpec = Field(default_factory=TaskSpec)
    n_train: int = 6000
    n_test: int = 2000
    n_transfer: int = 3000
    n_candidates: int = 3000


class ZooConfig(BaseModel):
    """
    Zoo composition: one source, irrelevant models per architecture, surrogates and attack models.
    Calibration models are held-out irrelevant and extractAdv models that only set the detection threshold.
    """
    source_arch: Architecture = "cnn-s"
    irrelevant_archs: List[Architecture] = Field(default_factory=lambda: list(ARCHITECTURES))
    irrelevant_per_arch: int = Field(5, ge=1)
    transfer_irrelevant_per_arch: int = Field(2, ge=1)
    surrogate_archs: List[Architecture] = Field(default_factory=lambda: list(ARCHITECTURES))
    surrogates: int = Field(5, ge=1)
    attack_models: int = Field(5, ge=1)
    extract_archs: List[Architecture] = Field(default_factory=lambda: list(ARCHITECTURES))
    prune_ratio: float = Field(0.3, ge=0.0, lt=1.0)
    activation_size: int = Field(256, ge=1)
    filter_models: int = Field(4, ge=1)
    calibration_models: int = Field(2, ge=1)


class AttackConfigs(BaseModel):
    train: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=12, lr=0.05))
    finetune: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=5, lr=0.01))
    extract: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=12, lr=0.05))
    surrogate: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=10, lr=0.02))
    transfer: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=8, lr=0.02))
    adv: AdvConfig = Field(default_factory=AdvConfig)
    adv_train: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=3, lr=0.01))


class SacmConfig(BaseModel):
    n_source: int = Field(100, ge=2)
    rounds: int = Field(1, ge=0)
    use_flip: bool = True
    flip_mode: Literal["transpose", "mirror"] = "transpose"
    n_out: int = Field(200, ge=1)


class BaselineConfig(BaseModel):
    n_adv: int = Field(100, ge=20)
    attempt_factor: int = Field(10, ge=1)
    adv: AdvConfig = Field(default_factory=lambda: AdvConfig(epsilon=0.15, step_size=0.02, steps=20))


class FingerprintConfig(BaseModel):
    kernel: Kernel = "cosine"
    label_mode: LabelMode = "probability"
    smooth_eps: float = Field(0.1, ge=0.0, le=1.0)
    rbf_delta: Union[float, Literal["median"]] = "median"
    n_inputs: int = Field(128, ge=10)
    filter_irrelevant: bool = False
    sacm: SacmConfig = Field(default_factory=SacmConfig)
    baseline: BaselineConfig = Field(default_factory=BaselineConfig)


class SweepConfig(BaseModel):
    pruning_ratios: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    sample_counts: List[int] = Field(default_factory=lambda: [10, 25, 50, 100, 128])

    @field_validator("pruning_ratios")
    @classmethod
    def _sorted_ratios(cls, value):
        if value != sorted(value) or any(r < 0 or r >= 1 for r in value):
            raise ValueError("pruning ratios must be sorted ascending and lie in [0, 1)")
        return value


class ExperimentManifest(BaseModel):
    """
    Complete, replayable description of one experiment.
    """
    suite_version: str = "1.0.0"
    master_seed: int = 20240101
    data: DataConfig = Field(default_factory=DataConfig)
    zoo: ZooConfig = Field(default_factory=ZooConfig)
    attacks: AttackConfigs = Field(default_factory=AttackConfigs)
    fingerprint: FingerprintConfig = Field(default_factory=FingerprintConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    artifacts: Dict[str, str] = Field(default_factory=dict)

    def content_hash(self) -> str:
        """Hash of the experiment definition; produced-artifact hashes are excluded."""
        return sha256_bytes(self.model_dump_json(exclude={"artifacts"}).encode("utf-8"))
