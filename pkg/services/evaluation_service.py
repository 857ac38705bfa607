"""
Service layer for detection scoring.

This module provides the EvaluationService class: Mann-Whitney AUC, suspect
scoring against a fingerprint record, score reports with per-attack AUC cells,
the adversarial-example (ASR) baseline, the pruning and sample-count sweeps and
multi-run aggregation.
"""

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence

import numpy as np

from config import settings
from models.provenance import STOLEN_TAGS, Provenance, reference_group
from ndcore import derive_seed, make_rng
from schemas import (
    AdvConfig, AucCell, AucSummary, Dataset, FingerprintRecord, ModelParams, PruningCurve, PruningPoint,
    SampleCountCurve, SampleCountPoint, ScoreEntry, ScoreReport,
)
from utils.exceptions import ConfigurationException, GenerationException
from .attack_service import AttackService
from .fingerprint_service import FingerprintService
from .training_service import TrainingService
from .zoo_service import QueryHandle, ZooService

logger = logging.getLogger(__name__)

ORIENTATIONS = ("lower-is-stolen", "higher-is-stolen")
REPORT_COLUMNS = ("model_id", "tag", "kind", "score", "applicable", "manifest_hash")


def _base_tag(tag: str) -> Provenance:
    return Provenance(tag.split("(")[0])


def _handle(suspect) -> QueryHandle:
    return suspect if isinstance(suspect, QueryHandle) else QueryHandle.from_model(suspect)


class EvaluationService:
    @staticmethod
    def auc(irrelevant_scores: Sequence[float], stolen_scores: Sequence[float],
            orientation: str = "lower-is-stolen") -> float:
        """
        Fraction of (stolen, irrelevant) pairs ordered correctly; ties count 0.5.

        Args:
            irrelevant_scores: Scores of the reference group.
            stolen_scores: Scores of the stolen group.
            orientation (str): "lower-is-stolen" for distances, "higher-is-stolen" for ASR.

        Returns:
            float: AUC in [0, 1].

        Raises:
            ConfigurationException: If a group is empty or the orientation is unknown.
        """
        if orientation not in ORIENTATIONS:
            raise ConfigurationException(f"Unknown orientation: {orientation}")
        irrelevant = np.asarray(irrelevant_scores, dtype=np.float64)
        stolen = np.asarray(stolen_scores, dtype=np.float64)
        if irrelevant.size == 0 or stolen.size == 0:
            raise ConfigurationException("AUC needs non-empty stolen and irrelevant groups")
        if orientation == "higher-is-stolen":
            stolen, irrelevant = -stolen, -irrelevant
        better = np.sum(stolen[:, None] < irrelevant[None, :])
        ties = np.sum(stolen[:, None] == irrelevant[None, :])
        return float((better + 0.5 * ties) / (stolen.size * irrelevant.size))

    @staticmethod
    def score_suspects(record: FingerprintRecord, suspects: Iterable, inputs,
                       max_workers: Optional[int] = None) -> List[ScoreEntry]:
        """
        Correlation distance of every suspect to the source fingerprint.

        Suspects are queried concurrently; entries are returned sorted by model id.
        """
        handles = [_handle(suspect) for suspect in suspects]

        def score_one(handle: QueryHandle) -> ScoreEntry:
            distance = FingerprintService.score(record, handle, inputs)
            return ScoreEntry(model_id=handle.model_id, tag=handle.tag, score=distance)

        with ThreadPoolExecutor(max_workers=max_workers or settings.MAX_WORKERS) as pool:
            entries = list(pool.map(score_one, handles))
        return sorted(entries, key=lambda entry: entry.model_id)

    @staticmethod
    def build_report(mode: str, kernel: str, label_mode: str, manifest_hash: str, entries: List[ScoreEntry],
                     orientation: str = "lower-is-stolen", threshold: Optional[float] = None,
                     calibration: Sequence[ScoreEntry] = ()) -> ScoreReport:
        """
        Group scores by provenance tag and compute one AUC cell per stolen tag.

        Each stolen tag is compared with its reference group: irrelevant models
        for same-task attacks, irrelevantTransfer models for transfer attacks.
        A cell is inapplicable when either group has no scored model. The
        calibration entries that produced the threshold are kept alongside.
        """
        entries = sorted(entries, key=lambda entry: entry.model_id)
        scored = {}
        present = []
        for entry in entries:
            if entry.tag not in present:
                present.append(entry.tag)
            if entry.applicable and entry.score is not None:
                scored.setdefault(entry.tag, []).append(entry.score)
        stolen_tags = [tag for tag in present if _base_tag(tag) in STOLEN_TAGS]
        stolen_tags.sort(key=lambda tag: (STOLEN_TAGS.index(_base_tag(tag)), tag))
        cells = []
        for tag in stolen_tags:
            reference = reference_group(_base_tag(tag)).value
            stolen, irrelevant = scored.get(tag, []), scored.get(reference, [])
            if not stolen or not irrelevant:
                cells.append(AucCell(tag=tag, reference_tag=reference, n_stolen=len(stolen),
                                     n_reference=len(irrelevant), applicable=False))
                continue
            value = EvaluationService.auc(irrelevant, stolen, orientation)
            rate = None
            if threshold is not None:
                hits = [s < threshold if orientation == "lower-is-stolen" else s > threshold for s in stolen]
                rate = float(np.mean(hits))
            cells.append(AucCell(tag=tag, reference_tag=reference, auc=value, n_stolen=len(stolen),
                                 n_reference=len(irrelevant), inverted=value < 0.5, detection_rate=rate))
        return ScoreReport(mode=mode, kernel=kernel, label_mode=label_mode, manifest_hash=manifest_hash,
                           entries=entries, auc_table=cells, threshold=threshold,
                           calibration=sorted(calibration, key=lambda entry: entry.model_id))

    @staticmethod
    def generate_baseline_examples(source: ModelParams, candidates, n_adv: int, adv: AdvConfig, seed: int,
                                   attempt_factor: int = 10, batch_size: int = 64):
        """
        Targeted adversarial examples that move the source to its second most likely class.

        Candidates are visited in a seeded order; only examples that fool the
        source are kept.

        Returns:
            tuple: (examples (n_adv, c, h, w), target classes (n_adv,))

        Raises:
            GenerationException: If fewer than n_adv succeed within attempt_factor * n_adv attempts.
        """
        if n_adv < 20:
            raise ConfigurationException(f"n_adv must be at least 20, got {n_adv}")
        images = candidates.images if isinstance(candidates, Dataset) else np.asarray(candidates, np.float32)
        budget = min(len(images), attempt_factor * n_adv)
        order = make_rng(derive_seed(seed, "baseline-candidates")).permutation(len(images))[:budget]
        kept, targets = [], []
        for start in range(0, budget, batch_size):
            x = images[order[start:start + batch_size]]
            target = np.argsort(ZooService.logits(source, x), axis=1, kind="stable")[:, -2]
            x_adv = AttackService.adv_example(source, x, target, adv, targeted=True)
            fooled = ZooService.predict(source, x_adv) == target
            kept.extend(x_adv[fooled])
            targets.extend(target[fooled])
            if len(kept) >= n_adv:
                break
        if len(kept) < n_adv:
            raise GenerationException(len(kept), n_adv)
        logger.info("Generated %d source-fooling examples from %d attempts", n_adv, min(budget, start + batch_size))
        return np.stack(kept[:n_adv]), np.asarray(targets[:n_adv], dtype=np.int64)

    @staticmethod
    def baseline_asr(source: ModelParams, suspects: Iterable, candidates, n_adv: int, adv: AdvConfig, seed: int,
                     attempt_factor: int = 10, manifest_hash: str = "") -> ScoreReport:
        """
        Point-wise adversarial-example baseline.

        The score of a suspect is the fraction of the source-fooling examples on
        which it predicts the source's (wrong) target class. Suspects with a
        different label space are marked inapplicable.

        Returns:
            ScoreReport: ASR entries and the AUC table (higher is stolen).
        """
        examples, targets = EvaluationService.generate_baseline_examples(
            source, candidates, n_adv, adv, seed, attempt_factor)
        entries = []
        for suspect in map(_handle, suspects):
            if suspect.task_id != source.task_id or suspect.k != source.spec.k:
                entries.append(ScoreEntry(model_id=suspect.model_id, tag=suspect.tag, kind="asr", applicable=False))
                continue
            rate = float(np.mean(suspect.labels(examples) == targets))
            entries.append(ScoreEntry(model_id=suspect.model_id, tag=suspect.tag, score=rate, kind="asr"))
        return EvaluationService.build_report("baseline-asr", "none", "label", manifest_hash, entries,
                                              orientation="higher-is-stolen")

    @staticmethod
    def pruning_sweep(source: ModelParams, ratios: Sequence[float], record: FingerprintRecord, inputs,
                      activation_set, eval_ds: Dataset, irrelevant: Iterable) -> PruningCurve:
        """
        Accuracy and correlation distance of the source pruned at each ratio.

        Returns:
            PruningCurve: Aligned points plus the mean irrelevant distance.
        """
        ratios = list(ratios)
        if ratios != sorted(ratios) or any(r < 0 or r >= 1 for r in ratios):
            raise ConfigurationException("pruning ratios must be sorted ascending and lie in [0, 1)")
        points = []
        for ratio in ratios:
            pruned = TrainingService.prune_by_activation(source, activation_set, ratio)
            points.append(PruningPoint(ratio=ratio, accuracy=ZooService.accuracy(pruned, eval_ds),
                                       distance=FingerprintService.score(record, pruned, inputs)))
            logger.info("Pruning ratio %.2f: accuracy %.3f distance %.4f", ratio, points[-1].accuracy,
                        points[-1].distance)
        reference = [FingerprintService.score(record, model, inputs) for model in irrelevant]
        if not reference:
            raise ConfigurationException("pruning sweep needs irrelevant models")
        return PruningCurve(points=points, irrelevant_mean=float(np.mean(reference)), kernel=record.kernel_id)

    @staticmethod
    def sample_count_sweep(counts: Sequence[int], source, suspects: Sequence, pool: Dataset,
                           kernel: str = "cosine", label_mode: str = "probability", eps: float = 0.1,
                           delta="median") -> SampleCountCurve:
        """
        SAC-w AUC per stolen tag with the input set truncated to each count.

        Raises:
            ConfigurationException: If a count is below 10 or exceeds the pool.
        """
        for count in counts:
            if count < 10 or count > pool.n:
                raise ConfigurationException(f"sample count {count} outside [10, {pool.n}]")
        handles = [_handle(suspect) for suspect in suspects]
        points = []
        for count in counts:
            inputs = pool.subset(np.arange(count))
            matrix = FingerprintService.fingerprint_model(source, inputs, kernel, label_mode, eps, delta)
            record = FingerprintRecord(input_path="", input_hash="", source=matrix,
                                       manifest={"label_mode": label_mode, "eps": eps})
            entries = EvaluationService.score_suspects(record, handles, inputs)
            report = EvaluationService.build_report("sac-w", matrix.kernel_id, label_mode, "", entries)
            points.extend(SampleCountPoint(n_samples=count, tag=cell.tag, auc=cell.auc)
                          for cell in report.auc_table if cell.applicable)
        return SampleCountCurve(points=points, pool_size=pool.n)

    @staticmethod
    def aggregate_reports(reports: Sequence[ScoreReport]) -> List[AucSummary]:
        """
        Mean, min and max AUC per tag over several runs.
        """
        values = {}
        for report in reports:
            for cell in report.auc_table:
                bucket = values.setdefault(cell.tag, [])
                if cell.applicable and cell.auc is not None:
                    bucket.append(cell.auc)
        return [AucSummary(tag=tag, mean=float(np.mean(aucs)) if aucs else None,
                           min=min(aucs) if aucs else None, max=max(aucs) if aucs else None, runs=len(aucs))
                for tag, aucs in values.items()]

    @staticmethod
    def rows_csv(rows: Iterable[Sequence]) -> str:
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerows(rows)
        return buffer.getvalue()

    @staticmethod
    def report_csv(report: ScoreReport) -> str:
        """
        Per-model scores as a delimited table carrying the manifest hash.
        """
        rows = [REPORT_COLUMNS]
        for entry in report.entries:
            score = "" if entry.score is None else repr(entry.score)
            rows.append((entry.model_id, entry.tag, entry.kind, score, entry.applicable, report.manifest_hash))
        return EvaluationService.rows_csv(rows)
