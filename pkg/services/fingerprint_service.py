"""
Service layer for sample-correlation fingerprints.

This module provides the FingerprintService class: the cosine and RBF
correlation kernels, the correlation distance, smooth labels, surrogate
training, the input-selection rules (misclassified by source and surrogates,
misclassified by the source only, plain samples), fingerprint records and the
detection threshold.
"""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from models.provenance import Provenance
from ndcore import check_finite, make_rng, derive_seed
from schemas import (
    CorrelationMatrix, Dataset, FingerprintRecord, ModelParams, ModelSpec, OutputSet, TrainConfig,
)
from utils.exceptions import (
    CheckpointFormatException, ConfigurationException, InsufficientSamplesException,
    InvalidInputException, LabelIndexException,
)
from utils.hashing import sha256_file
from .attack_service import AttackService
from .zoo_service import QueryHandle, ZooService

logger = logging.getLogger(__name__)

MIN_SELECTED = 10

Suspect = Union[QueryHandle, ModelParams]


def _rows(outputs) -> np.ndarray:
    rows = outputs.outputs if isinstance(outputs, OutputSet) else np.asarray(outputs)
    if rows.ndim != 2:
        raise InvalidInputException(f"outputs must be (n, k), got {rows.shape}")
    check_finite(rows, "outputs")
    return rows.astype(np.float64)


def _symmetric(matrix: np.ndarray, low: float) -> np.ndarray:
    matrix = np.clip((matrix + matrix.T) / 2.0, low, 1.0)
    np.fill_diagonal(matrix, 1.0)
    return matrix


class FingerprintService:
    @staticmethod
    def cosine_corr(outputs) -> CorrelationMatrix:
        """
        C_ij = <o_i, o_j> / (|o_i| |o_j|).

        Raises:
            InvalidInputException: If a row is all zeros.
        """
        rows = _rows(outputs)
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0):
            raise InvalidInputException(f"output row {int(np.argmin(norms))} is all zeros")
        unit = rows / norms[:, None]
        return CorrelationMatrix(matrix=_symmetric(unit @ unit.T, -1.0), kernel="cosine")

    @staticmethod
    def resolve_delta(outputs, delta: Union[float, str] = "median") -> float:
        """
        Resolve the RBF bandwidth; "median" is the median pairwise L2 distance.

        Raises:
            ConfigurationException: If the resolved bandwidth is not positive.
        """
        if delta == "median":
            distances = pdist(_rows(outputs), "euclidean")
            resolved = float(np.median(distances)) if distances.size else 0.0
            if resolved <= 0:
                raise ConfigurationException("median pairwise distance is 0; all outputs are identical")
            return resolved
        if isinstance(delta, str) or delta <= 0:
            raise ConfigurationException(f"rbf delta must be positive or 'median', got {delta!r}")
        return float(delta)

    @staticmethod
    def rbf_corr(outputs, delta: Union[float, str] = "median") -> CorrelationMatrix:
        """
        C_ij = exp(-|o_i - o_j|^2 / (2 delta^2)).
        """
        rows = _rows(outputs)
        delta = FingerprintService.resolve_delta(rows, delta)
        squared = squareform(pdist(rows, "sqeuclidean")) if len(rows) > 1 else np.zeros((len(rows),) * 2)
        return CorrelationMatrix(matrix=_symmetric(np.exp(-squared / (2.0 * delta ** 2)), 0.0),
                                 kernel="rbf", delta=delta)

    @staticmethod
    def correlate(outputs, kernel: str = "cosine", delta: Union[float, str] = "median") -> CorrelationMatrix:
        if kernel == "cosine":
            return FingerprintService.cosine_corr(outputs)
        if kernel == "rbf":
            return FingerprintService.rbf_corr(outputs, delta)
        raise ConfigurationException(f"Unknown kernel: {kernel}")

    @staticmethod
    def corr_distance(a: CorrelationMatrix, b: CorrelationMatrix) -> float:
        """
        Mean absolute entrywise difference |Ca - Cb|_1 / n^2.

        Raises:
            ConfigurationException: If sizes or kernel ids differ.
        """
        if a.n != b.n:
            raise ConfigurationException(f"cannot compare {a.n}x{a.n} with {b.n}x{b.n} matrices")
        if a.kernel_id != b.kernel_id:
            raise ConfigurationException(f"cannot compare kernels {a.kernel_id} and {b.kernel_id}")
        if a.n == 0:
            return 0.0
        return float(np.mean(np.abs(a.matrix.astype(np.float64) - b.matrix.astype(np.float64))))

    @staticmethod
    def smooth_label(pred, k: int, eps: float) -> np.ndarray:
        """
        (1 - eps) * onehot(pred) + eps / k, for one class index or an array of them.

        Raises:
            ConfigurationException: If eps lies outside [0, 1].
            LabelIndexException: If a prediction is out of range.
        """
        if not 0.0 <= eps <= 1.0:
            raise ConfigurationException(f"smoothing eps must lie in [0, 1], got {eps}")
        pred = np.asarray(pred)
        if np.any(pred < 0) or np.any(pred >= k):
            raise LabelIndexException(f"prediction {pred} out of range for {k} classes")
        hot = np.eye(k, dtype=np.float64)[pred.astype(np.int64)]
        return (1.0 - eps) * hot + eps / k

    @staticmethod
    def train_surrogates(source: Suspect, ds_defender: Dataset, m: int, specs: Sequence[ModelSpec],
                         cfg: TrainConfig, seeds: Sequence[int],
                         eval_ds: Optional[Dataset] = None) -> List[ModelParams]:
        """
        Distil m surrogates from the source on defender data (probability extraction).

        Architectures cycle through `specs`; surrogate i uses seeds[i].

        Returns:
            list: Models tagged surrogate.
        """
        if m < 1:
            raise ConfigurationException("at least one surrogate is required")
        if not specs or len(seeds) < m:
            raise ConfigurationException(f"need architectures and {m} seeds, got {len(seeds)} seeds")
        surrogates = []
        for index in range(m):
            spec = specs[index % len(specs)]
            model = AttackService.extract(source, ds_defender.images, spec,
                                          cfg.model_copy(update={"seed": seeds[index]}), mode="prob",
                                          eval_ds=eval_ds, model_id=f"surrogate-{index}")
            surrogates.append(model.model_copy(update={"provenance": Provenance.SURROGATE}))
            logger.info("Surrogate %d (%s) trained", index, spec.arch)
        return surrogates

    @staticmethod
    def _predict(model: Suspect, images: np.ndarray) -> np.ndarray:
        if isinstance(model, QueryHandle):
            return model.labels(images)
        return ZooService.predict(model, images)

    @staticmethod
    def _take(ds: Dataset, mask: np.ndarray, n_max: int) -> Dataset:
        selected = np.flatnonzero(mask)
        if len(selected) < MIN_SELECTED:
            raise InsufficientSamplesException(len(selected), MIN_SELECTED)
        logger.info("Selected %d of %d qualifying samples", min(len(selected), n_max), len(selected))
        return ds.subset(selected[:n_max])

    @staticmethod
    def misclassified_mask(ds_defender: Dataset, source: Suspect, surrogates: Sequence[Suspect],
                           irrelevant_filter: Optional[Sequence[Suspect]] = None) -> np.ndarray:
        """
        Samples misclassified by the source and every surrogate, and (if given)
        classified correctly by every filter model.
        """
        mask = FingerprintService._predict(source, ds_defender.images) != ds_defender.labels
        for surrogate in surrogates:
            mask &= FingerprintService._predict(surrogate, ds_defender.images) != ds_defender.labels
        for model in irrelevant_filter or ():
            mask &= FingerprintService._predict(model, ds_defender.images) == ds_defender.labels
        return mask

    @staticmethod
    def select_misclassified(ds_defender: Dataset, source: Suspect, surrogates: Sequence[Suspect],
                             irrelevant_filter: Optional[Sequence[Suspect]] = None,
                             n_max: int = 128) -> Dataset:
        """
        Build the SAC-w input set.

        Args:
            ds_defender (Dataset): Candidate samples with their true labels.
            source: The source model.
            surrogates: Non-empty list of surrogate models.
            irrelevant_filter: Optional models that must classify every kept sample correctly.
            n_max (int): Maximum size; the first n_max qualifying samples in index order are kept.

        Returns:
            Dataset: The selected samples.

        Raises:
            ConfigurationException: If no surrogates are given.
            InsufficientSamplesException: If fewer than 10 samples qualify.
        """
        if not surrogates:
            raise ConfigurationException("select_misclassified needs at least one surrogate")
        mask = FingerprintService.misclassified_mask(ds_defender, source, surrogates, irrelevant_filter)
        return FingerprintService._take(ds_defender, mask, n_max)

    @staticmethod
    def select_source_misclassified(ds: Dataset, source: Suspect, n_max: int = 128) -> Dataset:
        """
        Samples misclassified by the source alone, without surrogates.
        """
        mask = FingerprintService._predict(source, ds.images) != ds.labels
        return FingerprintService._take(ds, mask, n_max)

    @staticmethod
    def select_normal(ds: Dataset, n_max: int, seed: int) -> Dataset:
        """
        A seeded sample of plain defender data, in index order.
        """
        if ds.n < MIN_SELECTED:
            raise InsufficientSamplesException(ds.n, MIN_SELECTED)
        order = make_rng(derive_seed(seed, "select-normal")).permutation(ds.n)[:n_max]
        return ds.subset(np.sort(order))

    @staticmethod
    def outputs(suspect: Suspect, inputs, label_mode: str = "probability", eps: float = 0.1) -> OutputSet:
        """
        Query a suspect on the fingerprint inputs.

        Probability mode keeps the returned distribution; smooth mode only uses
        the predicted label and replaces it with its smooth label.
        """
        handle = suspect if isinstance(suspect, QueryHandle) else QueryHandle.from_model(suspect)
        images = inputs.images if isinstance(inputs, Dataset) else np.asarray(inputs, dtype=np.float32)
        if len(images) == 0:
            raise InvalidInputException("fingerprint inputs are empty")
        if label_mode == "probability":
            return OutputSet(outputs=handle.probabilities(images), kind="probability")
        if label_mode == "smooth":
            rows = FingerprintService.smooth_label(handle.labels(images), handle.k, eps)
            return OutputSet(outputs=rows, kind="smooth-label")
        raise ConfigurationException(f"Unknown label mode: {label_mode}")

    @staticmethod
    def fingerprint_model(suspect: Suspect, inputs, kernel: str = "cosine", label_mode: str = "probability",
                          eps: float = 0.1, delta: Union[float, str] = "median") -> CorrelationMatrix:
        """
        Correlation matrix of a suspect on the fingerprint inputs.

        Suspects with a different class count still yield an n x n matrix.

        Raises:
            TransportException: If the suspect cannot be queried.
        """
        outputs = FingerprintService.outputs(suspect, inputs, label_mode, eps)
        return FingerprintService.correlate(outputs, kernel, delta)

    @staticmethod
    def build_record(source: Suspect, inputs: Dataset, input_path, kernel: str = "cosine",
                     label_mode: str = "probability", eps: float = 0.1,
                     delta: Union[float, str] = "median", manifest: Optional[dict] = None) -> FingerprintRecord:
        """
        Fingerprint the source on a persisted input set.

        The RBF bandwidth is resolved once from the source outputs and recorded in
        the kernel id, so every suspect is scored with the same kernel.

        Args:
            source: The source model.
            inputs (Dataset): The fingerprint inputs, already written to input_path.
            input_path: Location of the input file; its hash is recorded.
            manifest (dict): Creation details (seeds, selection mode).

        Returns:
            FingerprintRecord: The record.
        """
        matrix = FingerprintService.fingerprint_model(source, inputs, kernel, label_mode, eps, delta)
        details = {"label_mode": label_mode, "eps": eps, **(manifest or {})}
        return FingerprintRecord(input_path=str(input_path), input_hash=sha256_file(input_path),
                                 source=matrix, manifest=details)

    @staticmethod
    def verify_record(record: FingerprintRecord) -> None:
        """
        Recompute the input-set hash of a record.

        Raises:
            CheckpointFormatException: If the input file is missing or altered.
        """
        try:
            actual = sha256_file(record.input_path)
        except FileNotFoundError as e:
            raise CheckpointFormatException(f"fingerprint inputs missing: {record.input_path}") from e
        if actual != record.input_hash:
            raise CheckpointFormatException(f"fingerprint inputs {record.input_path} do not match the record hash")

    @staticmethod
    def score(record: FingerprintRecord, suspect: Suspect, inputs) -> float:
        """
        Correlation distance between a suspect and the recorded source fingerprint.
        """
        outputs = FingerprintService.outputs(suspect, inputs, record.manifest.get("label_mode", "probability"),
                                             record.manifest.get("eps", 0.1))
        return FingerprintService.score_outputs(record, outputs)

    @staticmethod
    def score_outputs(record: FingerprintRecord, outputs: OutputSet) -> float:
        """
        Correlation distance of outputs a suspect produced elsewhere on the recorded inputs.

        Raises:
            ConfigurationException: If the row count differs from the fingerprint size.
        """
        if outputs.n != record.n:
            raise ConfigurationException(f"{outputs.n} output rows for a fingerprint of {record.n} inputs")
        delta = record.source.delta if record.source.kernel == "rbf" else "median"
        matrix = FingerprintService.correlate(outputs, record.source.kernel, delta)
        return FingerprintService.corr_distance(record.source, matrix)

    @staticmethod
    def choose_threshold(irrelevant_scores: Sequence[float], extract_adv_scores: Sequence[float]) -> float:
        """
        d = (mean(irrelevant) + mean(extractAdv)) / 2.

        Raises:
            ConfigurationException: If either list is empty.
        """
        if len(irrelevant_scores) == 0 or len(extract_adv_scores) == 0:
            raise ConfigurationException("threshold needs irrelevant and extractAdv scores")
        return (float(np.mean(irrelevant_scores)) + float(np.mean(extract_adv_scores))) / 2.0
