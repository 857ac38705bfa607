"""
Controller layer for experiment orchestration.

This module defines the ExperimentController class which turns a manifest into
jobs (datasets, the model zoo, fingerprints, sweeps and reports), runs them on a
bounded worker pool, records them in the workspace ledger and skips jobs whose
artifacts are already present and intact.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from config import settings
from models import Provenance, STOLEN_TAGS
from ndcore import derive_seed, make_rng
from schemas import Dataset, ExperimentManifest, ModelParams, ModelSpec, ScoreReport
from services import (
    AttackService, AugmentService, DataService, EvaluationService, FingerprintService, JobService,
    QueryHandle, StorageService, TrainingService, ZooService,
)
from utils.database import get_db
from utils.exceptions import ConfigurationException, JobFailedException
from utils.hashing import sha256_file

logger = logging.getLogger(__name__)

SUSPECT_TAGS = {Provenance.IRRELEVANT, Provenance.IRRELEVANT_TRANSFER, *STOLEN_TAGS}
LABEL_MODES = {"prob": "probability", "smooth": "smooth"}
DATASETS = ("defender", "attacker", "validation", "test", "candidates", "transfer-train", "transfer-test")


class Job(BaseModel):
    """
    One unit of scheduled work producing exactly one artifact.
    """
    job_id: str
    kind: str
    tag: str
    seed: int
    run: Callable[[], object]

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class PlannedModel(BaseModel):
    job_id: str
    provenance: Provenance
    arch: str
    index: int
    calibration: bool = False


def load_manifest(path: Path) -> ExperimentManifest:
    """
    Read a manifest, or write and return the default one if the file is absent.

    Raises:
        ConfigurationException: If the file is not a valid manifest.
    """
    path = Path(path)
    if not path.is_file():
        manifest = ExperimentManifest()
        StorageService.write_text(path, manifest.model_dump_json(indent=2))
        logger.info("No manifest at %s; wrote the default manifest", path)
        return manifest
    try:
        return ExperimentManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigurationException(f"Invalid manifest {path}: {e}") from e


class ExperimentController:
    """
    Controller for the zoo, fingerprint, sweep and report commands of one workspace.
    """

    def __init__(self, workspace: Path, manifest: ExperimentManifest, manifest_path: Optional[Path] = None,
                 max_workers: Optional[int] = None):
        self.workspace = Path(workspace)
        self.manifest = manifest
        self.manifest_path = Path(manifest_path) if manifest_path else self.workspace / "manifest.json"
        self.max_workers = max_workers or settings.MAX_WORKERS
        self.database_url = f"sqlite:///{(self.workspace / settings.DATABASE_NAME).resolve()}"
        self.jobs_run: List[str] = []

    # Paths and seeds

    def dataset_path(self, name: str) -> Path:
        return self.workspace / "data" / f"{name}.sacd"

    def model_path(self, job_id: str) -> Path:
        return self.workspace / "models" / f"{job_id}.sacm"

    def report_path(self, name: str, suffix: str) -> Path:
        return self.workspace / "reports" / f"{name}{suffix}"

    def seed(self, label: str) -> int:
        return derive_seed(self.manifest.master_seed, label)

    def spec(self, arch: str) -> ModelSpec:
        task = self.manifest.data.task
        return ModelSpec(arch=arch, input_shape=task.image_shape, k=task.k)

    # Scheduling

    def _execute(self, job: Job) -> dict:
        started = time.perf_counter()
        artifact = job.run()
        if isinstance(artifact, Dataset):
            path = self.dataset_path(job.job_id.split("/", 1)[1])
            digest = StorageService.save_dataset(artifact, path)
            return {"artifact_path": path, "artifact_sha256": digest, "duration_s": time.perf_counter() - started}
        path = self.model_path(job.job_id)
        digest = StorageService.save_model(artifact, path)
        return {"artifact_path": path, "artifact_sha256": digest, "duration_s": time.perf_counter() - started,
                "query_count": artifact.query_count, "train_accuracy": artifact.train_accuracy,
                "heldout_accuracy": artifact.heldout_accuracy}

    def run_jobs(self, jobs: Sequence[Job]) -> int:
        """
        Run every job whose artifact is missing or stale on the worker pool.

        Ledger rows are written from the calling thread only.

        Returns:
            int: Number of jobs executed.

        Raises:
            JobFailedException: Naming the first failed job (by id) and its seed.
        """
        pending = []
        with get_db(self.database_url) as db:
            for job in jobs:
                if JobService.is_complete(db, job.job_id):
                    logger.debug("Skipping job %s: artifact present", job.job_id)
                    continue
                JobService.mark_running(db, job.job_id, job.kind, job.tag, job.seed)
                pending.append(job)
        if not pending:
            return 0
        logger.info("Running %d of %d jobs on %d workers", len(pending), len(jobs), self.max_workers)
        failures = []
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool, get_db(self.database_url) as db:
            futures = {pool.submit(self._execute, job): job for job in pending}
            for future in as_completed(futures):
                job = futures[future]
                try:
                    result = future.result()
                except Exception as e:
                    JobService.mark_failed(db, job.job_id, str(e))
                    failures.append((job, e))
                    continue
                JobService.mark_done(db, job.job_id, **result)
                self.jobs_run.append(job.job_id)
                logger.info("Job %s done in %.1fs", job.job_id, result["duration_s"])
        if failures:
            job, error = min(failures, key=lambda failure: failure[0].job_id)
            raise JobFailedException(job.job_id, job.seed, error)
        return len(pending)

    # Datasets

    def _split_part(self, part: str) -> Callable[[], Dataset]:
        def run():
            data = self.manifest.data
            full = DataService.gen_synthetic(data.task, data.n_train, self.seed("data/train"))
            defender, attacker, validation = DataService.split_defender_attacker(full, self.seed("data/split"))
            return {"defender": defender, "attacker": attacker, "validation": validation}[part]
        return run

    def data_jobs(self) -> List[Job]:
        data = self.manifest.data
        transfer_task = DataService.transfer_spec(data.task)
        n_transfer_test = max(data.n_transfer // 3, 20 * data.task.k)
        runs = {
            "defender": self._split_part("defender"),
            "attacker": self._split_part("attacker"),
            "validation": self._split_part("validation"),
            "test": lambda: DataService.gen_synthetic(data.task, data.n_test, self.seed("data/test")),
            "candidates": lambda: DataService.gen_synthetic(
                data.task, data.n_candidates, self.seed("data/candidates")),
            "transfer-train": lambda: DataService.derive_transfer_task(
                data.task, self.seed("data/transfer-train"), data.n_transfer),
            "transfer-test": lambda: DataService.gen_synthetic(
                transfer_task, n_transfer_test, self.seed("data/transfer-test")),
        }
        return [Job(job_id=f"data/{name}", kind="data", tag="data", seed=self.seed(f"data/{name}"), run=runs[name])
                for name in DATASETS]

    def datasets(self) -> Dict[str, Dataset]:
        self.run_jobs(self.data_jobs())
        return {name: StorageService.load_dataset(self.dataset_path(name)) for name in DATASETS}

    # Zoo

    def zoo_plan(self) -> List[PlannedModel]:
        """
        Every model of the zoo, in a fixed order: source, irrelevant groups, surrogates, attacks, calibration.
        """
        zoo = self.manifest.zoo
        plan = [PlannedModel(job_id="source", provenance=Provenance.SOURCE, arch=zoo.source_arch, index=0)]
        for arch in zoo.irrelevant_archs:
            plan += [PlannedModel(job_id=f"irrelevant/{arch}/{i}", provenance=Provenance.IRRELEVANT, arch=arch,
                                  index=i) for i in range(zoo.irrelevant_per_arch)]
        for arch in zoo.irrelevant_archs:
            plan += [PlannedModel(job_id=f"irrelevantTransfer/{arch}/{i}", provenance=Provenance.IRRELEVANT_TRANSFER,
                                  arch=arch, index=i) for i in range(zoo.transfer_irrelevant_per_arch)]
        plan += [PlannedModel(job_id=f"surrogate/{i}", provenance=Provenance.SURROGATE,
                              arch=zoo.surrogate_archs[i % len(zoo.surrogate_archs)], index=i)
                 for i in range(zoo.surrogates)]
        for provenance in STOLEN_TAGS:
            for i in range(zoo.attack_models):
                extracting = provenance in (Provenance.EXTRACT_L, Provenance.EXTRACT_P, Provenance.EXTRACT_ADV)
                arch = zoo.extract_archs[i % len(zoo.extract_archs)] if extracting else zoo.source_arch
                plan.append(PlannedModel(job_id=f"{provenance.value}/{i}", provenance=provenance, arch=arch, index=i))
        for i in range(zoo.calibration_models):
            plan.append(PlannedModel(job_id=f"calibration/irrelevant/{i}", provenance=Provenance.IRRELEVANT,
                                     arch=zoo.irrelevant_archs[i % len(zoo.irrelevant_archs)], index=i,
                                     calibration=True))
            plan.append(PlannedModel(job_id=f"calibration/extractAdv/{i}", provenance=Provenance.EXTRACT_ADV,
                                     arch=zoo.extract_archs[i % len(zoo.extract_archs)], index=i,
                                     calibration=True))
        return plan

    def _model_run(self, planned: PlannedModel, data: Dict[str, Dataset],
                   source: Optional[ModelParams]) -> Callable[[], ModelParams]:
        attacks = self.manifest.attacks
        seed = self.seed(planned.job_id)
        spec = self.spec(planned.arch)
        job_id = planned.job_id
        test = data["test"]

        def cfg(base):
            return base.model_copy(update={"seed": seed})

        p = planned.provenance
        if planned.calibration:
            return self._calibration_run(planned, spec, seed, data, source)
        if p == Provenance.SOURCE:
            return lambda: TrainingService.train(data["defender"], spec, attacks.train, seed, test, p, job_id)
        if p == Provenance.IRRELEVANT:
            return lambda: TrainingService.train(data["attacker"], spec, attacks.train, seed, test, p, job_id)
        if p == Provenance.IRRELEVANT_TRANSFER:
            return lambda: TrainingService.train(data["transfer-train"], spec, attacks.train, seed,
                                                 data["transfer-test"], p, job_id)
        if p == Provenance.SURROGATE:
            def surrogate():
                model = FingerprintService.train_surrogates(source, data["defender"], 1, [spec], attacks.surrogate,
                                                            [seed], eval_ds=test)[0]
                return model.model_copy(update={"model_id": job_id})
            return surrogate
        if p in (Provenance.FINETUNE_A, Provenance.FINETUNE_L):
            mode = "all" if p == Provenance.FINETUNE_A else "last"
            return lambda: TrainingService.finetune(source, data["attacker"], mode, cfg(attacks.finetune), test,
                                                    job_id)
        if p == Provenance.PRUNED:
            def pruned():
                validation = data["validation"]
                size = min(self.manifest.zoo.activation_size, validation.n)
                activation_set = validation.subset(np.sort(make_rng(seed).permutation(validation.n)[:size]))
                return TrainingService.prune_by_activation(source, activation_set, self.manifest.zoo.prune_ratio,
                                                           test, job_id)
            return pruned
        if p in (Provenance.EXTRACT_L, Provenance.EXTRACT_P):
            mode = "label" if p == Provenance.EXTRACT_L else "prob"
            return lambda: AttackService.extract(QueryHandle.from_model(source), data["attacker"], spec,
                                                 cfg(attacks.extract), mode, test, job_id)
        if p == Provenance.EXTRACT_ADV:
            return lambda: AttackService.extract_adv(QueryHandle.from_model(source), data["attacker"], spec,
                                                     cfg(attacks.extract), cfg(attacks.adv), attacks.adv_train,
                                                     test, job_id)
        mode = "all" if p == Provenance.TRANSFER_A else "last"
        return lambda: TrainingService.transfer(source, data["transfer-train"], mode, cfg(attacks.transfer),
                                                data["transfer-test"], job_id)

    def _calibration_run(self, planned: PlannedModel, spec: ModelSpec, seed: int, data: Dict[str, Dataset],
                         source: Optional[ModelParams]) -> Callable[[], ModelParams]:
        """
        Calibration models are built from the defender split, which no suspect is trained on.
        """
        attacks = self.manifest.attacks
        test = data["test"]
        if planned.provenance == Provenance.IRRELEVANT:
            return lambda: TrainingService.train(data["defender"], spec, attacks.train, seed, test,
                                                 Provenance.IRRELEVANT, planned.job_id)
        return lambda: AttackService.extract_adv(
            QueryHandle.from_model(source), data["defender"], spec,
            attacks.extract.model_copy(update={"seed": seed}), attacks.adv.model_copy(update={"seed": seed}),
            attacks.adv_train, test, planned.job_id)

    def _jobs_for(self, planned: List[PlannedModel], data, source=None) -> List[Job]:
        return [Job(job_id=item.job_id, kind="model", tag=item.provenance.value, seed=self.seed(item.job_id),
                    run=self._model_run(item, data, source)) for item in planned]

    def load_model(self, job_id: str) -> ModelParams:
        return StorageService.load_model(self.model_path(job_id))

    def _require_zoo(self):
        with get_db(self.database_url) as db:
            missing = [item.job_id for item in self.zoo_plan() if not JobService.is_complete(db, item.job_id)]
        if missing:
            raise ConfigurationException(f"Zoo incomplete ({len(missing)} models missing, e.g. {missing[0]}); "
                                         f"run the zoo command first")

    def cmd_zoo(self) -> int:
        """
        Train the source, the irrelevant groups, the surrogates and every attack model.

        Returns:
            int: Number of jobs executed (0 on a completed workspace).
        """
        logger.info("Building zoo in %s", self.workspace)
        before = len(self.jobs_run)
        data = self.datasets()
        plan = self.zoo_plan()
        independent = [item for item in plan if item.provenance in
                       (Provenance.SOURCE, Provenance.IRRELEVANT, Provenance.IRRELEVANT_TRANSFER)]
        self.run_jobs(self._jobs_for(independent, data))
        source = self.load_model("source")
        derived = [item for item in plan if item not in independent]
        self.run_jobs(self._jobs_for(derived, data, source))
        self._record_artifacts([self.model_path(item.job_id) for item in plan] +
                               [self.dataset_path(name) for name in DATASETS])
        executed = len(self.jobs_run) - before
        logger.info("Zoo complete: %d models, %d jobs executed", len(plan), executed)
        return executed

    def suspects(self) -> List[ModelParams]:
        return [self.load_model(item.job_id) for item in self.zoo_plan()
                if item.provenance in SUSPECT_TAGS and not item.calibration]

    def calibration_models(self) -> List[ModelParams]:
        return [self.load_model(item.job_id) for item in self.zoo_plan() if item.calibration]

    # Fingerprints

    def _filter_models(self, data) -> List[ModelParams]:
        zoo = self.manifest.zoo
        plan = [PlannedModel(job_id=f"filter/{zoo.irrelevant_archs[i % len(zoo.irrelevant_archs)]}/{i}",
                             provenance=Provenance.IRRELEVANT, arch=zoo.irrelevant_archs[i % len(zoo.irrelevant_archs)],
                             index=i) for i in range(zoo.filter_models)]
        jobs = [Job(job_id=item.job_id, kind="filter", tag=item.provenance.value, seed=self.seed(item.job_id),
                    run=(lambda item=item: TrainingService.train(
                        data["defender"], self.spec(item.arch), self.manifest.attacks.train, self.seed(item.job_id),
                        data["test"], Provenance.IRRELEVANT, item.job_id)))
                for item in plan]
        self.run_jobs(jobs)
        return [self.load_model(item.job_id) for item in plan]

    def fingerprint_inputs(self, mode: str, data: Dict[str, Dataset], source: ModelParams,
                           n_max: Optional[int] = None, filter_irrelevant: bool = False) -> Dataset:
        """
        Build the fingerprint input set of a selection mode.

        The misclassification rules draw from the defender's held-out candidates:
        the source fits its own training split, so errors only show on unseen data.
        """
        fp = self.manifest.fingerprint
        n_max = n_max or fp.n_inputs
        defender = data["defender"]
        if mode == "sac-w":
            surrogates = [self.load_model(item.job_id) for item in self.zoo_plan()
                          if item.provenance == Provenance.SURROGATE]
            filters = self._filter_models(data) if filter_irrelevant else None
            return FingerprintService.select_misclassified(data["candidates"], source, surrogates, filters, n_max)
        if mode == "sac-source":
            return FingerprintService.select_source_misclassified(data["candidates"], source, n_max)
        if mode == "sac-normal":
            return FingerprintService.select_normal(defender, n_max, self.seed("fingerprint/sac-normal"))
        if mode == "sac-m":
            sacm = fp.sacm
            samples = FingerprintService.select_normal(defender, sacm.n_source, self.seed("fingerprint/sac-m"))
            images = AugmentService.build_sacm_inputs(samples.images, sacm.n_out, sacm.rounds, sacm.use_flip,
                                                      self.seed("fingerprint/sac-m/mix"), sacm.flip_mode)
            return Dataset(images=images, labels=ZooService.predict(source, images), task_id=source.task_id,
                           k=source.spec.k)
        raise ConfigurationException(f"Unknown fingerprint mode: {mode}")

    def _threshold(self, entries) -> Optional[float]:
        """
        Decision threshold from the calibration models' scores; suspects never influence it.
        """
        irrelevant = [e.score for e in entries if e.tag == Provenance.IRRELEVANT.value and e.score is not None]
        adversarial = [e.score for e in entries if e.tag == Provenance.EXTRACT_ADV.value and e.score is not None]
        if not irrelevant or not adversarial:
            return None
        return FingerprintService.choose_threshold(irrelevant, adversarial)

    def cmd_fingerprint(self, mode: str, kernel: Optional[str] = None, labels: Optional[str] = None,
                        smooth_eps: Optional[float] = None, filter_irrelevant: Optional[bool] = None) -> ScoreReport:
        """
        Fingerprint the source, score every suspect and write the report.

        Args:
            mode (str): sac-w, sac-m, sac-normal, sac-source or baseline-asr.
            kernel (str): cosine or rbf; defaults to the manifest.
            labels (str): prob or smooth; defaults to the manifest.
            smooth_eps (float): Smoothing of smooth labels; defaults to the manifest.
            filter_irrelevant (bool): Apply the irrelevant-model filter in sac-w.

        Returns:
            ScoreReport: The written report.
        """
        fp = self.manifest.fingerprint
        kernel = kernel or fp.kernel
        label_mode = LABEL_MODES[labels] if labels else fp.label_mode
        eps = fp.smooth_eps if smooth_eps is None else smooth_eps
        filter_irrelevant = fp.filter_irrelevant if filter_irrelevant is None else filter_irrelevant
        self._require_zoo()
        data = self.datasets()
        source = self.load_model("source")
        suspects = self.suspects()
        manifest_hash = self.manifest.content_hash()
        started = time.perf_counter()
        if mode == "baseline-asr":
            baseline = fp.baseline
            report = EvaluationService.baseline_asr(source, suspects, data["defender"], baseline.n_adv, baseline.adv,
                                                    self.seed("fingerprint/baseline"), baseline.attempt_factor,
                                                    manifest_hash)
            name = "baseline-asr"
            written = []
        else:
            inputs = self.fingerprint_inputs(mode, data, source, filter_irrelevant=filter_irrelevant)
            inputs_path = self.workspace / "fingerprints" / f"{mode}-inputs.sacd"
            StorageService.save_dataset(inputs, inputs_path)
            record = FingerprintService.build_record(
                source, inputs, inputs_path, kernel, label_mode, eps, fp.rbf_delta,
                {"mode": mode, "master_seed": self.manifest.master_seed, "n": inputs.n,
                 "filter_irrelevant": filter_irrelevant})
            name = f"{mode}-{kernel}-{'smooth' if label_mode == 'smooth' else 'prob'}"
            record_path = self.workspace / "fingerprints" / f"{name}.sacf"
            StorageService.save_fingerprint(record, record_path)
            FingerprintService.verify_record(StorageService.load_fingerprint(record_path))
            outputs_path = self.workspace / "fingerprints" / f"{name}-source.saco"
            StorageService.save_outputs(FingerprintService.outputs(source, inputs, label_mode, eps), outputs_path)
            entries = EvaluationService.score_suspects(record, suspects, inputs, self.max_workers)
            calibration = EvaluationService.score_suspects(record, self.calibration_models(), inputs,
                                                           self.max_workers)
            report = EvaluationService.build_report(mode, record.kernel_id, label_mode, manifest_hash, entries,
                                                    threshold=self._threshold(calibration),
                                                    calibration=calibration)
            written = [inputs_path, record_path, outputs_path]
        elapsed = time.perf_counter() - started
        if mode == "sac-w":
            with get_db(self.database_url) as db:
                elapsed += JobService.total_duration(db, "model", Provenance.SURROGATE.value)
        self._write_report(name, report)
        self._record_timing(f"fingerprint/{name}", elapsed)
        self._record_artifacts(written + [self.report_path(name, ".json"), self.report_path(name, ".csv")])
        logger.info("Fingerprint %s scored %d suspects in %.1fs", name, len(report.entries), elapsed)
        return report

    def cmd_score_outputs(self, name: str, paths: Sequence[Path]) -> Dict[str, float]:
        """
        Score output sets that suspects produced outside the lab on a written fingerprint's inputs.

        Args:
            name (str): Fingerprint name, e.g. sac-w-cosine-prob.
            paths: Output-set files, one per suspect, rows aligned with the fingerprint inputs.

        Returns:
            dict: Correlation distance per output file.

        Raises:
            ConfigurationException: If the fingerprint has not been written.
            CheckpointFormatException: If its inputs or an output file are damaged.
        """
        record_path = self.workspace / "fingerprints" / f"{name}.sacf"
        if not record_path.is_file():
            raise ConfigurationException(f"No fingerprint {name} in {record_path.parent}; run fingerprint first")
        record = StorageService.load_fingerprint(record_path)
        FingerprintService.verify_record(record)
        kind = "smooth-label" if record.manifest.get("label_mode") == "smooth" else "probability"
        scores = {}
        for path in paths:
            scores[str(path)] = FingerprintService.score_outputs(record, StorageService.load_outputs(path, kind))
            logger.info("Output set %s scored %.4f against %s", path, scores[str(path)], name)
        return scores

    # Sweeps

    def cmd_sweep(self, kind: str):
        """
        Pruning sweep (accuracy and distance per ratio) or sample-count sweep (AUC per count).

        Returns:
            PruningCurve or SampleCountCurve: The written curve.
        """
        self._require_zoo()
        data = self.datasets()
        source = self.load_model("source")
        fp = self.manifest.fingerprint
        sweep = self.manifest.sweep
        if kind == "pruning":
            inputs = self.fingerprint_inputs("sac-m", data, source)
            inputs_path = self.workspace / "fingerprints" / "sweep-pruning-inputs.sacd"
            StorageService.save_dataset(inputs, inputs_path)
            record = FingerprintService.build_record(source, inputs, inputs_path, fp.kernel, fp.label_mode,
                                                     fp.smooth_eps, fp.rbf_delta, {"mode": "sac-m"})
            validation = data["validation"]
            activation_set = validation.subset(np.arange(min(self.manifest.zoo.activation_size, validation.n)))
            irrelevant = [self.load_model(item.job_id) for item in self.zoo_plan()
                          if item.provenance == Provenance.IRRELEVANT and not item.calibration]
            curve = EvaluationService.pruning_sweep(source, sweep.pruning_ratios, record, inputs, activation_set,
                                                    data["test"], irrelevant)
            rows = [("ratio", "accuracy", "distance", "irrelevant_mean")] + [
                (p.ratio, p.accuracy, p.distance, curve.irrelevant_mean) for p in curve.points]
        elif kind == "samples":
            pool = self.fingerprint_inputs("sac-w", data, source, n_max=max(sweep.sample_counts))
            curve = EvaluationService.sample_count_sweep(sweep.sample_counts, source, self.suspects(), pool,
                                                         fp.kernel, fp.label_mode, fp.smooth_eps, fp.rbf_delta)
            rows = [("n_samples", "tag", "auc")] + [(p.n_samples, p.tag, p.auc) for p in curve.points]
        else:
            raise ConfigurationException(f"Unknown sweep kind: {kind}")
        name = f"sweep-{kind}"
        StorageService.write_text(self.report_path(name, ".json"), curve.model_dump_json(indent=2))
        StorageService.write_text(self.report_path(name, ".csv"), EvaluationService.rows_csv(rows))
        self._record_artifacts([self.report_path(name, ".json"), self.report_path(name, ".csv")])
        return curve

    # Reports

    def load_reports(self) -> Dict[str, ScoreReport]:
        reports = {}
        for path in sorted((self.workspace / "reports").glob("*.json")):
            if path.stem.startswith("sweep-") or path.stem == "summary":
                continue
            reports[path.stem] = ScoreReport.model_validate_json(path.read_text(encoding="utf-8"))
        return reports

    def cmd_report(self, runs: Sequence[Path] = ()) -> str:
        """
        Tabulate the AUC cells of every report, aggregated over additional run workspaces.

        Returns:
            str: The printable table.
        """
        reports = self.load_reports()
        if not reports:
            raise ConfigurationException(f"No reports in {self.workspace / 'reports'}; run fingerprint first")
        others = [ExperimentController(run, self.manifest).load_reports() for run in runs]
        summary, lines = {}, []
        for name, report in reports.items():
            group = [report] + [other[name] for other in others if name in other]
            summaries = EvaluationService.aggregate_reports(group)
            summary[name] = [item.model_dump() for item in summaries]
            lines.append(f"{name} (runs={len(group)})")
            for item in summaries:
                cell = "-" if item.mean is None else f"{item.mean:.3f} [{item.min:.3f}, {item.max:.3f}]"
                lines.append(f"  {item.tag:<16} {cell}")
        StorageService.write_text(self.report_path("summary", ".json"), json.dumps(summary, indent=2, sort_keys=True))
        return "\n".join(lines)

    def _write_report(self, name: str, report: ScoreReport):
        StorageService.write_text(self.report_path(name, ".json"), report.model_dump_json(indent=2))
        StorageService.write_text(self.report_path(name, ".csv"), EvaluationService.report_csv(report))

    def _record_timing(self, phase: str, seconds: float):
        path = self.workspace / "timings.json"
        timings = json.loads(path.read_text(encoding="utf-8")) if path.is_file() else {}
        timings[phase] = seconds
        StorageService.write_text(path, json.dumps(timings, indent=2, sort_keys=True))

    def _record_artifacts(self, paths: Sequence[Path]):
        artifacts = dict(self.manifest.artifacts)
        for path in paths:
            path = Path(path)
            if path.is_file():
                artifacts[path.relative_to(self.workspace).as_posix()] = sha256_file(path)
        self.manifest = self.manifest.model_copy(update={"artifacts": dict(sorted(artifacts.items()))})
        StorageService.write_text(self.manifest_path, self.manifest.model_dump_json(indent=2))
