"""
Storage service module.

This module provides the binary checkpoint codecs of the laboratory (datasets,
models, fingerprints and externally produced output sets) together with atomic
file writes, so that concurrent jobs never observe a partial artifact.
"""

import json
import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from models.provenance import Provenance
from schemas import CorrelationMatrix, Dataset, FingerprintRecord, ModelParams, ModelSpec, OutputSet
from utils.exceptions import CheckpointFormatException
from utils.hashing import sha256_file

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"SACDATA1"
MODEL_MAGIC = b"SACMODL1"
FINGERPRINT_MAGIC = b"SACFPR01"
OUTPUTS_MAGIC = b"SACOUT01"


class _Writer:
    def __init__(self, magic: bytes):
        self.parts = [magic]

    def u32(self, *values):
        self.parts.append(struct.pack(f"<{len(values)}I", *values))

    def u64(self, value):
        self.parts.append(struct.pack("<Q", value))

    def text(self, value: str):
        encoded = value.encode("utf-8")
        self.u32(len(encoded))
        self.parts.append(encoded)

    def array(self, values, dtype):
        self.parts.append(np.ascontiguousarray(values).astype(dtype, copy=False).tobytes())

    def payload(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, payload: bytes, magic: bytes, path):
        self.payload = payload
        self.path = path
        if payload[:len(magic)] != magic:
            raise CheckpointFormatException(f"{path}: expected magic {magic!r}, found {payload[:len(magic)]!r}")
        self.offset = len(magic)

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise CheckpointFormatException(f"{self.path}: truncated payload")
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, count: int = 1):
        values = struct.unpack(f"<{count}I", self.take(4 * count))
        return values if count > 1 else values[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def array(self, dtype, shape):
        dtype = np.dtype(dtype)
        count = int(np.prod(shape))
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).reshape(shape).copy()

    def finish(self):
        if self.offset != len(self.payload):
            raise CheckpointFormatException(f"{self.path}: {len(self.payload) - self.offset} trailing bytes")


class StorageService:
    """
    Service for reading and writing laboratory artifacts.
    """

    @staticmethod
    def atomic_write(path, payload: bytes) -> str:
        """
        Write bytes through a temporary file and rename it into place.

        Args:
            path: Destination file.
            payload (bytes): Content.

        Returns:
            str: SHA-256 of the written file.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(handle, "wb") as temp_file:
                temp_file.write(payload)
                temp_file.flush()
                os.fsync(temp_file.fileno())
            os.replace(temp_name, path)
        except Exception:
            if os.path.exists(temp_name):
                os.remove(temp_name)
            raise
        logger.debug("Wrote %d bytes to %s", len(payload), path)
        return sha256_file(path)

    @staticmethod
    def write_text(path, text: str) -> str:
        return StorageService.atomic_write(path, text.encode("utf-8"))

    @staticmethod
    def _read(path) -> bytes:
        try:
            return Path(path).read_bytes()
        except FileNotFoundError as e:
            raise CheckpointFormatException(f"Checkpoint not found: {path}") from e

    @staticmethod
    def save_dataset(dataset: Dataset, path) -> str:
        """
        Persist a dataset: magic, u32 n,c,h,w,k, f32 images, u16 labels, task id.
        """
        n, c, h, w = dataset.images.shape
        writer = _Writer(DATASET_MAGIC)
        writer.u32(n, c, h, w, dataset.k)
        writer.array(dataset.images, "<f4")
        writer.array(dataset.labels, "<u2")
        writer.text(dataset.task_id)
        return StorageService.atomic_write(path, writer.payload())

    @staticmethod
    def load_dataset(path) -> Dataset:
        reader = _Reader(StorageService._read(path), DATASET_MAGIC, path)
        n, c, h, w, k = reader.u32(5)
        images = reader.array("<f4", (n, c, h, w)).astype(np.float32)
        labels = reader.array("<u2", (n,)).astype(np.int64)
        task_id = reader.text()
        reader.finish()
        return Dataset(images=images, labels=labels, task_id=task_id, k=k)

    @staticmethod
    def save_model(model: ModelParams, path) -> str:
        """
        Persist a model: magic, spec descriptor, provenance tag, then length-prefixed f32 blocks.
        """
        descriptor = {
            "spec": model.spec.model_dump(mode="json"),
            "provenance": model.provenance.value,
            "prune_ratio": model.prune_ratio,
            "task_id": model.task_id,
            "model_id": model.model_id,
            "train_accuracy": model.train_accuracy,
            "heldout_accuracy": model.heldout_accuracy,
            "query_count": model.query_count,
        }
        writer = _Writer(MODEL_MAGIC)
        writer.text(json.dumps(descriptor, sort_keys=True))
        writer.text(model.tag)
        writer.u32(len(model.params))
        for name in sorted(model.params):
            block = model.params[name]
            writer.text(name)
            writer.u32(block.ndim)
            if block.ndim:
                writer.u32(*block.shape)
            writer.u64(block.size * 4)
            writer.array(block, "<f4")
        return StorageService.atomic_write(path, writer.payload())

    @staticmethod
    def load_model(path) -> ModelParams:
        reader = _Reader(StorageService._read(path), MODEL_MAGIC, path)
        descriptor = json.loads(reader.text())
        tag = reader.text()
        params = {}
        for _ in range(reader.u32()):
            name = reader.text()
            ndim = reader.u32()
            shape = tuple(int(d) for d in np.atleast_1d(reader.u32(ndim))) if ndim else ()
            if reader.u64() != int(np.prod(shape)) * 4:
                raise CheckpointFormatException(f"{path}: block {name} length does not match its shape")
            params[name] = reader.array("<f4", shape).astype(np.float32)
        reader.finish()
        model = ModelParams(
            spec=ModelSpec(**descriptor["spec"]),
            params=params,
            provenance=Provenance(descriptor["provenance"]),
            prune_ratio=descriptor["prune_ratio"],
            task_id=descriptor["task_id"],
            model_id=descriptor["model_id"],
            train_accuracy=descriptor["train_accuracy"],
            heldout_accuracy=descriptor["heldout_accuracy"],
            query_count=descriptor["query_count"],
        )
        if model.tag != tag:
            raise CheckpointFormatException(f"{path}: provenance tag {tag} disagrees with descriptor")
        return model

    @staticmethod
    def save_fingerprint(record: FingerprintRecord, path) -> str:
        """
        Persist a fingerprint: magic, kernel id, n, input hash, f32 matrix, manifest text.
        """
        writer = _Writer(FINGERPRINT_MAGIC)
        writer.text(record.kernel_id)
        writer.u32(record.n)
        writer.text(record.input_hash)
        writer.array(record.source.matrix, "<f4")
        writer.text(json.dumps({**record.manifest, "input_path": record.input_path}, sort_keys=True))
        return StorageService.atomic_write(path, writer.payload())

    @staticmethod
    def load_fingerprint(path) -> FingerprintRecord:
        reader = _Reader(StorageService._read(path), FINGERPRINT_MAGIC, path)
        kernel_id = reader.text()
        n = reader.u32()
        input_hash = reader.text()
        matrix = reader.array("<f4", (n, n)).astype(np.float32)
        manifest = json.loads(reader.text())
        reader.finish()
        input_path = manifest.pop("input_path")
        if kernel_id == "cosine":
            source = CorrelationMatrix(matrix=matrix, kernel="cosine")
        elif kernel_id.startswith("rbf(") and kernel_id.endswith(")"):
            source = CorrelationMatrix(matrix=matrix, kernel="rbf", delta=float(kernel_id[4:-1]))
        else:
            raise CheckpointFormatException(f"{path}: unknown kernel id {kernel_id}")
        return FingerprintRecord(input_path=input_path, input_hash=input_hash, source=source, manifest=manifest)

    @staticmethod
    def save_outputs(outputs: OutputSet, path) -> str:
        """
        Persist an output set for exchange with external frameworks: magic, n, k, f32 rows.
        """
        n, k = outputs.outputs.shape
        writer = _Writer(OUTPUTS_MAGIC)
        writer.u32(n, k)
        writer.array(outputs.outputs, "<f4")
        return StorageService.atomic_write(path, writer.payload())

    @staticmethod
    def load_outputs(path, kind: str = "probability") -> OutputSet:
        reader = _Reader(StorageService._read(path), OUTPUTS_MAGIC, path)
        n, k = reader.u32(2)
        rows = reader.array("<f4", (n, k)).astype(np.float32)
        reader.finish()
        return OutputSet(outputs=rows, kind=kind)
