"""
Tensor validation and the deterministic random number generator.

Tensors are plain numpy arrays: float32 for parameters and activations,
float64 wherever losses and metrics are accumulated. The generator is Philox,
a counter-based bit generator with a documented algorithm, so an identical
seed yields an identical stream on every platform.
"""

import hashlib

import numpy as np

from utils.exceptions import InvalidInputException, ShapeMismatchException

FLOAT = np.float32
SEED_MASK = (1 << 64) - 1


def as_tensor(values, dtype=FLOAT) -> np.ndarray:
    """
    Convert values to a contiguous tensor and check that every entry is finite.

    Args:
        values: Array-like input.
        dtype: Target dtype, float32 unless a caller needs float64 precision.

    Returns:
        np.ndarray: The validated tensor.

    Raises:
        InvalidInputException: If any entry is NaN or infinite.
    """
    tensor = np.ascontiguousarray(values, dtype=dtype)
    check_finite(tensor)
    return tensor


def check_finite(tensor: np.ndarray, name: str = "tensor") -> None:
    if not np.all(np.isfinite(tensor)):
        raise InvalidInputException(f"{name} contains non-finite entries")


def check_shape(tensor: np.ndarray, shape, name: str = "tensor") -> None:
    """
    Check a tensor against an expected shape; None entries match any size.
    """
    if tensor.ndim != len(shape) or any(
            want is not None and want != got for want, got in zip(shape, tensor.shape)):
        raise ShapeMismatchException(f"{name} has shape {tensor.shape}, expected {tuple(shape)}")


def frozen(tensor: np.ndarray) -> np.ndarray:
    """
    Return a read-only view so stored values stay immutable once constructed.
    """
    view = tensor.view()
    view.setflags(write=False)
    return view


def make_rng(seed: int) -> np.random.Generator:
    """
    Build a generator from a 64-bit seed.

    Args:
        seed (int): Unsigned 64-bit seed.

    Returns:
        np.random.Generator: Philox-backed generator.
    """
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


def derive_seed(master: int, label: str) -> int:
    """
    Derive a labeled sub-seed from a master seed.

    Adding a new label never changes the seed of an existing one.

    Args:
        master (int): Master seed.
        label (str): Job or purpose label, e.g. "irrelevant/cnn-s/3".

    Returns:
        int: Unsigned 64-bit seed.
    """
    digest = hashlib.sha256(f"{int(master) & SEED_MASK}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
