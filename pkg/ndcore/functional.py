"""
Probability functions and losses.

All functions accept a single vector of shape (k,) or a batch of shape (n, k)
and reduce over the last axis. Losses accumulate in float64.
"""

import numpy as np

from utils.exceptions import ConfigurationException, LabelIndexException, ShapeMismatchException

from .tensor import check_finite

CLAMP = 1e-12


def softmax_t(logits, T: float = 1.0) -> np.ndarray:
    """
    Temperature softmax over the last axis, computed with max-subtraction.

    Args:
        logits: Tensor of shape (k,) or (n, k), k >= 2.
        T (float): Temperature, strictly positive.

    Returns:
        np.ndarray: Probabilities in the input's floating dtype (float32 for integer input).

    Raises:
        InvalidInputException: If the logits are not finite.
        ConfigurationException: If T is not positive.
        ShapeMismatchException: If fewer than two classes are given.
    """
    logits = np.asarray(logits)
    if T <= 0:
        raise ConfigurationException(f"Temperature must be positive, got {T}")
    if logits.ndim == 0 or logits.shape[-1] < 2:
        raise ShapeMismatchException(f"softmax needs at least two classes, got shape {logits.shape}")
    check_finite(logits, "logits")
    out_dtype = logits.dtype if np.issubdtype(logits.dtype, np.floating) else np.float32
    scaled = logits.astype(np.float64) / T
    scaled -= scaled.max(axis=-1, keepdims=True)
    exp = np.exp(scaled)
    return (exp / exp.sum(axis=-1, keepdims=True)).astype(out_dtype)


def one_hot(labels, k: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= k):
        raise LabelIndexException(f"labels must lie in [0, {k})")
    return np.eye(k, dtype=dtype)[labels]


def cross_entropy(probs, label) -> float:
    """
    Negative log-likelihood of the labelled class, clamped at 1e-12.

    Args:
        probs: Probability vector (k,) or batch (n, k).
        label: Class index, or an (n,) array of indices for a batch.

    Returns:
        float: The loss; the batch mean for batched input.

    Raises:
        LabelIndexException: If a label is out of range.
    """
    probs = np.asarray(probs, dtype=np.float64)
    label = np.asarray(label)
    k = probs.shape[-1]
    if np.any(label < 0) or np.any(label >= k):
        raise LabelIndexException(f"label {label} out of range for {k} classes")
    if probs.ndim == 1:
        return float(-np.log(max(probs[int(label)], CLAMP)))
    picked = probs[np.arange(probs.shape[0]), label.astype(np.int64)]
    return float(np.mean(-np.log(np.maximum(picked, CLAMP))))


def kl_div(p, q) -> float:
    """
    KL divergence sum p * (ln p - ln q), clamped at 1e-12; batch mean for 2-D input.

    Raises:
        ShapeMismatchException: If p and q differ in shape.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeMismatchException(f"kl_div shapes differ: {p.shape} vs {q.shape}")
    terms = p * (np.log(np.maximum(p, CLAMP)) - np.log(np.maximum(q, CLAMP)))
    per_row = terms.sum(axis=-1)
    return float(per_row) if p.ndim == 1 else float(per_row.mean())
