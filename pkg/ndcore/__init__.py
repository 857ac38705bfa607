"""
This package contains the dense-tensor and neural-network primitives every model
in the laboratory is built on: validation, the seeded generator, losses, layers
and the optimizer.
"""

from .functional import softmax_t, cross_entropy, kl_div, one_hot
from .layers import (
    Layer, Dense, Conv2d, ReLU, MaxPool2x2, Flatten, Sequential,
    build_layer, layer_forward_backward,
)
from .optim import sgd_step
from .tensor import as_tensor, check_finite, check_shape, frozen, make_rng, derive_seed

__all__ = [
    "softmax_t", "cross_entropy", "kl_div", "one_hot",
    "Layer", "Dense", "Conv2d", "ReLU", "MaxPool2x2", "Flatten", "Sequential",
    "build_layer", "layer_forward_backward", "sgd_step",
    "as_tensor", "check_finite", "check_shape", "frozen", "make_rng", "derive_seed",
]
