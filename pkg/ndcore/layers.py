"""
Layer primitives with hand-written forward and backward passes.

Five kinds are supported: dense, conv2d-3x3 (stride 1, zero padding 1), relu,
maxpool-2x2 (stride 2) and flatten. Layers hold no parameters themselves;
parameters are passed in as a dict so that a model is a pure function of its
parameter store. Every pass preserves the dtype it is given, which lets the
gradient checks run in float64 while training runs in float32.
"""

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from utils.exceptions import ConfigurationException, ShapeMismatchException

logger = logging.getLogger(__name__)


class Layer:
    """
    Base class of all layer kinds.
    """
    kind = "layer"
    prunable = False

    def init_params(self, rng: np.random.Generator) -> dict:
        return {}

    def output_shape(self, input_shape: tuple) -> tuple:
        return tuple(input_shape)

    def forward(self, x: np.ndarray, params: dict):
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray, cache, params: dict):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class Dense(Layer):
    """
    Affine layer y = x @ W + b with W of shape (in, out).
    """
    kind = "dense"
    prunable = True

    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features

    def init_params(self, rng):
        scale = np.sqrt(2.0 / self.in_features)
        return {
            "weight": (rng.standard_normal((self.in_features, self.out_features)) * scale).astype(np.float32),
            "bias": np.zeros(self.out_features, dtype=np.float32),
        }

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_features,):
            raise ShapeMismatchException(f"dense expects ({self.in_features},), got {input_shape}")
        return (self.out_features,)

    def forward(self, x, params):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatchException(f"dense input {x.shape} does not match in_features={self.in_features}")
        return x @ params["weight"] + params["bias"], x

    def backward(self, grad_out, cache, params):
        x = cache
        grads = {"weight": x.T @ grad_out, "bias": grad_out.sum(axis=0)}
        return grad_out @ params["weight"].T, grads

    def describe(self):
        return {"kind": self.kind, "in": self.in_features, "out": self.out_features}


def _conv3x3(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(2, 3))
    return np.einsum("nchwuv,ocuv->nohw", windows, weight, optimize=True)


class Conv2d(Layer):
    """
    3x3 convolution, stride 1, zero padding 1; weight of shape (out, in, 3, 3).
    """
    kind = "conv2d-3x3"
    prunable = True

    def __init__(self, in_channels: int, out_channels: int):
        self.in_channels = in_channels
        self.out_channels = out_channels

    def init_params(self, rng):
        scale = np.sqrt(2.0 / (self.in_channels * 9))
        return {
            "weight": (rng.standard_normal((self.out_channels, self.in_channels, 3, 3)) * scale).astype(np.float32),
            "bias": np.zeros(self.out_channels, dtype=np.float32),
        }

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeMismatchException(f"conv expects {self.in_channels} channels, got {input_shape}")
        return (self.out_channels, input_shape[1], input_shape[2])

    def forward(self, x, params):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatchException(f"conv input {x.shape} does not match in_channels={self.in_channels}")
        out = _conv3x3(x, params["weight"]) + params["bias"][None, :, None, None]
        return out, x

    def backward(self, grad_out, cache, params):
        x = cache
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        windows = sliding_window_view(padded, (3, 3), axis=(2, 3))
        grads = {
            "weight": np.einsum("nohw,nchwuv->ocuv", grad_out, windows, optimize=True),
            "bias": grad_out.sum(axis=(0, 2, 3)),
        }
        # Same-padded 3x3 conv transposes to a conv with the spatially flipped kernel.
        flipped = params["weight"][:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        return _conv3x3(grad_out, flipped), grads

    def describe(self):
        return {"kind": self.kind, "in": self.in_channels, "out": self.out_channels}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, params):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad_out, cache, params):
        return grad_out * cache, {}


class MaxPool2x2(Layer):
    """
    2x2 max pooling with stride 2; ties route the gradient to the first maximum.
    """
    kind = "maxpool-2x2"

    def output_shape(self, input_shape):
        c, h, w = input_shape
        if h % 2 or w % 2:
            raise ShapeMismatchException(f"maxpool needs even spatial dims, got {input_shape}")
        return (c, h // 2, w // 2)

    def forward(self, x, params):
        if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
            raise ShapeMismatchException(f"maxpool input {x.shape} must be (n, c, even, even)")
        n, c, h, w = x.shape
        blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        index = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, index[..., None], axis=-1)[..., 0]
        return out, (index, x.shape)

    def backward(self, grad_out, cache, params):
        index, shape = cache
        n, c, h, w = shape
        blocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad_out.dtype)
        np.put_along_axis(blocks, index[..., None], grad_out[..., None], axis=-1)
        grad_in = blocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(shape)
        return grad_in, {}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out, cache, params):
        return grad_out.reshape(cache), {}


LAYER_KINDS = {cls.kind: cls for cls in (Dense, Conv2d, ReLU, MaxPool2x2, Flatten)}


def build_layer(description: dict) -> Layer:
    """
    Rebuild a layer from its describe() output.
    """
    kind = description.get("kind")
    if kind not in LAYER_KINDS:
        raise ConfigurationException(f"Unknown layer kind: {kind}")
    if kind in ("dense", "conv2d-3x3"):
        return LAYER_KINDS[kind](description["in"], description["out"])
    return LAYER_KINDS[kind]()


def layer_forward_backward(layer: Layer, x: np.ndarray, params: dict, grad_out: np.ndarray):
    """
    Run one layer forward and backward.

    Args:
        layer (Layer): The layer.
        x (np.ndarray): Input batch.
        params (dict): The layer's parameters ("weight"/"bias"), empty for stateless kinds.
        grad_out (np.ndarray): Upstream gradient, same shape as the output.

    Returns:
        tuple: (output, input gradient, parameter gradients).

    Raises:
        ShapeMismatchException: If shapes are inconsistent with the layer kind.
    """
    out, cache = layer.forward(x, params)
    if grad_out.shape != out.shape:
        raise ShapeMismatchException(f"upstream gradient {grad_out.shape} does not match output {out.shape}")
    grad_in, grads = layer.backward(grad_out, cache, params)
    return out, grad_in, grads


class Sequential:
    """
    A linear stack of layers with a flat parameter store keyed "<index>.<name>".
    """

    def __init__(self, layers: list, input_shape: tuple):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        self.output_shape = shape

    @staticmethod
    def layer_params(params: dict, index: int) -> dict:
        prefix = f"{index}."
        return {key[len(prefix):]: value for key, value in params.items() if key.startswith(prefix)}

    @property
    def head_index(self) -> int:
        """Index of the final parametrised layer (the classification head)."""
        return max(i for i, layer in enumerate(self.layers) if layer.prunable)

    def init_params(self, rng: np.random.Generator) -> dict:
        params = {}
        for index, layer in enumerate(self.layers):
            for name, value in layer.init_params(rng).items():
                params[f"{index}.{name}"] = value
        return params

    def forward(self, x: np.ndarray, params: dict, keep_cache: bool = True):
        """
        Forward pass.

        Returns:
            tuple: (logits, caches, per-layer outputs) where caches is None unless keep_cache.
        """
        caches = [] if keep_cache else None
        outputs = []
        for index, layer in enumerate(self.layers):
            x, cache = layer.forward(x, self.layer_params(params, index))
            outputs.append(x)
            if keep_cache:
                caches.append(cache)
        return x, caches, outputs

    def backward(self, grad_logits: np.ndarray, caches: list, params: dict, trainable=None):
        """
        Backward pass from the logits gradient.

        Args:
            trainable: Optional set of layer indices whose parameter gradients are wanted;
                the pass stops early once the lowest of them has been reached.

        Returns:
            tuple: (gradient w.r.t. the input or None when stopped early, parameter gradients)
        """
        grads = {}
        grad = grad_logits
        lowest = 0 if trainable is None else min(trainable, default=len(self.layers))
        for index in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[index]
            grad, layer_grads = layer.backward(grad, caches[index], self.layer_params(params, index))
            if trainable is None or index in trainable:
                for name, value in layer_grads.items():
                    grads[f"{index}.{name}"] = value
            if index == lowest and trainable is not None:
                return None, grads
        return grad, grads

    def logits(self, x: np.ndarray, params: dict, batch_size: int = 512) -> np.ndarray:
        chunks = [self.forward(x[start:start + batch_size], params, keep_cache=False)[0]
                  for start in range(0, len(x), batch_size)]
        return np.concatenate(chunks, axis=0) if chunks else np.zeros((0,) + self.output_shape, np.float32)

    def describe(self) -> list:
        return [layer.describe() for layer in self.layers]
