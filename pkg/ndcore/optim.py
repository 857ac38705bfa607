"""
Stochastic gradient descent with classic momentum.
"""

import numpy as np

from utils.exceptions import ConfigurationException, ShapeMismatchException


def sgd_step(params: dict, grads: dict, velocity: dict, lr: float, momentum: float, clip_norm: float = 0.0):
    """
    One momentum update: v <- momentum * v + g; w <- w - lr * v.

    Parameters without a gradient are carried over untouched. Inputs are not
    modified; new dicts are returned.

    Args:
        params (dict): Parameter store.
        grads (dict): Gradients keyed like params (a subset is allowed).
        velocity (dict): Velocity per key; missing keys start at zero.
        lr (float): Learning rate, lr >= 0 (0 leaves parameters unchanged).
        momentum (float): Momentum in [0, 1).
        clip_norm (float): When positive, gradients whose global L2 norm exceeds
            it are rescaled to that norm before the update.

    Returns:
        tuple: (new params, new velocity)

    Raises:
        ConfigurationException: For lr < 0, momentum outside [0, 1) or clip_norm < 0.
        ShapeMismatchException: If a gradient shape differs from its parameter.
    """
    if lr < 0:
        raise ConfigurationException(f"Learning rate must be non-negative, got {lr}")
    if not 0 <= momentum < 1:
        raise ConfigurationException(f"Momentum must lie in [0, 1), got {momentum}")
    if clip_norm < 0:
        raise ConfigurationException(f"clip_norm must be non-negative, got {clip_norm}")
    for key, grad in grads.items():
        if grad.shape != params[key].shape:
            raise ShapeMismatchException(f"gradient for {key} has shape {grad.shape}, parameter {params[key].shape}")
    scale = 1.0
    if clip_norm > 0 and grads:
        norm = float(np.sqrt(sum(np.sum(np.square(grad, dtype=np.float64)) for grad in grads.values())))
        if norm > clip_norm:
            scale = clip_norm / norm
    new_params = dict(params)
    new_velocity = dict(velocity)
    for key, grad in grads.items():
        weight = params[key]
        v = momentum * velocity.get(key, np.zeros_like(weight)) + scale * grad
        new_velocity[key] = v.astype(weight.dtype, copy=False)
        new_params[key] = (weight - lr * new_velocity[key]).astype(weight.dtype, copy=False)
    return new_params, new_velocity
