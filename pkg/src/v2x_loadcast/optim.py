"""RMSProp: divide each gradient by a moving RMS of its recent magnitudes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .nn import ModelParameters

DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_DECAY = 0.9
DEFAULT_EPSILON = 1e-8


@dataclass
class RMSPropState:
    """Per-parameter squared-gradient accumulators plus hyperparameters."""

    acc: dict[str, np.ndarray]
    learning_rate: float = DEFAULT_LEARNING_RATE
    decay: float = DEFAULT_DECAY
    epsilon: float = DEFAULT_EPSILON
    steps: int = field(default=0)

    @classmethod
    def for_parameters(
        cls,
        params: ModelParameters,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        decay: float = DEFAULT_DECAY,
        epsilon: float = DEFAULT_EPSILON,
    ) -> "RMSPropState":
        acc = {name: np.zeros_like(t) for name, t in params.tensors().items()}
        return cls(acc, learning_rate, decay, epsilon)


def rmsprop_step(
    params: ModelParameters, grads: dict[str, np.ndarray], state: RMSPropState
) -> tuple[ModelParameters, RMSPropState]:
    """acc <- rho*acc + (1-rho)*g^2; theta <- theta - lr*g/sqrt(acc + eps).

    Updates parameters and state in place and returns them.
    """
    tensors = params.tensors()
    if set(grads) != set(tensors):
        raise ShapeMismatch(f"gradient keys {sorted(grads)} != parameter keys {sorted(tensors)}")
    rho = state.decay
    for name, theta in tensors.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeMismatch(f"gradient {name} shape {g.shape} != parameter {theta.shape}")
        acc = state.acc[name]
        acc *= rho
        acc += (1.0 - rho) * g * g
        theta -= state.learning_rate * g / np.sqrt(acc + state.epsilon)
    state.steps += 1
    return params, state
