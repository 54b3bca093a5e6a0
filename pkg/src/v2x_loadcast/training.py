"""Mini-batch training loop with early stopping on validation MAE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData
from .features import WindowSet
from .metrics import loss_mse, metric_mae
from .nn import ModelParameters, backward, forward, init_parameters, predict
from .optim import RMSPropState, rmsprop_step


@dataclass(frozen=True)
class TrainingConfig:
    cell: str = "lstm"
    hidden_size: int = 32
    learning_rate: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5


@dataclass
class TrainingResult:
    params: ModelParameters  # weights at the best validation epoch
    train_losses: list[float] = field(default_factory=list)
    val_maes: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    epochs_run: int = 0


def evaluate_mae(params: ModelParameters, windows: WindowSet, batch: int = 512) -> float:
    preds = np.concatenate(
        [predict(params, windows.inputs[s : s + batch]) for s in range(0, len(windows), batch)]
    )
    return metric_mae(preds, windows.targets)


def train_forecaster(
    train: WindowSet,
    val: WindowSet,
    config: TrainingConfig,
    rng: np.random.Generator,
) -> TrainingResult:
    """Train with RMSProp; keep the weights of the best validation epoch."""
    if len(train) == 0 or len(val) == 0:
        raise InsufficientData("training and validation window sets must be non-empty")
    params = init_parameters(
        config.cell, train.input_dim, config.hidden_size, rng, out_size=train.horizon
    )
    state = RMSPropState.for_parameters(
        params, config.learning_rate, config.rho, config.epsilon
    )
    result = TrainingResult(params.copy())
    best_val = np.inf
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        batch_losses = []
        for s in range(0, len(order), config.batch_size):
            idx = order[s : s + config.batch_size]
            preds, trace = forward(params, train.inputs[idx])
            batch_losses.append(loss_mse(preds, train.targets[idx]))
            grads = backward(params, trace, train.targets[idx])
            rmsprop_step(params, grads, state)
        result.train_losses.append(float(np.mean(batch_losses)))
        val_mae = evaluate_mae(params, val)
        result.val_maes.append(val_mae)
        result.epochs_run = epoch

        if val_mae < best_val:
            best_val = val_mae
            result.params = params.copy()
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return result
