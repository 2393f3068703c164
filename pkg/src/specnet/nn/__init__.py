"""Eigenfunction networks: MLP, Adam, and SpecNet1 / SpecNet2 training."""
from __future__ import annotations

from .adam import AdamState, adam_update
from .mlp import MlpParams, init_mlp, load_mlp, mlp_forward, save_mlp, train_grad
from .train import (
    MODELS,
    NeighborCaches,
    OrthLayer,
    TrainResult,
    evaluate_embedding,
    specnet1_train_step,
    specnet2_train_step,
    train,
)
