"""Small numpy neural-network engine with hand-written gradients."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import adaptive_avg_pool, cross_entropy
from .models import (CNNSpec, LinearProbeSpec, MLPSpec, Model, TrainedModel, compute_gradients,
                     forward, init_model, predict_batch)
from .optim import AdamState, PlateauScheduler, adam_step
from .train import TrainConfig, train

__all__ = [
    "AdamState", "CNNSpec", "LinearProbeSpec", "MLPSpec", "Model", "PlateauScheduler",
    "TrainConfig", "TrainedModel", "adam_step", "adaptive_avg_pool", "compute_gradients",
    "cross_entropy", "forward", "init_model", "load_checkpoint", "predict_batch",
    "save_checkpoint", "train",
]
