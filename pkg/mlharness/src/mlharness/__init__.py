"""Neural SIM reconstruction harness (training and tiled inference)."""

__version__ = "0.1.0"

from mlharness.model import ModelSpec, build_model, load_checkpoint, save_checkpoint
from mlharness.train import TrainSpec, lr_at_epoch, train
from mlharness.infer import infer_stack, run_model

__all__ = [
    "ModelSpec",
    "build_model",
    "load_checkpoint",
    "save_checkpoint",
    "TrainSpec",
    "lr_at_epoch",
    "train",
    "infer_stack",
    "run_model",
]
