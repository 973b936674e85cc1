from vibrodiag.optim.checkpoint import load_checkpoint, save_checkpoint
from vibrodiag.optim.gradcheck import grad_check
from vibrodiag.optim.losses import ce_from_logits, ce_loss, dpo_loss
from vibrodiag.optim.schedule import lr_at
from vibrodiag.optim.trainer import (
    CurvePoint,
    TrainConfig,
    TrainExample,
    collate,
    train_stage,
    write_curve_csv,
)

__all__ = [
    "TrainConfig",
    "TrainExample",
    "CurvePoint",
    "collate",
    "train_stage",
    "write_curve_csv",
    "ce_loss",
    "ce_from_logits",
    "dpo_loss",
    "lr_at",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]
