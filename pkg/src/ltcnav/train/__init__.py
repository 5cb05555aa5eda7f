"""Behavior-cloning training: conv head, policy rollout, BPTT and adjoint gradients."""
from ltcnav.train.adjoint import adjoint_gradients, adjoint_solve
from ltcnav.train.convhead import DEFAULT_LAYERS, ConvHead
from ltcnav.train.loss import LossValue, cosine_loss, cosine_loss_and_grad
from ltcnav.train.optim import Adam, adam_update
from ltcnav.train.policy import (
    GradientBundle,
    Policy,
    bptt_gradients,
    load_policy,
    save_policy,
    sequence_loss,
)
from ltcnav.train.trainer import (
    GradientMode,
    TrainConfig,
    TrainResult,
    Window,
    evaluate_loss,
    save_checkpoint,
    split_by_episode,
    train_policy,
    write_curves,
)

__all__ = [
    "Adam", "ConvHead", "DEFAULT_LAYERS", "GradientBundle", "GradientMode", "LossValue", "Policy",
    "TrainConfig", "TrainResult", "Window", "adam_update", "adjoint_gradients", "adjoint_solve",
    "bptt_gradients", "cosine_loss", "cosine_loss_and_grad", "evaluate_loss", "load_policy",
    "save_checkpoint", "save_policy", "sequence_loss", "split_by_episode", "train_policy",
    "write_curves",
]
