"""Environment-conditioned image translation network."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .losses import (
    LossReport,
    NonFiniteLoss,
    build_graph,
    extract_env_t,
    loss_adv,
    loss_cyc,
    loss_env,
    loss_perc,
    loss_rec,
)
from .model import (
    ModelConfig,
    discriminate_t,
    discriminator_params,
    encode_content,
    encode_content_t,
    generate,
    generate_t,
    generator_params,
    init_params,
    zero_grads,
)
from .train import FitResult, fit, lr_for_epoch, preprocess_train, train_step, translate

__all__ = [
    "ModelConfig",
    "init_params",
    "generator_params",
    "discriminator_params",
    "zero_grads",
    "encode_content",
    "encode_content_t",
    "generate",
    "generate_t",
    "discriminate_t",
    "LossReport",
    "NonFiniteLoss",
    "build_graph",
    "extract_env_t",
    "loss_rec",
    "loss_cyc",
    "loss_env",
    "loss_perc",
    "loss_adv",
    "Checkpoint",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "fit",
    "FitResult",
    "train_step",
    "translate",
    "preprocess_train",
    "lr_for_epoch",
]
