from .network import (
    ForwardOutput,
    ModelConfig,
    backward,
    forward,
    init_params,
    loss,
)
from .optim import OptimizerState, adamw_update, decays, init_optimizer, learning_rate
from .training import PretrainConfig, PretrainResult, collate, pretrain, train_step

__all__ = [
    "ForwardOutput",
    "ModelConfig",
    "OptimizerState",
    "PretrainConfig",
    "PretrainResult",
    "adamw_update",
    "backward",
    "collate",
    "decays",
    "forward",
    "init_optimizer",
    "init_params",
    "learning_rate",
    "loss",
    "pretrain",
    "train_step",
]
