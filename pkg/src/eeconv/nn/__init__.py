from .layers import (
    AugmentedPair,
    build_augmented_pair,
    eeconv_forward,
    framelet_conv_forward,
    gcn_forward,
)
from .model import (
    GraphContext,
    ModelConfig,
    ModelState,
    backward,
    init_state,
    load_checkpoint,
    model_forward,
    prepare_context,
    save_checkpoint,
)
from .optim import adam_step, cross_entropy_loss, softmax
from .train import TrainConfig, TrainResult, train
from .checks import eigenvalue_sandwich, energy_trajectory, equivariance_check, gradcheck

__all__ = [
    "AugmentedPair", "build_augmented_pair", "eeconv_forward", "framelet_conv_forward",
    "gcn_forward", "GraphContext", "ModelConfig", "ModelState", "backward", "init_state",
    "load_checkpoint", "model_forward", "prepare_context", "save_checkpoint", "adam_step",
    "cross_entropy_loss", "softmax", "TrainConfig", "TrainResult", "train",
    "eigenvalue_sandwich", "energy_trajectory", "equivariance_check", "gradcheck",
]
