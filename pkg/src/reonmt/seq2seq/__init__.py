"""Attention encoder-decoder with optional reordered encoder layer."""

from .decode import EnsembleError, hypothesis_text, translate, translate_corpus
from .model import (
    AttentionStep,
    EncoderStates,
    NonFiniteLoss,
    attend,
    decode_step,
    encode,
    forward_loss,
    init_state,
    loss_and_gradients,
)
from .params import VARIANTS, HyperParams, Model, init_params, param_shapes
from .serialize import (
    ModelFormatError,
    ModelHeaderError,
    ModelTruncatedError,
    ModelVersionError,
    load_model,
    save_model,
)
from .train import OptConfig, TrainingDiverged, TrainResult, train, train_model

__all__ = [
    "AttentionStep", "EncoderStates", "EnsembleError", "HyperParams", "Model",
    "ModelFormatError", "ModelHeaderError", "ModelTruncatedError", "ModelVersionError",
    "NonFiniteLoss", "OptConfig", "TrainResult", "TrainingDiverged", "VARIANTS", "attend",
    "decode_step", "encode", "forward_loss", "hypothesis_text", "init_params", "init_state",
    "load_model", "loss_and_gradients", "param_shapes", "save_model", "train",
    "train_model", "translate", "translate_corpus",
]
