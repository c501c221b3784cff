from .layers import (
    Conv2D,
    Dense,
    Flatten,
    LeakyReLU,
    MaxPool2D,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    leaky_relu,
    leaky_relu_backward,
    maxpool2x2,
    maxpool2x2_backward,
    softmax,
    softmax_cross_entropy,
)
from .model import LayerRow, Sequential, build_cnn, predict
from .optim import Adam, adam_step
from .train import EarlyStopping, History, TrainConfig, stratified_holdout, train
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Conv2D",
    "Dense",
    "Flatten",
    "LeakyReLU",
    "MaxPool2D",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "leaky_relu",
    "leaky_relu_backward",
    "maxpool2x2",
    "maxpool2x2_backward",
    "softmax",
    "softmax_cross_entropy",
    "LayerRow",
    "Sequential",
    "build_cnn",
    "predict",
    "Adam",
    "adam_step",
    "EarlyStopping",
    "History",
    "TrainConfig",
    "stratified_holdout",
    "train",
    "load_checkpoint",
    "save_checkpoint",
]
