"""Trainable SIMO wiretap autoencoder."""
from .losses import hard_decision, loss_e, loss_r, loss_total, softmax
from .net import Adam, LayerSpec, Mlp
from .system import NetParams, backward_batch, decode, encode, forward_batch
from .train import TrainConfig, TrainingDiverged, ber_curve, eve_best_response, evaluate, train

__all__ = [
    "Adam", "LayerSpec", "Mlp", "NetParams", "TrainConfig", "TrainingDiverged",
    "backward_batch", "ber_curve", "decode", "encode", "eve_best_response", "evaluate",
    "forward_batch", "hard_decision", "loss_e", "loss_r", "loss_total", "softmax", "train",
]
