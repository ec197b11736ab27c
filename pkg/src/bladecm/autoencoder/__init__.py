from .layers import LSTM, Conv1D, Dense, Flatten, LayerSpec, Reshape, lstm_step
from .model import (AeModel, TrainReport, backward, default_stack, forward, mae_statistic,
                    mse_loss, train_ae)
from .network import Adam, Network

__all__ = [
    "LSTM", "Conv1D", "Dense", "Flatten", "LayerSpec", "Reshape", "lstm_step",
    "AeModel", "TrainReport", "backward", "default_stack", "forward", "mae_statistic",
    "mse_loss", "train_ae", "Adam", "Network",
]
