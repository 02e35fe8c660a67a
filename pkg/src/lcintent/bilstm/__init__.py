"""Bidirectional LSTM sequence encoder."""
from .cell import LSTMParams, bilstm_backward, bilstm_forward, bilstm_layer, lstm_cell, sigmoid
from .encoder import BiLSTMEncoder, embed_batch, encode, pool
from .training import TrainConfig, fit_standardization, train_encoder
