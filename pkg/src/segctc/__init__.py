"""Segmental CRF and CTC losses over a shared BiLSTM encoder, trained jointly."""

from .ctc import ctc_log_likelihood, ctc_loss
from .joint import ModelConfig, TrainConfig, init_model, joint_loss, train
from .kernels import backend_name
from .scrf import scrf_log_numerator, scrf_log_partition, scrf_loss, scrf_viterbi_decode

__version__ = "0.1.0"
