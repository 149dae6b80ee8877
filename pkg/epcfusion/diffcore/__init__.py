"""Reverse-mode differentiation, layers and optimisation on numpy float64."""

from .tensor import Function, Parameter, Tensor, as_tensor, grad_enabled, no_grad
from . import functional
from .functional import (concat, conv1d, cross_entropy, dense, dropout, embedding_lookup, global_average_pool,
                         huber_loss, masked_mean_pool, relu, softmax)
from .layers import MLP, Conv1d, Dense, Dropout, DropoutStream, Embedding, Module
from .optim import Adam, OptimState, ParamGroup, PlateauScheduler, clip_grad_norm, global_grad_norm
from .gradcheck import GradCheckResult, grad_check, grad_check_report
from .checkpoint import FORMAT_VERSION, file_hash, load_checkpoint, save_checkpoint
