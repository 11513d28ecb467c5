"""Minimal reverse-mode autodiff kernel used by every AT-AT network."""

from .tensor import (
    Tensor, no_grad, add, sub, mul, div, neg, power, exp, log, sqrt, clip, where,
    relu, leaky_relu, sigmoid, tanh, softmax, log_softmax, tsum, mean, reshape,
    transpose, swapaxes, getitem, concat, stack, matmul,
)
from .functional import (
    dense, conv1d, conv2d, maxpool1d, maxpool2d, upsample1d, batchnorm, layer_norm,
    dropout, lstm, bce, cc_loss, pearson_rows, cross_entropy, standardize,
)
from .nn import (
    Module, Parameter, Dense, Conv1d, Conv2d, BatchNorm, LayerNorm, Dropout, LSTM,
    MultiHeadSelfAttention, TransformerEncoderLayer,
)
from .optim import Adam, AdamState, adam_step
from .gradcheck import GradCheckReport, grad_check
from .checkpoint import save_checkpoint, load_checkpoint
