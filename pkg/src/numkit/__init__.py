"""
Dense float64 tensors, reverse-mode differentiation and SGD.
"""
from . import ops
from .gradcheck import check_gradients, numerical_gradient, relative_error
from .ops import (add, add_rows, attention, elementwise, gelu, group_mean, layer_norm, matmul,
                  mse_loss, ordered_matmul, relu, reshape, scale, softmax_cross_entropy,
                  sub, transpose)
from .optim import ParamGroup, sgd_step
from .tensor import Gradients, Tape, Tensor, backward
