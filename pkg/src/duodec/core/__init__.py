from .tensor import (Tensor, as_tensor, concat, default_dtype, dropout, get_default_dtype, log_softmax,
                     no_grad, relu, set_default_dtype, softmax)
from .functional import (conv_subsample, feed_forward, label_smoothed_loss, layer_norm, linear,
                         multi_head_attention, scaled_dot_attention, sinusoidal_positions, subsampled_length)
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "Tensor", "as_tensor", "concat", "default_dtype", "dropout", "get_default_dtype", "log_softmax",
    "no_grad", "relu", "set_default_dtype", "softmax",
    "conv_subsample", "feed_forward", "label_smoothed_loss", "layer_norm", "linear",
    "multi_head_attention", "scaled_dot_attention", "sinusoidal_positions", "subsampled_length",
    "GradCheckReport", "grad_check",
]
