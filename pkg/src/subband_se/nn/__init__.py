from .core import Module, Param, ParamSet, ShapeError, adam_step, clip_grad_norm
from .gradcheck import GradCheckReport, check_module, grad_check, relative_error
from .layers import (
    LSTM,
    AvgPoolTime,
    ChannelNorm,
    Dense,
    DepthwiseConv1d,
    PointwiseConv,
    PReLU,
    ReLU,
    Sigmoid,
    sigmoid,
)

__all__ = [
    "LSTM",
    "AvgPoolTime",
    "ChannelNorm",
    "Dense",
    "DepthwiseConv1d",
    "GradCheckReport",
    "Module",
    "Param",
    "ParamSet",
    "PReLU",
    "PointwiseConv",
    "ReLU",
    "ShapeError",
    "Sigmoid",
    "adam_step",
    "check_module",
    "clip_grad_norm",
    "grad_check",
    "relative_error",
    "sigmoid",
]
