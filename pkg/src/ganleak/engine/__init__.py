"""Numerical core: float64 tensors, reverse-mode autodiff, Adam."""
from .nn import INIT_STD, Linear, Parameter, load_state_dict, state_dict
from .optim import Adam, AdamState, NonFiniteGradient, adam_step, sgd_step
from .rng import RngStream, as_generator
from .tensor import (
    LEAKY_SLOPE,
    DetachedError,
    NonFiniteError,
    Tensor,
    add,
    affine,
    as_tensor,
    backward,
    broadcast_to,
    clamp,
    div,
    exp,
    grad,
    is_recording,
    l2_norm,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    power,
    recording,
    reshape,
    sigmoid,
    sqrt,
    square,
    sub,
    sum_to,
    tanh,
    transpose,
    tsum,
)

__all__ = [
    "INIT_STD", "LEAKY_SLOPE", "Adam", "AdamState", "DetachedError", "Linear", "NonFiniteError",
    "NonFiniteGradient", "Parameter", "RngStream", "Tensor", "adam_step", "add", "affine", "as_generator",
    "as_tensor", "backward", "broadcast_to", "clamp", "div", "exp", "grad", "is_recording", "l2_norm",
    "leaky_relu", "load_state_dict", "log", "matmul", "mean", "mul", "neg", "no_grad", "power", "recording",
    "reshape", "sgd_step", "sigmoid", "sqrt", "square", "state_dict", "sub", "sum_to", "tanh", "transpose",
    "tsum",
]
