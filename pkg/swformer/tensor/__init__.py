"""Numpy tensors with a reverse-mode autodiff tape."""

from swformer.tensor.core import (
    ComplexTensor,
    Tape,
    Tensor,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
    record,
    set_default_dtype,
)
from swformer.tensor.gradcheck import GradCheckReport, ParamCheck, grad_check
from swformer.tensor.module import Module, Parameter
from swformer.tensor.ops import (
    abs,
    add,
    add_scalar,
    avg_pool,
    batchnorm2d,
    bilinear_resize,
    concat,
    conv2d,
    conv2d_transpose,
    count_macs,
    crop,
    gelu,
    layer_norm2d,
    mul,
    pad_to_multiple,
    reduce_mean,
    reduce_sum,
    reflect_pad,
    scale,
    sigmoid,
    slice_axis,
    split,
    sub,
)

__all__ = [
    "ComplexTensor", "Tape", "Tensor", "backward", "get_default_dtype", "is_grad_enabled",
    "no_grad", "precision", "record", "set_default_dtype", "GradCheckReport", "ParamCheck",
    "grad_check", "Module", "Parameter", "abs", "add", "add_scalar", "avg_pool", "batchnorm2d",
    "bilinear_resize", "concat", "conv2d", "conv2d_transpose", "count_macs", "crop", "gelu",
    "layer_norm2d", "mul", "pad_to_multiple", "reduce_mean", "reduce_sum", "reflect_pad",
    "scale", "sigmoid", "slice_axis", "split", "sub",
]
