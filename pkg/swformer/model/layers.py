"""Parameterised layers built on the tensor ops."""

import math
from typing import Optional

import numpy as np

from swformer.tensor import ops
from swformer.tensor.core import Tensor, get_default_dtype
from swformer.tensor.module import Module, Parameter


class Conv2d(Module):
    """Convolution with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 1,
        rng: Optional[np.random.Generator] = None,
        stride: int = 1,
        padding: Optional[int] = None,
        groups: int = 1,
        bias: bool = True,
        padding_mode: str = "zeros",
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        if padding_mode not in ("zeros", "reflect"):
            raise ValueError(f"Unknown padding mode: {padding_mode}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        self.padding_mode = padding_mode
        self.groups = groups

        fan_in = (in_channels // groups) * kernel_size * kernel_size
        bound = 1.0 / math.sqrt(fan_in)
        dtype = get_default_dtype()
        shape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.weight = Parameter(rng.uniform(-bound, bound, size=shape), dtype=dtype)
        self.bias = Parameter(rng.uniform(-bound, bound, size=out_channels), dtype=dtype) if bias else None

    @classmethod
    def depthwise(
        cls,
        channels: int,
        rng: Optional[np.random.Generator] = None,
        kernel_size: int = 3,
        padding_mode: str = "zeros",
    ) -> "Conv2d":
        return cls(channels, channels, kernel_size, rng, groups=channels, padding_mode=padding_mode)

    def zero_(self) -> "Conv2d":
        self.weight.data[...] = 0.0
        if self.bias is not None:
            self.bias.data[...] = 0.0
        return self

    def set_identity_(self) -> "Conv2d":
        """Centre tap 1 on the diagonal, zero bias (shape-preserving convs only)."""
        self.zero_()
        centre = self.kernel_size // 2
        out_per_group = self.out_channels // self.groups
        in_per_group = self.in_channels // self.groups
        for o in range(self.out_channels):
            i = o % out_per_group if in_per_group > 1 else 0
            self.weight.data[o, i, centre, centre] = 1.0
        return self

    def forward(self, x: Tensor) -> Tensor:
        if self.padding_mode == "reflect" and self.padding:
            p = self.padding
            x = ops.reflect_pad(x, p, p, top=p, left=p)
            return ops.conv2d(x, self.weight, self.bias, self.stride, 0, self.groups)
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class BatchNorm2d(Module):
    """Batch normalisation with running statistics (momentum 0.1, eps 1e-5)."""

    buffer_names = ("running_mean", "running_var")

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        dtype = get_default_dtype()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels), dtype=dtype)
        self.beta = Parameter(np.zeros(channels), dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.batchnorm2d(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            self.training, self.momentum, self.eps,
        )


class LayerNorm2d(Module):
    """Per-channel normalisation over (height, width)."""

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        dtype = get_default_dtype()
        self.eps = eps
        self.gamma = Parameter(np.ones(channels), dtype=dtype)
        self.beta = Parameter(np.zeros(channels), dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm2d(x, self.gamma, self.beta, self.eps)
