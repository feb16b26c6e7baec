"""The SWFormer block: spatial-wavelet-Fourier token mixer plus multi-scale FFN."""

import logging
from typing import Dict, List, Optional

import numpy as np

from swformer.config.yaml_config import BranchToggles, ModelConfig
from swformer.errors import DimensionError
from swformer.model.layers import BatchNorm2d, Conv2d, LayerNorm2d
from swformer.tensor import ops
from swformer.tensor.core import ComplexTensor, Tensor, get_default_dtype
from swformer.tensor.module import Module, Parameter
from swformer.transforms.fourier import fft2, ifft2_parts
from swformer.transforms.wavelet import SubBands, WaveletFilterBank, dwt2, idwt2

logger = logging.getLogger(__name__)

# Share of the 4C expansion each branch receives, in units of C.
BRANCH_UNITS = {"spatial": 1, "wavelet": 1, "fourier": 2}
BRANCH_ORDER = ("spatial", "wavelet", "fourier")


def branch_units(toggles: BranchToggles) -> Dict[str, int]:
    """Units of C per branch; a disabled branch's units go round-robin to the enabled ones."""
    enabled = toggles.enabled()
    units = {name: (BRANCH_UNITS[name] if name in enabled else 0) for name in BRANCH_ORDER}
    orphaned = sum(BRANCH_UNITS[name] for name in BRANCH_ORDER if name not in enabled)
    for i in range(orphaned):
        units[enabled[i % len(enabled)]] += 1
    return units


def _check_channels(x: Tensor, expected: int, where: str) -> None:
    if x.ndim != 4 or x.shape[1] != expected:
        raise DimensionError(f"{where}: expected {expected} channels on the channel axis, got shape {x.shape}")


class SpatialBranch(Module):
    """Depthwise 3x3 conv followed by GELU."""

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.channels = channels
        self.activate = True
        self.dw = Conv2d.depthwise(channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        y = self.dw(x)
        return ops.gelu(y) if self.activate else y


class WaveletBranch(Module):
    """Learnable analysis, depthwise conv over the stacked bands, GELU, synthesis.

    Odd spatial sizes are reflect-padded to even and cropped back.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.channels = channels
        self.activate = True
        self.bank = WaveletFilterBank(learnable=True)
        self.dw = Conv2d.depthwise(4 * channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        padded, (h, w) = ops.pad_to_multiple(x, 2)
        z = self.dw(dwt2(padded, self.bank).concat())
        if self.activate:
            z = ops.gelu(z)
        return ops.crop(idwt2(SubBands.from_concat(z), self.bank), h, w)


class FourierBranch(Module):
    """Frequency-domain gating.

    The input is projected and split into two halves; each half is
    transformed and its real and imaginary parts stacked. One stack becomes
    frequency features (BN, 1x1 conv, GELU), the other a sigmoid gate (BN,
    1x1 conv, sigmoid). Their product is split back into a complex spectrum,
    inverted keeping both parts, and reduced to half the input width.
    ``product="literal"`` multiplies the two stacks directly.
    """

    def __init__(self, channels: int, rng: np.random.Generator, product: str = "gated"):
        super().__init__()
        if channels % 2:
            raise DimensionError(f"Fourier branch needs an even channel count, got {channels}")
        self.channels = channels
        self.half = channels // 2
        self.product = product
        self.activate = True
        self.pre = Conv2d(channels, channels, 1, rng)
        if product == "gated":
            self.bn_fd = BatchNorm2d(channels)
            self.pw_fd = Conv2d(channels, channels, 1, rng)
            self.bn_ga = BatchNorm2d(channels)
            self.pw_ga = Conv2d(channels, channels, 1, rng)
        self.reduce = Conv2d(channels, self.half, 1, rng)

    @staticmethod
    def stack_spectrum(x: Tensor) -> Tensor:
        spectrum = fft2(x)
        return ops.concat([spectrum.real, spectrum.imag], axis=1)

    def frequency_features(self, j: Tensor) -> Tensor:
        y = self.pw_fd(self.bn_fd(j))
        return ops.gelu(y) if self.activate else y

    def gate(self, j: Tensor) -> Tensor:
        return ops.sigmoid(self.pw_ga(self.bn_ga(j)))

    def forward(self, x: Tensor) -> Tensor:
        first, second = ops.split(self.pre(x), [self.half, self.half])
        j1, j2 = self.stack_spectrum(first), self.stack_spectrum(second)
        if self.product == "gated":
            mixed = ops.mul(self.frequency_features(j1), self.gate(j2))
        else:
            mixed = ops.mul(j1, j2)
        real, imag = ops.split(mixed, [self.half, self.half])
        restored = ifft2_parts(ComplexTensor(real, imag))
        return self.reduce(ops.concat([restored.real, restored.imag], axis=1))


class ChannelAttention(Module):
    """Squeeze-excite: pool, reduce by ``reduction``, GELU, expand, sigmoid, scale."""

    def __init__(self, channels: int, reduction: int, rng: np.random.Generator):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.squeeze = Conv2d(channels, hidden, 1, rng)
        self.excite = Conv2d(hidden, channels, 1, rng)

    def weights(self, x: Tensor) -> Tensor:
        """Per-channel scale in (0, 1), shape (n, c, 1, 1)."""
        pooled = ops.reduce_mean(x, axes=(2, 3))
        return ops.sigmoid(self.excite(ops.gelu(self.squeeze(pooled))))

    def forward(self, x: Tensor) -> Tensor:
        return ops.mul(x, self.weights(x))


class SWFMixer(Module):
    """Token mixer: 1x1 expand to 4C, three branches, channel attention, 1x1 reduce."""

    def __init__(self, width: int, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.width = width
        self.units = branch_units(config.branches)
        self.expand = Conv2d(width, 4 * width, 1, rng)

        self.spatial: Optional[SpatialBranch] = None
        self.wavelet: Optional[WaveletBranch] = None
        self.fourier: Optional[FourierBranch] = None
        if self.units["spatial"]:
            self.spatial = SpatialBranch(self.units["spatial"] * width, rng)
        if self.units["wavelet"]:
            self.wavelet = WaveletBranch(self.units["wavelet"] * width, rng)
        if self.units["fourier"]:
            self.fourier = FourierBranch(self.units["fourier"] * width, rng, config.fourier_product)

        self.mixed_width = (
            self.units["spatial"] * width + self.units["wavelet"] * width + self.units["fourier"] * width // 2
        )
        self.attention = ChannelAttention(self.mixed_width, config.ca_reduction, rng)
        self.reduce = Conv2d(self.mixed_width, width, 1, rng)

    def branches(self) -> List[Module]:
        return [b for b in (self.spatial, self.wavelet, self.fourier) if b is not None]

    def forward(self, x: Tensor) -> Tensor:
        _check_channels(x, self.width, "SWFM")
        branches = self.branches()
        parts = ops.split(self.expand(x), [b.channels for b in branches])
        mixed = ops.concat([branch(part) for branch, part in zip(branches, parts)], axis=1)
        return self.reduce(self.attention(mixed))


class MSFN(Module):
    """Feed-forward network over full, half and quarter resolution.

    The 2C expansion is split into three parts; the first takes the
    remainder when 2C is not divisible by 3. The upsampled paths are
    concatenated and reduced with no activation in between.
    """

    def __init__(self, width: int, rng: np.random.Generator):
        super().__init__()
        self.width = width
        hidden = 2 * width
        third = hidden // 3
        self.sizes = [hidden - 2 * third, third, third]
        self.expand = Conv2d(width, hidden, 1, rng)
        self.dw = [Conv2d.depthwise(size, rng, padding_mode="reflect") for size in self.sizes]
        self.reduce = Conv2d(hidden, width, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        _check_channels(x, self.width, "MSFN")
        padded, (h, w) = ops.pad_to_multiple(self.expand(x), 4)
        size = padded.shape[2:]
        full, half, quarter = ops.split(padded, self.sizes)
        paths = [
            self.dw[0](full),
            ops.bilinear_resize(self.dw[1](ops.avg_pool(half, 2)), size),
            ops.bilinear_resize(self.dw[2](ops.avg_pool(quarter, 4)), size),
        ]
        fused = ops.concat(paths, axis=1)
        return self.reduce(ops.crop(fused, h, w))


class SWFormerBlock(Module):
    """x + SWFM(norm(x)), then + MSFN(norm(.))."""

    def __init__(self, width: int, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.width = width
        self.norm1 = LayerNorm2d(width)
        self.mixer = SWFMixer(width, config, rng)
        self.norm2 = LayerNorm2d(width)
        self.ffn = MSFN(width, rng)
        self.scale1: Optional[Parameter] = None
        self.scale2: Optional[Parameter] = None
        if config.residual_scale:
            dtype = get_default_dtype()
            self.scale1 = Parameter(np.ones((1, width, 1, 1)), dtype=dtype)
            self.scale2 = Parameter(np.ones((1, width, 1, 1)), dtype=dtype)

    def zero_residual_(self) -> "SWFormerBlock":
        """Zero both final 1x1 convs so the block is the identity map."""
        self.mixer.reduce.zero_()
        self.ffn.reduce.zero_()
        return self

    def forward(self, x: Tensor) -> Tensor:
        _check_channels(x, self.width, "SWFormer block")
        y = self.mixer(self.norm1(x))
        if self.scale1 is not None:
            y = ops.mul(y, self.scale1)
        x = ops.add(x, y)
        y = self.ffn(self.norm2(x))
        if self.scale2 is not None:
            y = ops.mul(y, self.scale2)
        return ops.add(x, y)
