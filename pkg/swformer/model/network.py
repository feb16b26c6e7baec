"""Five-stage encoder-decoder with lossless multi-scale inputs and outputs.

Stage widths are C, 2C, 3C, 2C, C at scales 1, 1/2, 1/4, 1/2, 1. Stage 3,
4 and 5 each end in an exit; exit ``k`` predicts pyramid level ``k`` as the
input level plus a residual.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from swformer.config.yaml_config import EXIT_LEVELS, VARIANTS, ModelConfig, normalize_variant
from swformer.errors import DimensionError, UsageError
from swformer.model.blocks import SWFormerBlock
from swformer.model.layers import Conv2d
from swformer.tensor import ops
from swformer.tensor.core import Tensor, no_grad
from swformer.tensor.module import Module
from swformer.transforms.shuffle import pixel_shuffle, pixel_unshuffle
from swformer.transforms.wavelet import SubBands, dwt2, haar_bank, idwt2

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 8
PAD_MULTIPLE = 4
STAGE_WIDTHS = (1, 2, 3, 2, 1)
LEVEL_EXIT_NAMES = {level: name for name, level in EXIT_LEVELS.items()}


@dataclass
class MultiScaleImage:
    """Pyramid levels; level k is (n, c*4^k, H/2^k, W/2^k) in lmimo mode."""
    levels: List[Tensor]
    mode: str = "lmimo"
    original_size: Optional[Tuple[int, int]] = None

    def __getitem__(self, level: int) -> Tensor:
        return self.levels[level]

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def padded_size(self) -> Tuple[int, int]:
        return self.levels[0].shape[2], self.levels[0].shape[3]


@dataclass
class NetworkOutput:
    """Exit predictions keyed by pyramid level, plus the pyramid they refine."""
    outputs: Dict[int, Tensor]
    inputs: MultiScaleImage
    variant: str = "large"

    @property
    def levels(self) -> List[int]:
        return sorted(self.outputs)


def decompose_input(image: Tensor, mode: str = "lmimo", levels: int = 3) -> MultiScaleImage:
    """Build the input pyramid.

    ``lmimo`` applies the fixed Haar analysis recursively, keeping every band,
    so channels grow 3, 12, 48. ``mimo`` uses bilinear downsampling and keeps
    3 channels. Height and width are reflect-padded to a multiple of 4 first.
    """
    if image.ndim != 4:
        raise DimensionError(f"decompose_input: image must be (n, c, h, w), got {image.shape}")
    _, _, h, w = image.shape
    if h < MIN_IMAGE_SIZE or w < MIN_IMAGE_SIZE:
        raise UsageError(f"Images smaller than {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE} are not supported: {h}x{w}")
    padded, original = ops.pad_to_multiple(image, PAD_MULTIPLE)
    pyramid = [padded]
    bank = haar_bank(dtype=image.dtype)
    for level in range(1, levels):
        if mode == "lmimo":
            pyramid.append(dwt2(pyramid[-1], bank).concat())
        elif mode in ("mimo", "siso"):
            ph, pw = padded.shape[2] >> level, padded.shape[3] >> level
            pyramid.append(ops.bilinear_resize(padded, (ph, pw)))
        else:
            raise UsageError(f"Unknown input mode: {mode}")
    return MultiScaleImage(pyramid, mode, original)


def reconstruct_output(
    output: Tensor,
    level: int,
    mode: str = "lmimo",
    size: Optional[Tuple[int, int]] = None,
    channels: int = 3,
) -> Tensor:
    """Bring an exit prediction back to (n, channels, H, W).

    ``lmimo`` inverts ``level`` Haar analyses exactly; ``mimo`` upsamples
    bilinearly. ``size`` crops (lmimo) or sets the target size (mimo).
    """
    if mode == "lmimo":
        expected = channels * 4 ** level
        if output.ndim != 4 or output.shape[1] != expected:
            raise DimensionError(
                f"reconstruct_output: level {level} needs {expected} channels on the channel axis, "
                f"got shape {output.shape}"
            )
        bank = haar_bank(dtype=output.dtype)
        image = output
        for _ in range(level):
            image = idwt2(SubBands.from_concat(image), bank)
        if size is not None:
            image = ops.crop(image, *size)
        return image

    if output.ndim != 4 or output.shape[1] != channels:
        raise DimensionError(f"reconstruct_output: expected {channels} channels, got shape {output.shape}")
    target = size or (output.shape[2] << level, output.shape[3] << level)
    if level == 0:
        return ops.crop(output, *target)
    return ops.bilinear_resize(output, target)


class ConvStack(Module):
    """``depth`` 3x3 convs with GELU between them (encoders and decoder heads)."""

    def __init__(self, in_channels: int, out_channels: int, depth: int, rng: np.random.Generator, hidden: Optional[int] = None):
        super().__init__()
        hidden = hidden or out_channels
        widths = [in_channels] + [hidden] * (depth - 1) + [out_channels]
        self.convs = [Conv2d(a, b, 3, rng) for a, b in zip(widths[:-1], widths[1:])]

    @property
    def last(self) -> Conv2d:
        return self.convs[-1]

    def forward(self, x: Tensor) -> Tensor:
        for i, conv in enumerate(self.convs):
            if i:
                x = ops.gelu(x)
            x = conv(x)
        return x


class MultiInputFusion(Module):
    """Concat stage features with an encoded auxiliary input, 1x1 conv back to stage width."""

    def __init__(self, width: int, rng: np.random.Generator):
        super().__init__()
        self.width = width
        self.proj = Conv2d(2 * width, width, 1, rng)

    def forward(self, stage_feat: Tensor, encoded: Tensor) -> Tensor:
        return fuse_multi_input(self, stage_feat, encoded)


def fuse_multi_input(fusion: MultiInputFusion, stage_feat: Tensor, encoded: Tensor) -> Tensor:
    if stage_feat.shape != encoded.shape:
        raise DimensionError(
            f"fuse_multi_input: stage features {stage_feat.shape} and encoded input {encoded.shape} "
            "differ in scale or width"
        )
    return fusion.proj(ops.concat([stage_feat, encoded], axis=1))


class Stage(Module):
    """N SWFormer blocks at one width."""

    def __init__(self, width: int, depth: int, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.blocks = [SWFormerBlock(width, config, rng) for _ in range(depth)]

    def forward(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return x


class SWFormerNet(Module):
    """The restoration network.

    ``config.variant`` fixes the deepest exit that gets built; ``forward``
    may stop at any exit up to it and shares every computation before that
    exit with deeper variants.
    """

    def __init__(self, config: Optional[ModelConfig] = None):
        super().__init__()
        self.config = config = config or ModelConfig()
        rng = np.random.default_rng(config.init_seed)
        c = config.base_width
        widths = [k * c for k in STAGE_WIDTHS]
        depth = config.encoder_depth
        cin = config.in_channels
        self.mode = config.io_mode
        self.built_variant = config.variant
        self.level_channels = self._level_channels()
        n_stages = {"small": 3, "medium": 4, "large": 5}[config.variant]
        aux = self.mode != "siso"

        self.encode1 = ConvStack(cin, widths[0], depth, rng)
        self.stage1 = Stage(widths[0], config.blocks_per_stage[0], config, rng)
        self.down1 = Conv2d(4 * widths[0], widths[1], 1, rng)
        self.encode2 = ConvStack(self.level_channels[1], widths[1], depth, rng) if aux else None
        self.fuse2 = MultiInputFusion(widths[1], rng) if aux else None
        self.stage2 = Stage(widths[1], config.blocks_per_stage[1], config, rng)
        self.down2 = Conv2d(4 * widths[1], widths[2], 1, rng)
        self.encode3 = ConvStack(self.level_channels[2], widths[2], depth, rng) if aux else None
        self.fuse3 = MultiInputFusion(widths[2], rng) if aux else None
        self.stage3 = Stage(widths[2], config.blocks_per_stage[2], config, rng)
        self.head3 = ConvStack(widths[2], self.level_channels[2], depth, rng, hidden=widths[2]) if aux else None

        self.up3 = self.skip4 = self.stage4 = self.head4 = None
        if n_stages >= 4:
            self.up3 = Conv2d(widths[2], 4 * widths[3], 1, rng)
            self.skip4 = Conv2d(2 * widths[3], widths[3], 1, rng)
            self.stage4 = Stage(widths[3], config.blocks_per_stage[3], config, rng)
            self.head4 = ConvStack(widths[3], self.level_channels[1], depth, rng, hidden=widths[3]) if aux else None

        self.up4 = self.skip5 = self.stage5 = self.head5 = None
        if n_stages == 5:
            self.up4 = Conv2d(widths[3], 4 * widths[4], 1, rng)
            self.skip5 = Conv2d(2 * widths[4], widths[4], 1, rng)
            self.stage5 = Stage(widths[4], config.blocks_per_stage[4], config, rng)
            self.head5 = ConvStack(widths[4], cin, depth, rng, hidden=widths[4])

        if config.zero_init_heads:
            self.zero_heads_()

        logger.debug(
            "SWFormerNet built: mode=%s variant=%s C=%d params=%d",
            self.mode, self.built_variant, c, self.num_parameters(),
        )

    def _level_channels(self) -> List[int]:
        cin = self.config.in_channels
        if self.mode == "lmimo":
            return [cin, 4 * cin, 16 * cin]
        return [cin, cin, cin]

    def heads(self) -> Dict[int, ConvStack]:
        heads = {2: self.head3, 1: self.head4, 0: self.head5}
        return {level: head for level, head in heads.items() if head is not None}

    def zero_heads_(self) -> "SWFormerNet":
        """Zero every head's last conv so each exit returns its input level."""
        for head in self.heads().values():
            head.last.zero_()
        return self

    @property
    def exit_levels(self) -> List[int]:
        return sorted(self.heads(), reverse=True)

    def _resolve_variant(self, variant: Optional[str]) -> str:
        variant = normalize_variant(variant) if variant else self.built_variant
        if VARIANTS.index(variant) > VARIANTS.index(self.built_variant):
            raise UsageError(f"Network was built up to variant {self.built_variant}; cannot run {variant}")
        if self.mode == "siso" and variant != "large":
            raise UsageError("siso networks only have the large exit")
        return variant

    def _run_stage(self, index: int, module: Module, *args: Tensor) -> Tensor:
        try:
            return module(*args)
        except DimensionError as e:
            raise DimensionError(f"stage {index}: {e}") from e

    def forward(self, image: Tensor, variant: Optional[str] = None) -> NetworkOutput:
        variant = self._resolve_variant(variant)
        aux = self.mode != "siso"
        pyramid = decompose_input(image, self.mode, levels=3 if aux else 1)
        outputs: Dict[int, Tensor] = {}

        f1 = self._run_stage(1, self.stage1, self.encode1(pyramid[0]))
        x = self.down1(pixel_unshuffle(f1))
        if aux:
            x = self.fuse2(x, self.encode2(pyramid[1]))
        f2 = self._run_stage(2, self.stage2, x)
        x = self.down2(pixel_unshuffle(f2))
        if aux:
            x = self.fuse3(x, self.encode3(pyramid[2]))
        f3 = self._run_stage(3, self.stage3, x)
        if aux:
            outputs[2] = ops.add(pyramid[2], self.head3(f3))
        if variant == "small":
            return NetworkOutput(outputs, pyramid, variant)

        x = pixel_shuffle(self.up3(f3))
        x = self.skip4(ops.concat([x, f2], axis=1))
        f4 = self._run_stage(4, self.stage4, x)
        if aux:
            outputs[1] = ops.add(pyramid[1], self.head4(f4))
        if variant == "medium":
            return NetworkOutput(outputs, pyramid, variant)

        x = pixel_shuffle(self.up4(f4))
        x = self.skip5(ops.concat([x, f1], axis=1))
        f5 = self._run_stage(5, self.stage5, x)
        outputs[0] = ops.add(pyramid[0], self.head5(f5))
        return NetworkOutput(outputs, pyramid, variant)

    def reconstruct(self, result: NetworkOutput, level: int) -> Tensor:
        """Full-resolution image of one exit, cropped to the original size."""
        channels = self.config.in_channels
        original = result.inputs.original_size
        if self.mode == "lmimo":
            return reconstruct_output(result.outputs[level], level, "lmimo", size=original, channels=channels)
        image = reconstruct_output(
            result.outputs[level], level, self.mode, size=result.inputs.padded_size, channels=channels
        )
        return ops.crop(image, *original)

    def restore(self, image: Tensor, variant: Optional[str] = None) -> Dict[str, Tensor]:
        """Inference: exit name (small/medium/large) -> (n, c, H, W) image."""
        with no_grad():
            result = self.forward(image, variant)
            return {LEVEL_EXIT_NAMES[level]: self.reconstruct(result, level) for level in result.levels}


def count_params(config: ModelConfig) -> int:
    """Trainable scalars of the network ``config`` describes."""
    return SWFormerNet(config).num_parameters()


def profile_macs(net: SWFormerNet, size: Tuple[int, int] = (64, 64), variant: Optional[str] = None) -> int:
    """Convolution multiply-accumulates of one forward pass on a 1-image batch."""
    image = Tensor(np.zeros((1, net.config.in_channels) + tuple(size)))
    was_training = net.training
    net.eval()
    try:
        with no_grad(), ops.count_macs() as counter:
            net.forward(image, variant)
    finally:
        net.train(was_training)
    return counter.total
