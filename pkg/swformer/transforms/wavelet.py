"""Single-level 2D wavelet analysis and synthesis with 2x2 filters.

Analysis is a depthwise stride-2 convolution per band; synthesis is the
matching transposed convolution. Band order is always LL, LH, HL, HH.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from swformer.errors import DimensionError
from swformer.tensor import ops
from swformer.tensor.core import Tensor, get_default_dtype, no_grad
from swformer.tensor.module import Module, Parameter

logger = logging.getLogger(__name__)

BANDS: Tuple[str, ...] = ("LL", "LH", "HL", "HH")

HAAR_FILTERS: Dict[str, np.ndarray] = {
    "LL": 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]]),
    "LH": 0.5 * np.array([[-1.0, -1.0], [1.0, 1.0]]),
    "HL": 0.5 * np.array([[-1.0, 1.0], [-1.0, 1.0]]),
    "HH": 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]]),
}

RECONSTRUCTION_TOL = 1e-5


@dataclass
class SubBands:
    """The four half-resolution bands of one decomposition level."""
    LL: Tensor
    LH: Tensor
    HL: Tensor
    HH: Tensor

    def __post_init__(self):
        shapes = {band: getattr(self, band).shape for band in BANDS}
        if len(set(shapes.values())) != 1:
            raise DimensionError(f"sub-band shapes differ: {shapes}")

    def __getitem__(self, band: str) -> Tensor:
        if band not in BANDS:
            raise KeyError(band)
        return getattr(self, band)

    def items(self) -> Iterable[Tuple[str, Tensor]]:
        return ((band, getattr(self, band)) for band in BANDS)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.LL.shape

    def concat(self) -> Tensor:
        """(n, 4c, h/2, w/2), band-major: channels [LL | LH | HL | HH]."""
        return ops.concat([self.LL, self.LH, self.HL, self.HH], axis=1)

    @classmethod
    def from_concat(cls, x: Tensor) -> "SubBands":
        if x.ndim != 4 or x.shape[1] % 4:
            raise DimensionError(f"sub-band tensor needs a channel axis divisible by 4, got {x.shape}")
        c = x.shape[1] // 4
        return cls(*ops.split(x, [c, c, c, c], axis=1))


class WaveletFilterBank(Module):
    """Four 2x2 analysis filters and four synthesis filters, shared across channels.

    Both sides start as orthonormal Haar; synthesis is applied through a
    transposed convolution, so equal filters make it the exact inverse.
    Learnable banks are unconstrained after initialisation.
    """

    def __init__(self, learnable: bool = True, dtype=None):
        super().__init__()
        self.learnable = learnable
        dtype = np.dtype(dtype) if dtype is not None else get_default_dtype()
        for band in BANDS:
            init = HAAR_FILTERS[band].reshape(1, 1, 2, 2)
            if learnable:
                setattr(self, f"analysis_{band}", Parameter(init, dtype=dtype))
                setattr(self, f"synthesis_{band}", Parameter(init, dtype=dtype))
            else:
                setattr(self, f"analysis_{band}", Tensor(init, dtype=dtype))
                setattr(self, f"synthesis_{band}", Tensor(init, dtype=dtype))

    def analysis(self, band: str) -> Tensor:
        return getattr(self, f"analysis_{band}")

    def synthesis(self, band: str) -> Tensor:
        return getattr(self, f"synthesis_{band}")

    def reconstruction_error(self, x: Tensor) -> float:
        """Max abs error of synthesis(analysis(x)); warns above 1e-5."""
        with no_grad():
            padded, (h, w) = ops.pad_to_multiple(x, 2)
            restored = ops.crop(idwt2(dwt2(padded, self), self), h, w)
        error = float(np.max(np.abs(restored.data - x.data), initial=0.0))
        if error > RECONSTRUCTION_TOL:
            logger.warning("Wavelet bank no longer reconstructs perfectly: max error %.3e", error)
        return error


_fixed_banks: Dict[str, WaveletFilterBank] = {}


def haar_bank(learnable: bool = False, dtype=None) -> WaveletFilterBank:
    """Haar bank; fixed banks are shared per dtype, learnable ones are fresh."""
    if learnable:
        return WaveletFilterBank(learnable=True, dtype=dtype)
    key = (np.dtype(dtype) if dtype is not None else get_default_dtype()).name
    if key not in _fixed_banks:
        _fixed_banks[key] = WaveletFilterBank(learnable=False, dtype=key)
    return _fixed_banks[key]


def _depthwise(filt: Tensor, channels: int) -> Tensor:
    """Repeat a (1, 1, 2, 2) filter over channels, summing gradients back onto it."""
    return ops.mul(Tensor(np.ones((channels, 1, 1, 1)), dtype=filt.dtype), filt)


def dwt2(x: Tensor, bank: Optional[WaveletFilterBank] = None) -> SubBands:
    """One analysis level; height and width must be even."""
    if x.ndim != 4:
        raise DimensionError(f"dwt2: input must be (n, c, h, w), got {x.shape}")
    bad = [name for name, size in (("height", x.shape[2]), ("width", x.shape[3])) if size % 2]
    if bad:
        raise DimensionError(
            f"dwt2: {', '.join(bad)} of {x.shape} is odd; reflect-pad to even first"
        )
    bank = bank or haar_bank(dtype=x.dtype)
    c = x.shape[1]
    bands = [ops.conv2d(x, _depthwise(bank.analysis(b), c), stride=2, groups=c) for b in BANDS]
    return SubBands(*bands)


def idwt2(bands: SubBands, bank: Optional[WaveletFilterBank] = None) -> Tensor:
    """One synthesis level, doubling height and width."""
    bank = bank or haar_bank(dtype=bands.LL.dtype)
    c = bands.shape[1]
    out = None
    for band, value in bands.items():
        part = ops.conv2d_transpose(value, _depthwise(bank.synthesis(band), c), stride=2, groups=c)
        out = part if out is None else ops.add(out, part)
    return out
