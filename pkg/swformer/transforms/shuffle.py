"""Lossless space-to-channel rearrangements."""

from swformer.errors import DimensionError
from swformer.tensor.core import Tensor, record


def _unshuffle(data, r):
    n, c, h, w = data.shape
    out = data.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return out.reshape(n, c * r * r, h // r, w // r)


def _shuffle(data, r):
    n, c, h, w = data.shape
    out = data.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return out.reshape(n, c // (r * r), h * r, w * r)


def pixel_unshuffle(x: Tensor, r: int = 2) -> Tensor:
    """(n, c, h, w) -> (n, c*r*r, h/r, w/r); output channel c*r*r + i*r + j."""
    if x.ndim != 4:
        raise DimensionError(f"pixel_unshuffle: input must be (n, c, h, w), got {x.shape}")
    bad = [name for name, size in (("height", x.shape[2]), ("width", x.shape[3])) if size % r]
    if bad:
        raise DimensionError(f"pixel_unshuffle: {', '.join(bad)} of {x.shape} not divisible by {r}")
    return record(_unshuffle(x.data, r), (x,), lambda g: (_shuffle(g, r),), "pixel_unshuffle")


def pixel_shuffle(x: Tensor, r: int = 2) -> Tensor:
    """Inverse of :func:`pixel_unshuffle`."""
    if x.ndim != 4:
        raise DimensionError(f"pixel_shuffle: input must be (n, c, h, w), got {x.shape}")
    if x.shape[1] % (r * r):
        raise DimensionError(f"pixel_shuffle: channel axis {x.shape[1]} not divisible by {r * r}")
    return record(_shuffle(x.data, r), (x,), lambda g: (_unshuffle(g, r),), "pixel_shuffle")
