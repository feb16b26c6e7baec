"""Image quality metrics: PSNR, SSIM and BT.601 luma."""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.signal import convolve2d

from swformer.errors import DimensionError, UsageError
from swformer.tensor import ops
from swformer.tensor.core import Tensor
from swformer.workers.pool import map_ordered

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Tensor]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Full-range BT.601 luma: white maps to 1.0, black to 0.0.
Y_WEIGHTS = (0.299, 0.587, 0.114)
# Studio swing: Y in [16, 235] / 255.
Y_WEIGHTS_STUDIO = (65.481 / 255.0, 128.553 / 255.0, 24.966 / 255.0)
Y_OFFSET_STUDIO = 16.0 / 255.0


def _as_image(x: ArrayLike) -> np.ndarray:
    """(c, h, w) or (h, w) float64 array; a leading batch of one is dropped."""
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if data.ndim == 4:
        if data.shape[0] != 1:
            raise UsageError(f"Metrics take one image at a time, got batch of {data.shape[0]}")
        data = data[0]
    if data.ndim not in (2, 3):
        raise DimensionError(f"Expected (c, h, w) or (h, w) image, got shape {data.shape}")
    return data.astype(np.float64, copy=False)


def _check_pair(x: np.ndarray, y: np.ndarray, what: str) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"{what}: shapes {x.shape} and {y.shape} differ")


def psnr(x: ArrayLike, y: ArrayLike, max_val: float = 1.0) -> float:
    """20*log10(max_val / sqrt(MSE)) in dB; identical inputs give +inf."""
    a, b = _as_image(x), _as_image(y)
    _check_pair(a, b, "psnr")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(max_val / math.sqrt(mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_plane(a: np.ndarray, b: np.ndarray, window: np.ndarray, data_range: float) -> float:
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(img):
        return convolve2d(img, window, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(numerator / denominator))


def ssim(x: ArrayLike, y: ArrayLike, data_range: float = 1.0) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), averaged over channels."""
    a, b = _as_image(x), _as_image(y)
    _check_pair(a, b, "ssim")
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.shape[1] < SSIM_WINDOW or a.shape[2] < SSIM_WINDOW:
        raise UsageError(
            f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[1]}x{a.shape[2]}"
        )
    window = gaussian_window()
    return float(np.mean([_ssim_plane(pa, pb, window, data_range) for pa, pb in zip(a, b)]))


def to_y_channel(rgb: ArrayLike, studio_swing: bool = False) -> ArrayLike:
    """BT.601 luma of an RGB image.

    Tensors (n, 3, h, w) give a (n, 1, h, w) tensor; arrays (3, h, w) give
    (1, h, w). Full range by default; ``studio_swing`` maps to [16, 235]/255.
    """
    weights = Y_WEIGHTS_STUDIO if studio_swing else Y_WEIGHTS
    offset = Y_OFFSET_STUDIO if studio_swing else 0.0

    if isinstance(rgb, Tensor):
        if rgb.ndim != 4 or rgb.shape[1] != 3:
            raise DimensionError(f"to_y_channel needs 3 channels on the channel axis, got {rgb.shape}")
        w = Tensor(np.asarray(weights).reshape(1, 3, 1, 1), dtype=rgb.dtype)
        y = ops.reduce_sum(ops.mul(rgb, w), axes=1)
        return ops.add_scalar(y, offset) if offset else y

    data = np.asarray(rgb)
    channel_axis = 0 if data.ndim == 3 else 1
    if data.ndim not in (3, 4) or data.shape[channel_axis] != 3:
        raise DimensionError(f"to_y_channel needs 3 channels on the channel axis, got {data.shape}")
    w = np.asarray(weights, dtype=data.dtype if data.dtype.kind == "f" else np.float64)
    y = np.tensordot(w, np.moveaxis(data, channel_axis, 0), axes=1)
    return np.expand_dims(y + offset, channel_axis)


@dataclass
class ImageMetric:
    """Scores of one image."""
    image_id: str
    psnr_db: float
    ssim: float


@dataclass
class MetricReport:
    """Per-image scores and their means."""
    y_channel: bool = False
    images: List[ImageMetric] = field(default_factory=list)

    @property
    def psnr_db(self) -> float:
        return float(np.mean([m.psnr_db for m in self.images])) if self.images else math.nan

    @property
    def ssim(self) -> float:
        return float(np.mean([m.ssim for m in self.images])) if self.images else math.nan

    def records(self) -> List[dict]:
        rows = [{**asdict(m), "y_channel": self.y_channel} for m in self.images]
        rows.append({
            "image_id": "__mean__",
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
            "y_channel": self.y_channel,
            "count": len(self.images),
        })
        return rows

    def write_jsonl(self, path: Union[str, Path]) -> Path:
        """One JSON object per image, then the aggregate; +inf PSNR is written as ``Infinity``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            for row in self.records():
                f.write(json.dumps(row, sort_keys=True) + "\n")
        os.replace(tmp, path)
        return path

    @classmethod
    def read_jsonl(cls, path: Union[str, Path]) -> "MetricReport":
        report = cls()
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                row = json.loads(line)
                report.y_channel = bool(row.get("y_channel", False))
                if row["image_id"] != "__mean__":
                    report.images.append(ImageMetric(row["image_id"], row["psnr_db"], row["ssim"]))
        return report


def evaluate_pairs(
    restored: Sequence[ArrayLike],
    reference: Sequence[ArrayLike],
    ids: Optional[Sequence[str]] = None,
    y_channel: bool = False,
    workers: int = 1,
) -> MetricReport:
    """Score aligned image lists, optionally on the luma channel only."""
    if len(restored) != len(reference):
        raise UsageError(f"{len(restored)} restored images but {len(reference)} references")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(restored))]

    def score(index: int) -> ImageMetric:
        a, b = _as_image(restored[index]), _as_image(reference[index])
        if y_channel:
            a, b = to_y_channel(a), to_y_channel(b)
        return ImageMetric(ids[index], psnr(a, b), ssim(a, b))

    report = MetricReport(y_channel=y_channel, images=map_ordered(score, range(len(ids)), workers))
    logger.info(
        "Evaluated %d images: PSNR %.3f dB, SSIM %.5f (y_channel=%s)",
        len(report.images), report.psnr_db, report.ssim, y_channel,
    )
    return report
