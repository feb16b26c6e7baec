"""Seeded synthetic degradations and procedural clean images.

Every generator draws from ``np.random.default_rng(spec.seed)``, so the same
clean image and spec always produce the same degraded image bit for bit.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy.ndimage import correlate1d, gaussian_filter

from swformer.config.yaml_config import DegradationSpec
from swformer.errors import ConfigError, DimensionError
from swformer.tensor.core import Tensor

logger = logging.getLogger(__name__)

# Blur kernels extend to ceil(BLUR_TRUNCATE * sigma) on each side.
BLUR_TRUNCATE = 3.0
CLEAN_KINDS = ("gradient", "checkerboard", "smooth_field", "text")
GLYPHS = "ABCDEFGHJKLMNPQRSTUVWXYZ0123456789"


@dataclass
class PairedSample:
    """A degraded image and its clean reference, both (3, H, W) in [0, 1]."""
    degraded: Tensor
    clean: Tensor
    id: str
    spec: Optional[DegradationSpec] = None

    def __post_init__(self):
        if self.degraded.shape != self.clean.shape:
            raise DimensionError(
                f"pair {self.id}: degraded shape {self.degraded.shape} != clean shape {self.clean.shape}"
            )

    @property
    def size(self):
        return self.clean.shape[1], self.clean.shape[2]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalised, truncated 1-D Gaussian; sigma 0 gives the unit impulse."""
    if sigma == 0:
        return np.ones(1)
    radius = int(math.ceil(BLUR_TRUNCATE * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur over the last two axes, reflect boundary."""
    if sigma == 0:
        return image.copy()
    kernel = gaussian_kernel1d(sigma)
    out = correlate1d(image, kernel, axis=-1, mode="reflect")
    return correlate1d(out, kernel, axis=-2, mode="reflect")


def _streak_mask(shape, params: Dict[str, float], rng: np.random.Generator) -> np.ndarray:
    h, w = shape
    count = int(params["count"])
    length = float(params["length"])
    width = max(1, int(params["width"]))
    _require(count >= 0, f"rain_streaks count must be >= 0, got {count}")
    _require(length >= 1, f"rain_streaks length must be >= 1, got {length}")

    mask = np.zeros((h, w))
    starts_y = rng.uniform(-length, h, size=count)
    starts_x = rng.uniform(0, w, size=count)
    angles = np.deg2rad(params["angle"] + rng.uniform(-5.0, 5.0, size=count))
    strengths = rng.uniform(0.6, 1.0, size=count)
    steps = np.linspace(0.0, length, int(math.ceil(length)) * 2 + 1)
    for y0, x0, theta, strength in zip(starts_y, starts_x, angles, strengths):
        ys = np.round(y0 + steps * math.cos(theta)).astype(int)
        xs = np.round(x0 + steps * math.sin(theta)).astype(int)
        for offset in range(width):
            keep = (ys >= 0) & (ys < h) & (xs + offset >= 0) & (xs + offset < w)
            mask[ys[keep], xs[keep] + offset] = np.maximum(mask[ys[keep], xs[keep] + offset], strength)
    return gaussian_filter(mask, 0.5, mode="reflect")


def _rain_streaks(clean: np.ndarray, params: Dict[str, float], rng: np.random.Generator) -> np.ndarray:
    intensity = params["intensity"]
    _require(0.0 <= intensity <= 1.0, f"rain_streaks intensity must lie in [0, 1], got {intensity}")
    alpha = np.clip(intensity * _streak_mask(clean.shape[1:], params, rng), 0.0, 1.0)
    return clean + alpha[None] * (1.0 - clean)


def _haze(clean: np.ndarray, params: Dict[str, float], rng: np.random.Generator) -> np.ndarray:
    """Scattering model I = J*t + A*(1 - t) with a smooth transmission map."""
    t_min, t_max, airlight = params["t_min"], params["t_max"], params["airlight"]
    _require(0.0 < t_min <= 1.0 and 0.0 < t_max <= 1.0, f"haze transmission must lie in (0, 1], got [{t_min}, {t_max}]")
    _require(t_min <= t_max, f"haze t_min {t_min} exceeds t_max {t_max}")
    _require(0.0 <= airlight <= 1.0, f"haze airlight must lie in [0, 1], got {airlight}")

    h, w = clean.shape[1:]
    depth = gaussian_filter(rng.standard_normal((h, w)), max(h, w) / 8.0, mode="reflect")
    depth += np.linspace(0.0, 1.0, h)[:, None] * depth.std()
    span = depth.max() - depth.min()
    depth = (depth - depth.min()) / span if span > 0 else np.zeros_like(depth)
    t = t_max - (t_max - t_min) * depth
    return clean * t[None] + airlight * (1.0 - t[None])


def _gaussian_blur(clean: np.ndarray, params: Dict[str, float], rng: np.random.Generator) -> np.ndarray:
    sigma = params["sigma"]
    _require(sigma >= 0, f"gaussian_blur sigma must be >= 0, got {sigma}")
    return blur(clean, sigma)


def _low_light(clean: np.ndarray, params: Dict[str, float], rng: np.random.Generator) -> np.ndarray:
    gamma, noise_sigma = params["gamma"], params["noise_sigma"]
    _require(gamma > 0, f"low_light gamma must be > 0, got {gamma}")
    _require(noise_sigma >= 0, f"low_light noise_sigma must be >= 0, got {noise_sigma}")
    dark = clean ** gamma
    if noise_sigma > 0:
        dark = dark + rng.normal(0.0, noise_sigma, size=clean.shape)
    return dark


def _snow(clean: np.ndarray, params: Dict[str, float], rng: np.random.Generator) -> np.ndarray:
    """Bright soft-edged flakes, lightly blurred and alpha-composited."""
    count = int(params["count"])
    r_min, r_max = params["radius_min"], params["radius_max"]
    opacity, blur_sigma = params["opacity"], params["blur_sigma"]
    _require(count >= 0, f"snow count must be >= 0, got {count}")
    _require(0.0 < r_min <= r_max, f"snow radii must satisfy 0 < radius_min <= radius_max, got [{r_min}, {r_max}]")
    _require(0.0 <= opacity <= 1.0, f"snow opacity must lie in [0, 1], got {opacity}")
    _require(blur_sigma >= 0, f"snow blur_sigma must be >= 0, got {blur_sigma}")

    h, w = clean.shape[1:]
    yy, xx = np.mgrid[0:h, 0:w]
    alpha = np.zeros((h, w))
    centers_y = rng.uniform(0, h, size=count)
    centers_x = rng.uniform(0, w, size=count)
    radii = rng.uniform(r_min, r_max, size=count)
    for cy, cx, r in zip(centers_y, centers_x, radii):
        dist = np.hypot(yy - cy, xx - cx)
        alpha = np.maximum(alpha, np.clip(r - dist + 0.5, 0.0, 1.0))
    alpha = opacity * np.clip(blur(alpha, blur_sigma), 0.0, 1.0)
    return clean * (1.0 - alpha[None]) + alpha[None]


DEGRADATIONS: Dict[str, Callable[[np.ndarray, Dict[str, float], np.random.Generator], np.ndarray]] = {
    "rain_streaks": _rain_streaks,
    "haze": _haze,
    "gaussian_blur": _gaussian_blur,
    "low_light": _low_light,
    "snow": _snow,
}


def degrade(clean: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply one degradation to a (3, H, W) float64 array; output clamped to [0, 1]."""
    rng = np.random.default_rng(spec.seed)
    out = DEGRADATIONS[spec.kind](clean, spec.resolved(), rng)
    return np.clip(out, 0.0, 1.0)


def synth_pair(clean, spec: DegradationSpec, image_id: str = "") -> PairedSample:
    """Degrade ``clean`` ((3, H, W) in [0, 1], array or Tensor) according to ``spec``."""
    data = clean.data if isinstance(clean, Tensor) else np.asarray(clean)
    if data.ndim != 3:
        raise DimensionError(f"synth_pair: clean image must be (c, h, w), got {data.shape}")
    if data.size and (data.min() < 0.0 or data.max() > 1.0):
        raise ConfigError(f"synth_pair: clean values must lie in [0, 1], got [{data.min()}, {data.max()}]")
    source = data.astype(np.float64)
    degraded = degrade(source, spec)
    image_id = image_id or f"{spec.kind}_{spec.seed}"
    return PairedSample(Tensor(degraded), Tensor(source), image_id, spec)


def _random_color(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.05, 0.95, size=(3, 1, 1))


def _gradient(size: int, rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * math.pi)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    ramp = math.cos(theta) * xx + math.sin(theta) * yy
    ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-12)
    c0, c1 = _random_color(rng), _random_color(rng)
    return c0 + (c1 - c0) * ramp[None]


def _checkerboard(size: int, rng: np.random.Generator) -> np.ndarray:
    cell = int(rng.integers(4, 17))
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    c0, c1 = _random_color(rng), _random_color(rng)
    return c0 + (c1 - c0) * board[None]


def _smooth_field(size: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal((3, size, size))
    field = gaussian_filter(noise, sigma=(0, size / 8.0, size / 8.0), mode="wrap")
    lo = field.min(axis=(1, 2), keepdims=True)
    hi = field.max(axis=(1, 2), keepdims=True)
    return 0.05 + 0.9 * (field - lo) / np.maximum(hi - lo, 1e-12)


def _text(size: int, rng: np.random.Generator) -> np.ndarray:
    background = tuple(int(v) for v in rng.integers(0, 256, size=3))
    ink = tuple(255 - v for v in background)
    canvas = Image.new("RGB", (size, size), background)
    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()
    for _ in range(max(1, size // 8)):
        text = "".join(rng.choice(list(GLYPHS), size=int(rng.integers(1, 4))))
        position = (int(rng.integers(0, max(1, size - 12))), int(rng.integers(0, max(1, size - 12))))
        draw.text(position, text, fill=ink, font=font)
    return np.asarray(canvas, dtype=np.float64).transpose(2, 0, 1) / 255.0


CLEAN_GENERATORS: Dict[str, Callable[[int, np.random.Generator], np.ndarray]] = {
    "gradient": _gradient,
    "checkerboard": _checkerboard,
    "smooth_field": _smooth_field,
    "text": _text,
}


def clean_image(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Procedural clean (3, size, size) image in [0, 1]."""
    if kind not in CLEAN_GENERATORS:
        raise ConfigError(f"Unknown clean image kind: {kind}")
    return np.clip(CLEAN_GENERATORS[kind](size, rng), 0.0, 1.0)
