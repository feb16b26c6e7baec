"""Residual spectra and sub-band swapping between image pairs.

Everything runs in float64 on the BT.601 luma of the inputs. The fixed Haar
bank is orthonormal, so the residual energy splits exactly across the four
bands of one decomposition level.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np
import yaml

from swformer.config.yaml_config import BANDS
from swformer.data.io import write_png
from swformer.errors import DimensionError, UsageError
from swformer.objective.metrics import to_y_channel
from swformer.tensor import ops
from swformer.tensor.core import Tensor, no_grad
from swformer.transforms.fourier import log_magnitude
from swformer.transforms.wavelet import SubBands, dwt2, haar_bank, idwt2

logger = logging.getLogger(__name__)

ImageLike = Union[np.ndarray, Tensor]


@dataclass
class SpectralReport:
    """Residual of one pair and its spatial, Fourier and sub-band views."""
    residual: np.ndarray
    spectrum: np.ndarray
    band_spectra: Dict[str, np.ndarray] = field(default_factory=dict)
    band_energy: Dict[str, float] = field(default_factory=dict)
    energy_fractions: Dict[str, float] = field(default_factory=dict)
    total_energy: float = 0.0

    def energy_table(self) -> Dict[str, object]:
        return {
            "total_energy": self.total_energy,
            "bands": {
                band: {"energy": self.band_energy[band], "fraction": self.energy_fractions[band]}
                for band in BANDS
            },
        }


def _to_gray(image: ImageLike) -> np.ndarray:
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    data = data.astype(np.float64)
    if data.ndim == 4:
        if data.shape[0] != 1:
            raise UsageError(f"analyze_pair takes one image at a time, got a batch of {data.shape[0]}")
        data = data[0]
    if data.ndim == 2:
        return data
    if data.ndim == 3 and data.shape[0] == 1:
        return data[0]
    if data.ndim == 3 and data.shape[0] == 3:
        return to_y_channel(data)[0]
    raise DimensionError(f"Expected a (3, h, w), (1, h, w) or (h, w) image, got shape {data.shape}")


def _plane_bands(plane: np.ndarray) -> SubBands:
    x = Tensor(plane[None, None], dtype=np.float64)
    with no_grad():
        return dwt2(x, haar_bank(dtype=np.float64))


def analyze_pair(clean: ImageLike, degraded: ImageLike) -> SpectralReport:
    """Spectral view of ``degraded - clean``.

    Odd sizes are reflect-padded to even before the wavelet split, and the
    total energy is measured on the padded residual. A zero residual gets
    uniform fractions of 1/4.
    """
    clean_y, degraded_y = _to_gray(clean), _to_gray(degraded)
    if clean_y.shape != degraded_y.shape:
        raise DimensionError(f"analyze_pair: clean {clean_y.shape} and degraded {degraded_y.shape} differ")

    residual = degraded_y - clean_y
    with no_grad():
        padded, _ = ops.pad_to_multiple(Tensor(residual[None, None], dtype=np.float64), 2)
    padded_plane = padded.data[0, 0]
    bands = _plane_bands(padded_plane)

    band_spectra = {}
    band_energy = {}
    for band, value in bands.items():
        coefficients = value.data[0, 0]
        band_spectra[band] = log_magnitude(coefficients)
        band_energy[band] = float(np.sum(coefficients ** 2))
    total = float(np.sum(padded_plane ** 2))
    band_sum = sum(band_energy.values())
    if band_sum > 0:
        fractions = {band: energy / band_sum for band, energy in band_energy.items()}
    else:
        fractions = {band: 0.25 for band in BANDS}

    report = SpectralReport(
        residual=residual,
        spectrum=log_magnitude(residual),
        band_spectra=band_spectra,
        band_energy=band_energy,
        energy_fractions=fractions,
        total_energy=total,
    )
    logger.debug(
        "Residual energy %.4g: %s", total, ", ".join(f"{b}={fractions[b]:.3f}" for b in BANDS)
    )
    return report


def _as_batch(image: ImageLike) -> Tuple[Tensor, int]:
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    ndim = data.ndim
    if ndim == 2:
        data = data[None, None]
    elif ndim == 3:
        data = data[None]
    elif ndim != 4:
        raise DimensionError(f"swap_subbands: expected an image, got shape {data.shape}")
    return Tensor(data, dtype=np.float64), ndim


def _restore_layout(x: Tensor, ndim: int, like: ImageLike):
    data = x.data
    if ndim == 2:
        data = data[0, 0]
    elif ndim == 3:
        data = data[0]
    if isinstance(like, Tensor):
        return Tensor(data, dtype=like.dtype)
    return data.astype(np.asarray(like).dtype if np.asarray(like).dtype.kind == "f" else np.float64)


def swap_subbands(img_a: ImageLike, img_b: ImageLike, bands: Iterable[str]) -> Tuple:
    """Exchange the named Haar bands between two images and synthesise both back.

    Swapping the same set twice returns the originals (for even sizes;
    odd sizes are reflect-padded for the split and cropped after).
    """
    bands = list(dict.fromkeys(bands))
    unknown = [b for b in bands if b not in BANDS]
    if unknown:
        raise UsageError(f"Unknown sub-bands {unknown}; choose from {', '.join(BANDS)}")
    a, ndim = _as_batch(img_a)
    b, _ = _as_batch(img_b)
    if a.shape != b.shape:
        raise DimensionError(f"swap_subbands: image shapes {a.shape} and {b.shape} differ")
    if not bands:
        logger.warning("swap_subbands called with an empty band set; images returned unchanged")
        return _restore_layout(a, ndim, img_a), _restore_layout(b, ndim, img_b)

    bank = haar_bank(dtype=np.float64)
    with no_grad():
        a_pad, (h, w) = ops.pad_to_multiple(a, 2)
        b_pad, _ = ops.pad_to_multiple(b, 2)
        bands_a, bands_b = dwt2(a_pad, bank), dwt2(b_pad, bank)
        mixed_a = {band: (bands_b if band in bands else bands_a)[band] for band in BANDS}
        mixed_b = {band: (bands_a if band in bands else bands_b)[band] for band in BANDS}
        out_a = ops.crop(idwt2(SubBands(**mixed_a), bank), h, w)
        out_b = ops.crop(idwt2(SubBands(**mixed_b), bank), h, w)
    logger.debug("Swapped bands %s", ", ".join(bands))
    return _restore_layout(out_a, ndim, img_a), _restore_layout(out_b, ndim, img_b)


def _signed_panel(x: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(x), initial=0.0))
    return 0.5 + 0.5 * x / peak if peak > 0 else np.full_like(x, 0.5)


def _unsigned_panel(x: np.ndarray) -> np.ndarray:
    peak = float(np.max(x, initial=0.0))
    return x / peak if peak > 0 else np.zeros_like(x)


def write_report(report: SpectralReport, out_dir: Union[str, Path]) -> Path:
    """PNG panels (residual, spectrum, one spectrum per band) and ``energy.yaml``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_png(out_dir / "residual.png", _signed_panel(report.residual)[None])
    write_png(out_dir / "spectrum.png", _unsigned_panel(report.spectrum)[None])
    for band, spectrum in report.band_spectra.items():
        write_png(out_dir / f"spectrum_{band}.png", _unsigned_panel(spectrum)[None])
    with open(out_dir / "energy.yaml", "w", encoding="utf-8") as f:
        yaml.safe_dump(report.energy_table(), f, default_flow_style=False, sort_keys=False)
    logger.info("Wrote spectral report to %s", out_dir)
    return out_dir
