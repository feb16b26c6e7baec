"""PNG I/O.

Images are (3, H, W) float arrays in [0, 1]. Reads accept 8-bit and 16-bit
PNGs; writes are always 8-bit RGB and go through a temporary file so a
reader never sees a partial image.
"""

import io
import logging
import os
from pathlib import Path
from typing import Optional, Tuple, Union

import aiofiles
import numpy as np
import png
from PIL import Image

from swformer.errors import DimensionError, InputNotFoundError, UsageError
from swformer.tensor.core import Tensor

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
# Signature plus the IHDR chunk header, length and payload.
PNG_MIN_SIZE = len(PNG_SIGNATURE) + 8 + 13 + 4

# Offset of the bit depth byte inside IHDR.
_IHDR_BIT_DEPTH = 24


def verify_png_structure(file_path: Path) -> Tuple[bool, Optional[str]]:
    """Check the PNG signature without decoding.

    Returns:
        Tuple of (is_valid, error_message); the message is None when valid.
    """
    try:
        with open(file_path, "rb") as f:
            file_size = f.seek(0, 2)
            if file_size < PNG_MIN_SIZE:
                return False, f"File too small ({file_size} bytes, minimum {PNG_MIN_SIZE})"
            f.seek(0)
            signature = f.read(len(PNG_SIGNATURE))
    except OSError as e:
        return False, f"Error reading file: {e}"
    if signature != PNG_SIGNATURE:
        return False, f"File does not start with the PNG signature (found: {signature!r})"
    return True, None


def _decode_sixteen_bit(blob: bytes, source: Union[str, Path]) -> np.ndarray:
    """Full-precision decode of 16-bit PNGs, which Pillow narrows to 8 bits for colour."""
    try:
        width, height, rows, info = png.Reader(bytes=blob).asDirect()
        pixels = np.array([np.asarray(row, dtype=np.float64) for row in rows])
    except png.Error as e:
        raise UsageError(f"{source} is not a readable PNG: {e}") from e
    planes = info["planes"]
    pixels = pixels.reshape(height, width, planes) / float(2 ** info["bitdepth"] - 1)
    if info["greyscale"]:
        rgb = np.repeat(pixels[None, :, :, 0], 3, axis=0)
    else:
        rgb = pixels[:, :, :3].transpose(2, 0, 1)
    logger.debug("Decoded %s: %d-bit, %d planes, size=%dx%d", source, info["bitdepth"], planes, width, height)
    return rgb


def _decode_pillow(image: Image.Image, source: Union[str, Path]) -> np.ndarray:
    if image.mode in ("1", "L", "LA"):
        gray = np.asarray(image.convert("L"), dtype=np.float64) / 255.0
        rgb = np.repeat(gray[None], 3, axis=0)
    else:
        rgb = np.asarray(image.convert("RGB"), dtype=np.float64).transpose(2, 0, 1) / 255.0
    logger.debug("Decoded %s: mode=%s size=%dx%d", source, image.mode, image.width, image.height)
    return rgb


def _decode(blob: bytes, source: Union[str, Path]) -> np.ndarray:
    if blob[_IHDR_BIT_DEPTH] == 16:
        rgb = _decode_sixteen_bit(blob, source)
    else:
        with Image.open(io.BytesIO(blob)) as image:
            rgb = _decode_pillow(image, source)
    return np.clip(rgb, 0.0, 1.0)


def _open_checked(file_path: Path) -> None:
    if not file_path.exists():
        raise InputNotFoundError(file_path, "image")
    is_valid, error_msg = verify_png_structure(file_path)
    if not is_valid:
        raise UsageError(f"{file_path} is not a PNG: {error_msg}")


def read_png(file_path: Union[str, Path], dtype=None) -> np.ndarray:
    """Read a PNG as a (3, H, W) array in [0, 1].

    Grayscale is expanded to three channels and alpha is dropped.
    """
    file_path = Path(file_path)
    _open_checked(file_path)
    rgb = _decode(file_path.read_bytes(), file_path)
    return rgb.astype(dtype or np.float32)


async def read_png_async(file_path: Union[str, Path], dtype=None) -> np.ndarray:
    """Async variant of :func:`read_png`; the file is read with aiofiles."""
    file_path = Path(file_path)
    _open_checked(file_path)
    async with aiofiles.open(file_path, "rb") as f:
        content = await f.read()
    rgb = _decode(content, file_path)
    return rgb.astype(dtype or np.float32)


def to_uint8(image: Union[np.ndarray, Tensor]) -> np.ndarray:
    """(3, H, W) or (1, 3, H, W) values in [0, 1] to an (H, W, 3) uint8 array."""
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    if data.ndim == 4:
        if data.shape[0] != 1:
            raise UsageError(f"write_png takes one image, got a batch of {data.shape[0]}")
        data = data[0]
    if data.ndim != 3 or data.shape[0] not in (1, 3):
        raise DimensionError(f"Expected (3, H, W) image, got shape {data.shape}")
    if data.shape[0] == 1:
        data = np.repeat(data, 3, axis=0)
    quantized = np.round(np.clip(data.astype(np.float64), 0.0, 1.0) * 255.0)
    return quantized.astype(np.uint8).transpose(1, 2, 0)


def write_png(file_path: Union[str, Path], image: Union[np.ndarray, Tensor], create_dirs: bool = True) -> Path:
    """Write an 8-bit RGB PNG atomically (temporary file, then rename)."""
    file_path = Path(file_path)
    if create_dirs:
        file_path.parent.mkdir(parents=True, exist_ok=True)
    pixels = to_uint8(image)
    tmp_path = file_path.with_name(file_path.name + ".tmp")
    try:
        Image.fromarray(pixels).save(tmp_path, format="PNG")
        os.replace(tmp_path, file_path)
    except OSError:
        if tmp_path.exists():
            tmp_path.unlink()
        raise
    return file_path
