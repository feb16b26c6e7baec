"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic      8 bytes  b"SWFCKPT\\0"
    version    u32
    config     u32 length + UTF-8 canonical JSON {"model": ..., "optim": ...}
    seed       u64
    step       u64
    has_optim  u8, then u64 optimizer step count when set
    arrays     u32 count, then per array sorted by name:
               u16 name length, UTF-8 name, u8 ndim, ndim x u32 dims,
               float32 data in C order

Optimizer moments are stored as arrays named ``optim.m/<param>`` and
``optim.v/<param>``. Encoding is a pure function of the content, so
save -> load -> save reproduces the file byte for byte.
"""

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from swformer.config.yaml_config import ModelConfig
from swformer.errors import CheckpointError, InputNotFoundError
from swformer.model.network import SWFormerNet
from swformer.train.optim import OptimState

logger = logging.getLogger(__name__)

MAGIC = b"SWFCKPT\0"
FORMAT_VERSION = 1
MOMENT_PREFIXES = ("optim.m/", "optim.v/")
_F32 = np.dtype("<f4")


@dataclass
class Checkpoint:
    """Everything needed to rebuild a network and resume its optimizer."""
    config: ModelConfig
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    optim: Optional[OptimState] = None
    seed: int = 0
    step: int = 0

    @classmethod
    def capture(cls, net: SWFormerNet, optim: Optional[OptimState] = None, seed: int = 0, step: int = 0) -> "Checkpoint":
        return cls(net.config, net.state_dict(), optim, seed, step)

    def build_model(self) -> SWFormerNet:
        """A fresh network from the stored config with the stored weights."""
        net = SWFormerNet(self.config)
        net.load_state_dict(self.arrays)
        return net

    def _all_arrays(self) -> Dict[str, np.ndarray]:
        arrays = dict(self.arrays)
        if self.optim is not None:
            for name, m in self.optim.m.items():
                arrays[f"optim.m/{name}"] = m
            for name, v in self.optim.v.items():
                arrays[f"optim.v/{name}"] = v
        return arrays

    def to_bytes(self) -> bytes:
        header = {
            "model": self.config.model_dump(mode="json"),
            "optim": self.optim.hyperparameters() if self.optim is not None else None,
        }
        config_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        parts = [
            MAGIC,
            struct.pack("<I", FORMAT_VERSION),
            struct.pack("<I", len(config_bytes)),
            config_bytes,
            struct.pack("<QQ", self.seed, self.step),
        ]
        if self.optim is not None:
            parts.append(struct.pack("<BQ", 1, self.optim.t))
        else:
            parts.append(struct.pack("<B", 0))

        arrays = self._all_arrays()
        parts.append(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            data = np.ascontiguousarray(arrays[name], dtype=_F32)
            encoded = name.encode("utf-8")
            parts.append(struct.pack("<H", len(encoded)))
            parts.append(encoded)
            parts.append(struct.pack("<B", data.ndim))
            parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
            parts.append(data.tobytes(order="C"))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes, source: Union[str, Path] = "<bytes>") -> "Checkpoint":
        reader = _Reader(blob, source)
        if reader.take(len(MAGIC)) != MAGIC:
            raise CheckpointError(source, "not a checkpoint (bad magic)")
        version = reader.unpack("<I")
        if version != FORMAT_VERSION:
            raise CheckpointError(source, f"unsupported format version {version}")
        header_len = reader.unpack("<I")
        try:
            header = json.loads(reader.take(header_len).decode("utf-8"))
            config = ModelConfig.model_validate(header["model"])
        except (ValueError, KeyError) as e:
            raise CheckpointError(source, f"unreadable config header: {e}") from e
        seed, step = reader.unpack("<QQ")
        optim = None
        if reader.unpack("<B"):
            try:
                optim = OptimState(**(header.get("optim") or {}))
            except TypeError as e:
                raise CheckpointError(source, f"unreadable optimizer header: {e}") from e
            optim.t = reader.unpack("<Q")

        arrays: Dict[str, np.ndarray] = {}
        for _ in range(reader.unpack("<I")):
            name = reader.take(reader.unpack("<H")).decode("utf-8")
            ndim = reader.unpack("<B")
            shape = reader.unpack(f"<{ndim}I") if ndim else ()
            shape = (shape,) if isinstance(shape, int) else tuple(shape)
            count = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(reader.take(count * _F32.itemsize), dtype=_F32).reshape(shape)
            if name in arrays:
                raise CheckpointError(source, f"duplicate array name {name}")
            arrays[name] = data.astype(np.float32)
        if not reader.exhausted:
            raise CheckpointError(source, f"{reader.remaining} trailing bytes")

        model_arrays = {}
        for name, data in arrays.items():
            if optim is not None and name.startswith(MOMENT_PREFIXES[0]):
                optim.m[name[len(MOMENT_PREFIXES[0]):]] = data
            elif optim is not None and name.startswith(MOMENT_PREFIXES[1]):
                optim.v[name[len(MOMENT_PREFIXES[1]):]] = data
            else:
                model_arrays[name] = data
        return cls(config, model_arrays, optim, seed, step)


class _Reader:
    """Bounds-checked cursor over a checkpoint blob."""

    def __init__(self, blob: bytes, source):
        self.blob = blob
        self.source = source
        self.offset = 0

    @property
    def remaining(self) -> int:
        return len(self.blob) - self.offset

    @property
    def exhausted(self) -> bool:
        return self.remaining == 0

    def take(self, n: int) -> bytes:
        if n > self.remaining:
            raise CheckpointError(self.source, f"truncated at byte {self.offset} (wanted {n} more)")
        chunk = self.blob[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values[0] if len(values) == 1 else values


def save_checkpoint(
    path: Union[str, Path],
    net: SWFormerNet,
    optim: Optional[OptimState] = None,
    seed: int = 0,
    step: int = 0,
) -> Path:
    """Write atomically: temporary file in the same directory, then rename."""
    return write_checkpoint(path, Checkpoint.capture(net, optim, seed, step))


def write_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    path = Path(path)
    blob = checkpoint.to_bytes()
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp_path, "wb") as f:
            f.write(blob)
        os.replace(tmp_path, path)
    except OSError as e:
        if tmp_path.exists():
            tmp_path.unlink()
        raise CheckpointError(path, f"cannot write checkpoint: {e}") from e
    logger.info("Saved checkpoint %s (step %d, %d bytes)", path, checkpoint.step, len(blob))
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise InputNotFoundError(path, "checkpoint")
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(path, f"cannot read checkpoint: {e}") from e
    checkpoint = Checkpoint.from_bytes(blob, path)
    logger.info("Loaded checkpoint %s (step %d)", path, checkpoint.step)
    return checkpoint


def restore_model(path: Union[str, Path]) -> SWFormerNet:
    """Load a checkpoint and rebuild its network in inference mode."""
    return load_checkpoint(path).build_model().eval()
