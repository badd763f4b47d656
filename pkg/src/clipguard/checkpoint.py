"""Named-tensor checkpoint container (.ntc).

Layout, all integers little-endian u32::

    b"NTC1" | version | meta_len | meta (UTF-8 JSON) | count
    then per tensor: name_len | name | ndim | dims... | float32 LE data

``meta`` holds the model config, the pipeline config used for training and
the step/epoch/validation accuracy of the saved parameters.
"""

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncationError, UnsupportedVersionError

MAGIC = b"NTC1"
VERSION = 1
_U32 = struct.Struct("<I")
_F32 = np.dtype("<f4")


@dataclass
class Checkpoint:
    params: dict
    step: int = 0
    epoch: int = 0
    val_accuracy: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.val_accuracy <= 1.0:
            raise ValueError(f"val_accuracy must lie in [0, 1], got {self.val_accuracy}")


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncationError(f"unexpected end of file while reading {what}")
    return buf


def _read_u32(fh, what):
    return _U32.unpack(_read_exact(fh, 4, what))[0]


def write_tensors(tensors, destination, meta=None):
    """Write named float32 tensors plus a JSON metadata block; return byte count."""
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            return write_tensors(tensors, fh, meta)
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(meta_bytes)), meta_bytes,
             _U32.pack(len(tensors))]
    for name, arr in tensors.items():
        arr = np.array(arr, dtype=_F32, order="C")  # keeps 0-d shape
        name_bytes = name.encode("utf-8")
        parts += [_U32.pack(len(name_bytes)), name_bytes, _U32.pack(arr.ndim)]
        parts += [_U32.pack(n) for n in arr.shape]
        parts.append(arr.tobytes())
    blob = b"".join(parts)
    destination.write(blob)
    return len(blob)


def read_tensors(source):
    """Inverse of :func:`write_tensors`: returns ``(tensors, meta)``."""
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    elif isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_tensors(fh)
    magic = _read_exact(source, 4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = _read_u32(source, "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    meta = json.loads(_read_exact(source, _read_u32(source, "meta length"), "meta"))
    tensors = {}
    for _ in range(_read_u32(source, "tensor count")):
        name = _read_exact(source, _read_u32(source, "name length"), "name").decode("utf-8")
        ndim = _read_u32(source, f"{name} rank")
        shape = tuple(_read_u32(source, f"{name} shape") for _ in range(ndim))
        nbytes = int(np.prod(shape, dtype=np.int64)) * _F32.itemsize
        data = _read_exact(source, nbytes, f"{name} data")
        tensors[name] = np.frombuffer(data, dtype=_F32).reshape(shape).copy()
    if source.read(1):
        raise TruncationError("trailing bytes after last tensor")
    return tensors, meta


def save_checkpoint(ckpt, destination):
    meta = dict(ckpt.meta)
    meta.update(step=ckpt.step, epoch=ckpt.epoch, val_accuracy=ckpt.val_accuracy)
    return write_tensors(ckpt.params, destination, meta)


def load_checkpoint(source):
    tensors, meta = read_tensors(source)
    step = meta.pop("step", 0)
    epoch = meta.pop("epoch", 0)
    val_accuracy = meta.pop("val_accuracy", 0.0)
    return Checkpoint(tensors, step, epoch, val_accuracy, meta)
