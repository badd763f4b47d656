"""On-disk clip storage (.fvt), image-sequence ingestion and synthetic clips.

The .fvt layout is a 28-byte little-endian header followed by the raw
frames::

    offset  size  field
    0       4     magic  b"FVT1"
    4       4     version (u32, always 1)
    8       16    t, h, w, c (u32 each)
    24      4     fps (f32)
    28      ...   t*h*w*c bytes, frame-major, row-major, RGB interleaved
"""

import io
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    EmptyInputError,
    FormatError,
    ShapeError,
    SinkWriteError,
    TruncationError,
    UnsupportedVersionError,
)

MAGIC = b"FVT1"
VERSION = 1
HEADER = struct.Struct("<4s5If")
HEADER_SIZE = HEADER.size  # 28

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".tif", ".tiff")


@dataclass(frozen=True, eq=False)
class FrameVolume:
    """A decoded clip: ``frames`` is a T x H x W x 3 uint8 array."""

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.dtype != np.uint8:
            raise ShapeError(f"frames must be uint8, got {frames.dtype}")
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise ShapeError(f"frames must be T x H x W x 3, got {frames.shape}")
        if min(frames.shape[:3]) < 1:
            raise ShapeError(f"empty axis in frame shape {frames.shape}")
        if not np.isfinite(self.fps) or self.fps <= 0:
            raise DomainError(f"fps must be positive, got {self.fps}")
        frames = np.ascontiguousarray(frames)
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        # fps is stored as f32 on disk; keep it f32-exact so round-trips are lossless
        object.__setattr__(self, "fps", float(np.float32(self.fps)))

    @property
    def shape(self):
        return self.frames.shape

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def duration_s(self):
        return self.num_frames / self.fps

    def __eq__(self, other):
        if not isinstance(other, FrameVolume):
            return NotImplemented
        return self.fps == other.fps and np.array_equal(self.frames, other.frames)


def write_fvt(vol, destination):
    """Serialize ``vol`` to a path or binary file object; return bytes written."""
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            return write_fvt(vol, fh)

    t, h, w, c = vol.frames.shape
    header = HEADER.pack(MAGIC, VERSION, t, h, w, c, vol.fps)
    written = 0
    for chunk in (header, vol.frames.tobytes(order="C")):
        try:
            n = destination.write(chunk)
        except OSError as exc:
            raise SinkWriteError(f"write failed: {exc}", written) from exc
        n = len(chunk) if n is None else n
        written += n
        if n != len(chunk):
            raise SinkWriteError("short write", written)
    return written


def read_fvt(source):
    """Parse a path, bytes object or binary stream into a FrameVolume."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(source)
    elif isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_fvt(fh)

    head = source.read(HEADER_SIZE)
    if len(head) < HEADER_SIZE:
        raise TruncationError(f"header needs {HEADER_SIZE} bytes, got {len(head)}")
    magic, version, t, h, w, c, fps = HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported .fvt version {version}")
    if c != 3 or min(t, h, w) < 1:
        raise FormatError(f"invalid dimensions t={t} h={h} w={w} c={c}")
    expected = t * h * w * c
    payload = source.read(expected)
    if len(payload) != expected:
        raise TruncationError(f"payload has {len(payload)} bytes, header declares {expected}")
    if source.read(1):
        raise TruncationError("trailing bytes after payload")
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(t, h, w, c)
    return FrameVolume(frames, float(fps))


def fvt_size(t, h, w, c=3):
    return HEADER_SIZE + t * h * w * c


def from_image_sequence(directory, fps):
    """Load ``frame_000001.<ext>``-style images in ascending index order."""
    from PIL import Image

    directory = Path(directory)
    indexed = []
    for p in directory.iterdir():
        if p.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        m = re.search(r"(\d+)$", p.stem)
        if m:
            indexed.append((int(m.group(1)), p))
    if not indexed:
        raise EmptyInputError(f"no indexed images in {directory}")
    indexed.sort()

    frames = []
    for _, p in indexed:
        with Image.open(p) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        if frames and arr.shape != frames[0].shape:
            raise ShapeError(
                f"{p.name} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {frames[0].shape[1]}x{frames[0].shape[0]}"
            )
        frames.append(arr)
    return FrameVolume(np.stack(frames), fps)


def write_image_sequence(vol, directory, ext="png"):
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(vol.frames, start=1):
        Image.fromarray(frame).save(directory / f"frame_{i:06d}.{ext}")


def load_clip(path, fps=None):
    """Read a clip from an .fvt file or an image-sequence directory."""
    path = Path(path)
    if path.is_dir():
        return from_image_sequence(path, fps if fps is not None else 30.0)
    return read_fvt(path)


def synth_clip(class_id, seed, t=16, h=32, w=32, fps=8.0):
    """Deterministic synthetic clip with a class-specific visual signature.

    0: static smooth gradient, no motion
    1: whole frame flickers bright/dark every frame
    2: bright box sliding horizontally over a flat background
    3: bright box sliding vertically over static noise
    """
    if class_id not in (0, 1, 2, 3):
        raise DomainError(f"class_id must be in 0..3, got {class_id}")
    if min(t, h, w) < 8:
        raise DomainError(f"t, h, w must all be >= 8, got {(t, h, w)}")
    rng = np.random.default_rng([int(seed) & ((1 << 64) - 1), class_id])
    frames = np.empty((t, h, w, 3), dtype=np.uint8)

    if class_id == 0:
        lo = rng.uniform(20, 90, size=3)
        hi = rng.uniform(160, 235, size=3)
        angle = rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        ramp = np.cos(angle) * xx / (w - 1) + np.sin(angle) * yy / (h - 1)
        ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-12)
        frame = lo + ramp[..., None] * (hi - lo)
        frames[:] = np.round(frame).astype(np.uint8)
    elif class_id == 1:
        frames[0::2] = 255
        frames[1::2] = 0
    else:
        box = max(2, min(h, w) // 4)
        speed = int(rng.integers(1, 4)) * (1 if rng.random() < 0.5 else -1)
        if class_id == 2:
            background = np.full((h, w, 3), rng.integers(0, 40), dtype=np.uint8)
            y0 = int(rng.integers(0, h - box + 1))
            x0 = int(rng.integers(0, w))
        else:
            background = rng.integers(40, 160, size=(h, w, 3), dtype=np.uint8)
            y0 = int(rng.integers(0, h))
            x0 = int(rng.integers(0, w - box + 1))
        color = rng.integers(200, 256, size=3)
        for k in range(t):
            frames[k] = background
            if class_id == 2:
                xs = (x0 + speed * k + np.arange(box)) % w
                frames[k, y0:y0 + box][:, xs] = color
            else:
                ys = (y0 + speed * k + np.arange(box)) % h
                frames[k, ys, x0:x0 + box] = color
    return FrameVolume(frames, fps)
