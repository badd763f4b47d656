"""Clip transforms: unit scaling, normalization, flip, short-side scale, crops.

All tensors here are float64 arrays shaped T x H x W x C. Random stages take
an explicit :class:`~clipguard.rng.RngStream` and make one draw per clip, so
every frame of a clip receives the same flip, scale and crop.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .rng import clip_stream
from .sampling import SamplingConfig, activity_score, adaptive_frame_count, round_half_away, uniform_indices

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class NormalizationParams:
    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "std", tuple(float(v) for v in self.std))
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ConfigError("mean and std need one value per RGB channel")
        if any(not s > 0 for s in self.std):
            raise ConfigError(f"std components must be positive, got {self.std}")


@dataclass(frozen=True)
class AugmentConfig:
    flip_probability: float = 0.5
    short_side_min: int = 256
    short_side_max: int = 320
    target_h: int = 224
    target_w: int = 224
    eval_frames: int = 8
    mode: str = "train"

    def __post_init__(self):
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ConfigError("flip_probability must lie in [0, 1]")
        if not 0 < self.short_side_min <= self.short_side_max:
            raise ConfigError("need 0 < short_side_min <= short_side_max")
        if self.target_h < 1 or self.target_w < 1 or self.eval_frames < 1:
            raise ConfigError("target sizes and eval_frames must be >= 1")
        if max(self.target_h, self.target_w) > self.short_side_min:
            raise ConfigError("crop target exceeds the smallest scaled short side")
        if self.mode not in ("train", "eval"):
            raise ConfigError(f"mode must be 'train' or 'eval', got {self.mode!r}")


def to_unit_float(vol):
    frames = vol.frames if hasattr(vol, "frames") else np.asarray(vol)
    return frames.astype(np.float64) / 255.0


def normalize(x, p):
    mean = np.asarray(p.mean, dtype=x.dtype)
    std = np.asarray(p.std, dtype=x.dtype)
    return (x - mean) / std


def denormalize(x, p):
    return x * np.asarray(p.std, dtype=x.dtype) + np.asarray(p.mean, dtype=x.dtype)


def horizontal_flip(x, rng, p=0.5):
    """Mirror every frame along the width axis with probability ``p``."""
    flipped = rng.uniform() < p
    if flipped:
        x = x[:, :, ::-1, :].copy()
    return x, flipped


def _bilinear_axis(n_in, n_out):
    """Source indices and weights for resampling one axis with half-pixel centers."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(x, out_h, out_w):
    t, h, w, c = x.shape
    if (out_h, out_w) == (h, w):
        return x.copy()
    y0, y1, wy = _bilinear_axis(h, out_h)
    x0, x1, wx = _bilinear_axis(w, out_w)
    wy = wy[None, :, None, None]
    rows = x[:, y0] * (1.0 - wy) + x[:, y1] * wy
    wx = wx[None, None, :, None]
    return rows[:, :, x0] * (1.0 - wx) + rows[:, :, x1] * wx


def scaled_size(h, w, s):
    """(H', W') with min side ``s`` and the aspect ratio kept."""
    if h <= w:
        return s, max(1, round_half_away(w * s / h))
    return max(1, round_half_away(h * s / w)), s


def short_side_scale(x, rng, s_min, s_max):
    """Resize so the shorter side equals a size drawn uniformly from [s_min, s_max]."""
    if s_min > s_max:
        raise DomainError(f"s_min {s_min} exceeds s_max {s_max}")
    s = rng.randint(s_min, s_max) if rng is not None else s_min
    return resize_bilinear(x, *scaled_size(x.shape[1], x.shape[2], s))


def _check_crop(x, th, tw):
    h, w = x.shape[1:3]
    if th < 1 or tw < 1 or th > h or tw > w:
        raise DomainError(f"cannot crop {th}x{tw} from {h}x{w}")


def crop_at(x, top, left, th, tw):
    return x[:, top:top + th, left:left + tw, :]


def random_crop(x, rng, th, tw):
    _check_crop(x, th, tw)
    top = rng.randint(0, x.shape[1] - th)
    left = rng.randint(0, x.shape[2] - tw)
    return crop_at(x, top, left, th, tw)


def center_crop(x, th, tw):
    _check_crop(x, th, tw)
    return crop_at(x, (x.shape[1] - th) // 2, (x.shape[2] - tw) // 2, th, tw)


class ClipTransform:
    """Callable preprocessing chain built by :func:`build_pipeline`.

    Train mode: adaptive subsample, unit float, normalize, random flip,
    random short-side scale, random crop. Eval mode: fixed subsample, unit
    float, normalize, scale to ``short_side_min``, center crop.
    """

    def __init__(self, cfg, norm, sampler):
        self.cfg = cfg
        self.norm = norm
        self.sampler = sampler

    @property
    def training(self):
        return self.cfg.mode == "train"

    def frame_count(self, vol):
        if not self.training:
            n = self.cfg.eval_frames
        else:
            n = adaptive_frame_count(vol.duration_s, activity_score(vol), self.sampler)
        # never ask for more frames than the clip holds
        return min(n, vol.num_frames)

    def __call__(self, vol, rng=None):
        cfg = self.cfg
        idx = uniform_indices(vol.num_frames, self.frame_count(vol))
        x = to_unit_float(vol.frames[idx])
        x = normalize(x, self.norm)
        if self.training:
            if rng is None:
                raise ValueError("train-mode transform needs an RngStream")
            x, _ = horizontal_flip(x, rng, cfg.flip_probability)
            x = short_side_scale(x, rng, cfg.short_side_min, cfg.short_side_max)
            x = random_crop(x, rng, cfg.target_h, cfg.target_w)
        else:
            x = short_side_scale(x, None, cfg.short_side_min, cfg.short_side_min)
            x = center_crop(x, cfg.target_h, cfg.target_w)
        return np.ascontiguousarray(x)

    def for_clip(self, vol, path, global_seed):
        """Apply the transform with the clip's own seeded stream."""
        rng = clip_stream(global_seed, path) if self.training else None
        return self(vol, rng)


def build_pipeline(cfg=AugmentConfig(), norm=NormalizationParams(), sampler=SamplingConfig()):
    return ClipTransform(cfg, norm, sampler)

