"""Temporal frame selection: uniform subsampling and adaptive frame counts."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class SamplingConfig:
    """Parameters of the adaptive frame-count rule.

    ``n = clamp(round(duration / seconds_per_frame_base * (1 + activity_weight * a)))``
    """

    n_min: int = 8
    n_max: int = 32
    seconds_per_frame_base: float = 2.0
    activity_weight: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise ConfigError(f"need 1 <= n_min <= n_max, got {self.n_min}, {self.n_max}")
        if not self.seconds_per_frame_base > 0:
            raise ConfigError("seconds_per_frame_base must be positive")
        if not self.activity_weight >= 0:
            raise ConfigError("activity_weight must be non-negative")


def round_half_away(x):
    return math.floor(x + 0.5) if x >= 0 else -math.floor(-x + 0.5)


def uniform_indices(t, n):
    """``n`` evenly spaced frame indices out of ``t``: floor(i * (t-1) / (n-1))."""
    if n < 1 or n > t:
        raise DomainError(f"need 1 <= n <= t, got n={n}, t={t}")
    if n == 1:
        return [0]
    # integer arithmetic: exact for any t, no float rounding at the boundaries
    return [i * (t - 1) // (n - 1) for i in range(n)]


def activity_score(vol):
    """Mean absolute difference between consecutive frames, scaled to [0, 1]."""
    frames = vol.frames if hasattr(vol, "frames") else np.asarray(vol)
    if frames.shape[0] < 2:
        return 0.0
    total = 0
    for a, b in zip(frames[:-1], frames[1:]):
        total += int(np.abs(a.astype(np.int16) - b.astype(np.int16)).sum(dtype=np.int64))
    pairs = frames.shape[0] - 1
    return total / (pairs * frames[0].size * 255.0)


def adaptive_frame_count(duration_s, activity, cfg=SamplingConfig()):
    """Number of frames to sample: grows with clip length and with activity."""
    if duration_s < 0:
        raise DomainError(f"duration_s must be >= 0, got {duration_s}")
    if not 0.0 <= activity <= 1.0:
        raise DomainError(f"activity must be in [0, 1], got {activity}")
    raw = round_half_away(duration_s / cfg.seconds_per_frame_base
                          * (1.0 + cfg.activity_weight * activity))
    return max(cfg.n_min, min(cfg.n_max, raw))
