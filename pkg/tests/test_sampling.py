from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clipguard.errors import ConfigError, DomainError
from clipguard.frame_store import FrameVolume, synth_clip
from clipguard.sampling import (
    SamplingConfig, activity_score, adaptive_frame_count, round_half_away, uniform_indices,
)

CFG = SamplingConfig(n_min=8, n_max=32, seconds_per_frame_base=2.0, activity_weight=1.0)


def _linspace_oracle(t, n):
    # guard against linspace landing a hair below an exact integer
    return np.floor(np.linspace(0, t - 1, n) + 1e-9).astype(int).tolist()


def _fraction_oracle(t, n):
    if n == 1:
        return [0]
    return [int(Fraction(i * (t - 1), n - 1)) for i in range(n)]


def test_uniform_examples():
    assert uniform_indices(10, 5) == [0, 2, 4, 6, 9]
    assert uniform_indices(8, 8) == list(range(8))
    assert uniform_indices(5, 1) == [0]


def test_uniform_matches_oracles_exhaustively():
    for t in range(1, 65):
        for n in range(1, t + 1):
            idx = uniform_indices(t, n)
            assert idx == _fraction_oracle(t, n) == _linspace_oracle(t, n), (t, n)
            assert len(idx) == n
            assert all(a < b for a, b in zip(idx, idx[1:]))
            assert idx[0] == 0 and (n == 1 or idx[-1] == t - 1)


@pytest.mark.parametrize("t, n", [(5, 0), (5, 6), (1, 2)])
def test_uniform_domain_errors(t, n):
    with pytest.raises(DomainError):
        uniform_indices(t, n)


def test_activity_extremes():
    same = FrameVolume(np.full((4, 3, 3, 3), 77, np.uint8), 1.0)
    assert activity_score(same) == 0.0
    jump = FrameVolume(np.stack([np.zeros((3, 3, 3), np.uint8), np.full((3, 3, 3), 255, np.uint8)]), 1.0)
    assert activity_score(jump) == 1.0
    assert activity_score(FrameVolume(np.full((1, 2, 2, 3), 9, np.uint8), 1.0)) == 0.0


def _activity_oracle(frames):
    # pixel-by-pixel brute force
    t, h, w, c = frames.shape
    total = 0
    for k in range(t - 1):
        for y in range(h):
            for x in range(w):
                for ch in range(c):
                    total += abs(int(frames[k + 1, y, x, ch]) - int(frames[k, y, x, ch]))
    return total / ((t - 1) * h * w * c * 255)


def test_activity_of_moving_box_matches_brute_force():
    vol = synth_clip(2, 5, t=8, h=12, w=16)
    score = activity_score(vol)
    assert 0.0 < score < 1.0
    assert score == pytest.approx(_activity_oracle(vol.frames), rel=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_activity_flip_invariant(seed):
    rng = np.random.default_rng(seed)
    frames = rng.integers(0, 256, size=(int(rng.integers(1, 6)), 5, 7, 3), dtype=np.uint8)
    a = activity_score(FrameVolume(frames, 1.0))
    b = activity_score(FrameVolume(frames[:, :, ::-1], 1.0))
    assert a == b
    assert 0.0 <= a <= 1.0


@pytest.mark.parametrize("duration, activity, expected", [(16, 0, 8), (16, 1, 16), (120, 0.5, 32)])
def test_adaptive_examples(duration, activity, expected):
    assert adaptive_frame_count(duration, activity, CFG) == expected


def test_round_half_away_from_zero():
    assert [round_half_away(x) for x in (0.5, 1.5, 2.5, -0.5, -2.5, 2.49)] == [1, 2, 3, -1, -3, 2]
    # 9 s at base 2 -> 4.5 -> 5 (banker's rounding would give 4)
    cfg = SamplingConfig(1, 32, 2.0, 0.0)
    assert adaptive_frame_count(9, 0, cfg) == 5


@given(st.floats(0, 500), st.floats(0, 500), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_adaptive_monotone_and_clamped(d1, d2, a1, a2):
    d1, d2 = sorted((d1, d2))
    a1, a2 = sorted((a1, a2))
    assert adaptive_frame_count(d1, a1, CFG) <= adaptive_frame_count(d2, a1, CFG)
    assert adaptive_frame_count(d1, a1, CFG) <= adaptive_frame_count(d1, a2, CFG)
    assert CFG.n_min <= adaptive_frame_count(d2, a2, CFG) <= CFG.n_max


def test_adaptive_domain():
    with pytest.raises(DomainError):
        adaptive_frame_count(-1, 0, CFG)
    with pytest.raises(DomainError):
        adaptive_frame_count(1, 1.5, CFG)


def test_config_validation():
    with pytest.raises(ConfigError):
        SamplingConfig(n_min=0)
    with pytest.raises(ConfigError):
        SamplingConfig(n_min=9, n_max=8)
    with pytest.raises(ConfigError):
        SamplingConfig(seconds_per_frame_base=0)
    with pytest.raises(ConfigError):
        SamplingConfig(activity_weight=-1)
