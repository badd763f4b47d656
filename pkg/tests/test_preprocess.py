import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clipguard.errors import ConfigError, DomainError
from clipguard.frame_store import FrameVolume, synth_clip
from clipguard.preprocess import (
    AugmentConfig, NormalizationParams, build_pipeline, center_crop, crop_at, denormalize,
    horizontal_flip, normalize, random_crop, resize_bilinear, short_side_scale, to_unit_float,
)
from clipguard.rng import RngStream, clip_stream
from clipguard.sampling import SamplingConfig

NORM = NormalizationParams()
SMALL = AugmentConfig(short_side_min=16, short_side_max=20, target_h=16, target_w=16, eval_frames=4)
SAMPLER = SamplingConfig(n_min=2, n_max=6, seconds_per_frame_base=0.5)


def test_unit_float_endpoints():
    vol = FrameVolume(np.array([0, 255, 51], np.uint8).reshape(1, 1, 1, 3), 1.0)
    out = to_unit_float(vol)
    assert out.dtype == np.float64
    assert out.ravel().tolist() == [0.0, 1.0, 0.2]


def test_normalize_examples(rng):
    x = np.broadcast_to(np.array(NORM.mean), (2, 3, 4, 3)).copy()
    assert np.abs(normalize(x, NORM)).max() == 0.0
    half = NormalizationParams((0.5,) * 3, (0.5,) * 3)
    assert normalize(np.ones((1, 1, 1, 3)), half).ravel().tolist() == [1.0, 1.0, 1.0]
    y = rng.random((3, 5, 5, 3))
    np.testing.assert_allclose(denormalize(normalize(y, NORM), NORM), y, atol=1e-6)


def test_normalize_rejects_bad_std():
    with pytest.raises(ConfigError):
        NormalizationParams(std=(0.2, 0.0, 0.2))


def test_flip_probability_extremes(rng):
    x = rng.random((2, 3, 4, 3))
    for seed in range(50):
        out, flipped = horizontal_flip(x, RngStream(seed), 0.0)
        assert not flipped and out is x
        out, flipped = horizontal_flip(x, RngStream(seed), 1.0)
        assert flipped
        np.testing.assert_array_equal(out, x[:, :, ::-1])
        back, _ = horizontal_flip(out, RngStream(seed), 1.0)
        np.testing.assert_array_equal(back, x)


def test_flip_rate_monte_carlo():
    x = np.zeros((1, 1, 2, 3))
    flips = sum(horizontal_flip(x, RngStream(seed), 0.5)[1] for seed in range(10_000))
    assert abs(flips / 10_000 - 0.5) <= 0.02


def test_flip_applies_to_all_frames_identically(rng):
    x = rng.random((5, 3, 4, 3))
    out, flipped = horizontal_flip(x, RngStream(0), 1.0)
    for k in range(5):
        np.testing.assert_array_equal(out[k], x[k, :, ::-1])


def _bilinear_oracle(img, out_h, out_w):
    h, w = img.shape[:2]
    out = np.zeros((out_h, out_w, img.shape[2]))
    for i in range(out_h):
        sy = min(max((i + 0.5) * h / out_h - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy)); y1 = min(y0 + 1, h - 1); fy = sy - y0
        for j in range(out_w):
            sx = min(max((j + 0.5) * w / out_w - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx)); x1 = min(x0 + 1, w - 1); fx = sx - x0
            top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
            out[i, j] = top * (1 - fy) + bot * fy
    return out


@pytest.mark.parametrize("shape, out", [((4, 6), (9, 13)), ((7, 5), (3, 2)), ((1, 3), (2, 7))])
def test_resize_matches_loop_oracle(rng, shape, out):
    x = rng.random((2,) + shape + (3,))
    got = resize_bilinear(x, *out)
    for k in range(2):
        np.testing.assert_allclose(got[k], _bilinear_oracle(x[k], *out), rtol=0, atol=1e-12)


def test_short_side_scale_sizes():
    x = np.zeros((1, 64, 128, 3))
    assert short_side_scale(x, RngStream(0), 256, 256).shape == (1, 256, 512, 3)
    sq = np.zeros((1, 100, 100, 3))
    assert short_side_scale(sq, RngStream(0), 300, 300).shape == (1, 300, 300, 3)
    tall = np.zeros((1, 30, 20, 3))
    assert short_side_scale(tall, RngStream(0), 10, 10).shape == (1, 15, 10, 3)


def test_short_side_scale_constant_stays_constant():
    x = np.full((2, 10, 17, 3), 0.3)
    out = short_side_scale(x, RngStream(4), 11, 25)
    np.testing.assert_allclose(out, 0.3, atol=1e-15)


def test_short_side_draw_range():
    x = np.zeros((1, 4, 8, 3))
    sizes = {short_side_scale(x, RngStream(s), 5, 8).shape[1] for s in range(200)}
    assert sizes == {5, 6, 7, 8}
    with pytest.raises(DomainError):
        short_side_scale(x, RngStream(0), 9, 8)


def test_crops(rng):
    x = rng.random((3, 4, 4, 3))
    np.testing.assert_array_equal(crop_at(x, 1, 1, 2, 2), x[:, 1:3, 1:3])
    np.testing.assert_array_equal(center_crop(x, 2, 2), x[:, 1:3, 1:3])
    np.testing.assert_array_equal(center_crop(x, 4, 4), x)
    y = rng.random((1, 5, 5, 3))
    np.testing.assert_array_equal(center_crop(y, 2, 2), y[:, 1:3, 1:3])
    z = rng.random((2, 224, 224, 3))
    np.testing.assert_array_equal(random_crop(z, RngStream(1), 224, 224), z)
    with pytest.raises(DomainError):
        random_crop(x, RngStream(0), 5, 2)
    with pytest.raises(DomainError):
        center_crop(x, 2, 5)


def test_random_crop_deterministic_and_shared_across_frames(rng):
    x = rng.random((4, 10, 12, 3))
    a = random_crop(x, RngStream(8), 5, 6)
    np.testing.assert_array_equal(a, random_crop(x, RngStream(8), 5, 6))
    # find the offset from frame 0 and check the others use it too
    offsets = [(i, j) for i in range(6) for j in range(7)
               if np.array_equal(x[0, i:i + 5, j:j + 6], a[0])]
    assert len(offsets) == 1
    i, j = offsets[0]
    np.testing.assert_array_equal(a, x[:, i:i + 5, j:j + 6])


def test_augment_config_validation():
    with pytest.raises(ConfigError):
        AugmentConfig(flip_probability=1.5)
    with pytest.raises(ConfigError):
        AugmentConfig(short_side_min=300, short_side_max=256)
    with pytest.raises(ConfigError):
        AugmentConfig(short_side_min=200, short_side_max=256, target_h=224)
    with pytest.raises(ConfigError):
        AugmentConfig(mode="test")


def _clip(seed, t=12, h=18, w=24):
    return synth_clip(seed % 4, seed, t=t, h=h, w=w, fps=8.0)


def test_eval_pipeline_is_pure():
    eval_tf = build_pipeline(AugmentConfig(**{**SMALL.__dict__, "mode": "eval"}), NORM, SAMPLER)
    clip = _clip(3)
    a, b = eval_tf(clip), eval_tf(clip)
    assert a.shape == (4, 16, 16, 3)
    assert a.tobytes() == b.tobytes()


def test_eval_pipeline_stage_by_stage():
    eval_cfg = AugmentConfig(**{**SMALL.__dict__, "mode": "eval"})
    clip = _clip(5)
    x = to_unit_float(clip.frames[[0, 3, 7, 11]])
    x = normalize(x, NORM)
    x = resize_bilinear(x, 16, 21)
    x = x[:, :, 2:18]
    np.testing.assert_array_equal(build_pipeline(eval_cfg, NORM, SAMPLER)(clip), x)


def test_train_pipeline_stage_order():
    tf = build_pipeline(SMALL, NORM, SAMPLER)
    clip = _clip(2)
    n = tf.frame_count(clip)
    rng = RngStream(99)
    expected = normalize(to_unit_float(clip.frames[[i * 11 // (n - 1) for i in range(n)]]), NORM)
    draws = rng.copy()
    if draws.uniform() < SMALL.flip_probability:
        expected = expected[:, :, ::-1]
    s = draws.randint(16, 20)
    expected = resize_bilinear(expected, s, round(24 * s / 18 + 1e-12))
    top, left = draws.randint(0, s - 16), draws.randint(0, expected.shape[2] - 16)
    expected = expected[:, top:top + 16, left:left + 16]
    np.testing.assert_array_equal(tf(clip, rng), expected)


def test_train_pipeline_needs_rng():
    with pytest.raises(ValueError):
        build_pipeline(SMALL, NORM, SAMPLER)(_clip(0))


@given(st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_train_pipeline_reproducible_per_path(seed):
    tf = build_pipeline(SMALL, NORM, SAMPLER)
    clip = _clip(seed)
    a = tf.for_clip(clip, f"clips/{seed}.fvt", 17)
    b = tf.for_clip(clip, f"clips/{seed}.fvt", 17)
    assert a.tobytes() == b.tobytes()
    assert a.shape[1:] == (16, 16, 3)
    assert SAMPLER.n_min <= a.shape[0] <= SAMPLER.n_max


def test_train_pipeline_uses_path_stream():
    tf = build_pipeline(SMALL, NORM, SAMPLER)
    clip = _clip(1)
    np.testing.assert_array_equal(tf.for_clip(clip, "x.fvt", 5), tf(clip, clip_stream(5, "x.fvt")))


def test_constant_clip_normalizes_to_zero_mean():
    mean_bytes = np.round(np.array(NORM.mean) * 255).astype(np.uint8)
    clip = FrameVolume(np.broadcast_to(mean_bytes, (6, 18, 24, 3)).copy(), 4.0)
    x = build_pipeline(AugmentConfig(**{**SMALL.__dict__, "mode": "eval"}), NORM, SAMPLER)(clip)
    exact = (mean_bytes / 255.0 - np.array(NORM.mean)) / np.array(NORM.std)
    np.testing.assert_allclose(x.mean(axis=(0, 1, 2)), exact, atol=1e-6)
    const = NormalizationParams(tuple(mean_bytes / 255.0), NORM.std)
    y = build_pipeline(AugmentConfig(**{**SMALL.__dict__, "mode": "eval"}), const, SAMPLER)(clip)
    assert np.abs(y.mean(axis=(0, 1, 2))).max() <= 1e-6


def test_eval_short_clip_uses_every_frame():
    from clipguard.config import PipelineConfig
    vol = FrameVolume(synth_clip(0, 1, t=8).frames[:3], 8.0)
    assert PipelineConfig().transform("eval")(vol).shape == (3, 32, 32, 3)
