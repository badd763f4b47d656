import sys

import numpy as np
import pytest

from clipguard.frame_store import FrameVolume
from clipguard.model import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg():
    return ModelConfig(frames=2, image_size=16, patch_size=8, embed_dim=8, heads=2, depth=1)


@pytest.fixture
def desk_cfg():
    return ModelConfig()


def random_volume(rng, t=None, h=None, w=None, fps=None):
    t = t or int(rng.integers(1, 10))
    h = h or int(rng.integers(1, 20))
    w = w or int(rng.integers(1, 20))
    fps = fps or float(rng.uniform(1, 60))
    return FrameVolume(rng.integers(0, 256, size=(t, h, w, 3), dtype=np.uint8), fps)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
