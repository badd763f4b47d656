"""Train and eval preprocessing of a single clip.

Train mode draws a flip, a short-side scale and a crop from a stream seeded
by (global seed, clip path), so reruns reproduce the same tensor. Eval mode
draws nothing.
"""

import numpy as np

from clipguard.config import PipelineConfig
from clipguard.frame_store import synth_clip

cfg = PipelineConfig.from_file("configs/desk.cfg")
vol = synth_clip(2, seed=11, t=40, h=36, w=48)

train, evaluate = cfg.transform("train"), cfg.transform("eval")
a = train.for_clip(vol, "harmful/harmful_0011.fvt", cfg.global_seed)
b = train.for_clip(vol, "harmful/harmful_0011.fvt", cfg.global_seed)
c = train.for_clip(vol, "harmful/harmful_0012.fvt", cfg.global_seed)
print("train tensor", a.shape, "| same path identical:", np.array_equal(a, b),
      "| other path identical:", a.shape == c.shape and np.array_equal(a, c))

e = evaluate(vol)
print("eval tensor ", e.shape, "| per-channel mean", np.round(e.mean(axis=(0, 1, 2)), 3))
