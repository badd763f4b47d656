"""The divided space-time transformer and its hand-written backward pass.

Checks a handful of analytic gradients against central differences, then
prints the attention row sums that every block must normalise.
"""

import numpy as np

from clipguard.model import (
    ModelConfig, attention_maps, backward, count_params, cross_entropy, forward, init_params,
)

cfg = ModelConfig(frames=2, image_size=16, patch_size=8, embed_dim=8, heads=2, depth=1)
rng = np.random.default_rng(0)
params = init_params(cfg, seed=0)
for k in params:
    params[k] = params[k] + rng.normal(0, 0.3, params[k].shape)
x = rng.normal(size=(2, 16, 16, 3))
print(f"tiny model: {count_params(params)} parameters, logits {forward(x, params, cfg).round(3)}")

grads = backward(x, 3, params, cfg)
eps = 1e-4
for name in ("patch.weight", "blocks.0.temporal.qkv.weight", "blocks.0.mlp.fc1.bias", "head.weight"):
    idx = tuple(int(rng.integers(0, s)) for s in params[name].shape)
    old = params[name][idx]
    params[name][idx] = old + eps
    up = cross_entropy(forward(x, params, cfg), 3)[0]
    params[name][idx] = old - eps
    down = cross_entropy(forward(x, params, cfg), 3)[0]
    params[name][idx] = old
    print(f"{name:<30} analytic {grads[name][idx]:+.6e}  numeric {(up - down) / (2 * eps):+.6e}")

temporal, spatial = attention_maps(x, params, cfg)[0]
print("attention row sums (min, max):", temporal.sum(-1).min(), spatial.sum(-1).max())
