"""Divided space-time attention video classifier in plain numpy.

Each block runs, with pre-layer-norm residuals:

1. temporal attention: every token position attends across the T frames,
2. spatial attention: the P+1 tokens of each frame attend to one another,
3. a two-layer GELU MLP.

A learned class token is replicated into every frame at token index 0; the
classifier reads the final-normed class tokens averaged over frames.

Parameters live in a flat ``dict`` of named arrays (a "ParamSet"); gradients
come back in a dict with the same keys. Every function accepts a single clip
``T x H x W x 3`` or a batch ``B x T x H x W x 3``.
"""

import math
from dataclasses import asdict, dataclass
from typing import Protocol

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    frames: int = 8
    image_size: int = 32
    patch_size: int = 8
    embed_dim: int = 32
    heads: int = 4
    depth: int = 2
    mlp_ratio: float = 2.0
    num_classes: int = 4

    def __post_init__(self):
        for name in ("frames", "image_size", "patch_size", "embed_dim", "heads", "depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.image_size % self.patch_size:
            raise ConfigError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}")
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if self.num_classes != 4:
            raise ConfigError("num_classes must be 4")
        if self.hidden_dim < 1:
            raise ConfigError("mlp_ratio gives an empty hidden layer")

    @property
    def num_patches(self):
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self):
        return 3 * self.patch_size ** 2

    @property
    def hidden_dim(self):
        return int(round(self.embed_dim * self.mlp_ratio))

    def to_dict(self):
        return asdict(self)


# ----------------------------------------------------------------------------
# parameters

def param_shapes(cfg):
    """Ordered mapping from parameter name to shape."""
    d, hid, p = cfg.embed_dim, cfg.hidden_dim, cfg.num_patches
    shapes = {
        "patch.weight": (cfg.patch_dim, d),
        "patch.bias": (d,),
        "cls_token": (d,),
        "pos_space": (p, d),
        "pos_time": (cfg.frames, d),
    }
    for i in range(cfg.depth):
        for attn in ("temporal", "spatial"):
            pre = f"blocks.{i}.{attn}"
            shapes[f"{pre}.norm.weight"] = (d,)
            shapes[f"{pre}.norm.bias"] = (d,)
            shapes[f"{pre}.qkv.weight"] = (d, 3 * d)
            shapes[f"{pre}.qkv.bias"] = (3 * d,)
            shapes[f"{pre}.proj.weight"] = (d, d)
            shapes[f"{pre}.proj.bias"] = (d,)
        pre = f"blocks.{i}.mlp"
        shapes[f"{pre}.norm.weight"] = (d,)
        shapes[f"{pre}.norm.bias"] = (d,)
        shapes[f"{pre}.fc1.weight"] = (d, hid)
        shapes[f"{pre}.fc1.bias"] = (hid,)
        shapes[f"{pre}.fc2.weight"] = (hid, d)
        shapes[f"{pre}.fc2.bias"] = (d,)
    shapes["norm.weight"] = (d,)
    shapes["norm.bias"] = (d,)
    shapes["head.weight"] = (d, cfg.num_classes)
    shapes["head.bias"] = (cfg.num_classes,)
    return shapes


def _trunc_normal(rng, shape, std=0.02):
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def init_params(cfg, seed=0, dtype=np.float64):
    """Truncated-normal weights (sigma 0.02), unit norm scales, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("norm.weight"):
            arr = np.ones(shape)
        elif name.endswith(".weight") or name == "cls_token":
            arr = _trunc_normal(rng, shape)
        else:
            arr = np.zeros(shape)
        params[name] = arr.astype(dtype)
    return params


def zeros_like_params(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def check_params(params, cfg):
    expected = param_shapes(cfg)
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise ShapeError(f"parameter names differ: missing {missing}, unexpected {extra}")
    for name, shape in expected.items():
        if tuple(params[name].shape) != shape:
            raise ShapeError(f"{name} has shape {params[name].shape}, expected {shape}")


def count_params(params):
    return sum(int(v.size) for v in params.values())


# ----------------------------------------------------------------------------
# primitive layers: each forward returns (out, cache); backward consumes the cache

def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _layer_norm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + LN_EPS)
    xh = xc * rstd
    return xh * g + b, (xh, rstd, g)


def _layer_norm_back(dy, cache):
    xh, rstd, g = cache
    d = xh.shape[-1]
    dg = (dy * xh).reshape(-1, d).sum(0)
    db = dy.reshape(-1, d).sum(0)
    dxh = dy * g
    dx = rstd * (dxh - dxh.mean(-1, keepdims=True) - xh * (dxh * xh).mean(-1, keepdims=True))
    return dx, dg, db


def _gelu(x):
    t = np.tanh(_GELU_C * (x + 0.044715 * x ** 3))
    return 0.5 * x * (1.0 + t), t


def _gelu_back(dy, x, t):
    dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * dt)


def _attention(h, w_qkv, b_qkv, w_o, b_o, heads):
    """Multi-head self-attention over sequences ``h`` of shape N x L x D."""
    n, length, d = h.shape
    dh = d // heads
    scale = 1.0 / math.sqrt(dh)
    qkv = h @ w_qkv + b_qkv
    qkv = qkv.reshape(n, length, 3, heads, dh).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    attn = softmax((q @ k.transpose(0, 1, 3, 2)) * scale)
    o = (attn @ v).transpose(0, 2, 1, 3).reshape(n, length, d)
    out = o @ w_o + b_o
    return out, (h, q, k, v, attn, o, w_qkv, w_o, scale)


def _attention_back(dout, cache):
    h, q, k, v, attn, o, w_qkv, w_o, scale = cache
    n, length, d = h.shape
    heads, dh = q.shape[1], q.shape[3]
    dw_o = o.reshape(-1, d).T @ dout.reshape(-1, d)
    db_o = dout.reshape(-1, d).sum(0)
    do = (dout @ w_o.T).reshape(n, length, heads, dh).transpose(0, 2, 1, 3)
    dattn = do @ v.transpose(0, 1, 3, 2)
    dv = attn.transpose(0, 1, 3, 2) @ do
    dscores = attn * (dattn - (dattn * attn).sum(-1, keepdims=True)) * scale
    dq = dscores @ k
    dk = dscores.transpose(0, 1, 3, 2) @ q
    dqkv = np.stack([dq, dk, dv]).transpose(1, 3, 0, 2, 4).reshape(n, length, 3 * d)
    dw_qkv = h.reshape(-1, d).T @ dqkv.reshape(-1, 3 * d)
    db_qkv = dqkv.reshape(-1, 3 * d).sum(0)
    dh_in = dqkv @ w_qkv.T
    return dh_in, dw_qkv, db_qkv, dw_o, db_o


# ----------------------------------------------------------------------------
# model stages

def _as_batch(clip):
    clip = np.asarray(clip)
    if clip.ndim == 4:
        return clip[None], True
    if clip.ndim == 5:
        return clip, False
    raise ShapeError(f"clip must be T x H x W x 3 or B x T x H x W x 3, got {clip.shape}")


def _check_clip(x, cfg):
    _, t, h, w, c = x.shape
    for axis, got, want in (("height", h, cfg.image_size), ("width", w, cfg.image_size),
                            ("channels", c, 3)):
        if got != want:
            raise ShapeError(f"{axis} axis is {got}, model expects {want}")
    if not 1 <= t <= cfg.frames:
        raise ShapeError(f"frames axis is {t}, model accepts 1..{cfg.frames}")


def patchify(x, patch):
    """B x T x H x W x C -> B x T x P x (patch*patch*C), patches in raster order."""
    b, t, h, w, c = x.shape
    gh, gw = h // patch, w // patch
    x = x.reshape(b, t, gh, patch, gw, patch, c).transpose(0, 1, 2, 4, 3, 5, 6)
    return x.reshape(b, t, gh * gw, patch * patch * c)


def patch_embed(clip, params, cfg):
    """Linear patch projection plus spatial and temporal position embeddings.

    Returns tokens shaped T x P x D (or B x T x P x D for a batch).
    """
    x, single = _as_batch(clip)
    _check_clip(x, cfg)
    t = x.shape[1]
    patches = patchify(x, cfg.patch_size)
    tok = (patches @ params["patch.weight"] + params["patch.bias"]
           + params["pos_space"][None, None] + params["pos_time"][None, :t, None])
    return tok[0] if single else tok


def _block_forward(z, params, pre, heads):
    b, t, s, d = z.shape
    cache = {}

    # temporal: sequences run over frames, one per (clip, token position)
    h, cache["t_ln"] = _layer_norm(z, params[f"{pre}.temporal.norm.weight"],
                                   params[f"{pre}.temporal.norm.bias"])
    h = h.transpose(0, 2, 1, 3).reshape(b * s, t, d)
    a, cache["t_attn"] = _attention(h, params[f"{pre}.temporal.qkv.weight"],
                                    params[f"{pre}.temporal.qkv.bias"],
                                    params[f"{pre}.temporal.proj.weight"],
                                    params[f"{pre}.temporal.proj.bias"], heads)
    z = z + a.reshape(b, s, t, d).transpose(0, 2, 1, 3)

    # spatial: sequences run over the tokens of one frame
    h, cache["s_ln"] = _layer_norm(z, params[f"{pre}.spatial.norm.weight"],
                                   params[f"{pre}.spatial.norm.bias"])
    a, cache["s_attn"] = _attention(h.reshape(b * t, s, d), params[f"{pre}.spatial.qkv.weight"],
                                    params[f"{pre}.spatial.qkv.bias"],
                                    params[f"{pre}.spatial.proj.weight"],
                                    params[f"{pre}.spatial.proj.bias"], heads)
    z = z + a.reshape(b, t, s, d)

    h, cache["m_ln"] = _layer_norm(z, params[f"{pre}.mlp.norm.weight"],
                                   params[f"{pre}.mlp.norm.bias"])
    u = h @ params[f"{pre}.mlp.fc1.weight"] + params[f"{pre}.mlp.fc1.bias"]
    g, tanh_u = _gelu(u)
    z = z + g @ params[f"{pre}.mlp.fc2.weight"] + params[f"{pre}.mlp.fc2.bias"]
    cache["mlp"] = (h, u, tanh_u, g)
    return z, cache


def _block_backward(dz, cache, params, grads, pre):
    b, t, s, d = dz.shape

    h, u, tanh_u, g = cache["mlp"]
    hid = u.shape[-1]
    grads[f"{pre}.mlp.fc2.weight"] += g.reshape(-1, hid).T @ dz.reshape(-1, d)
    grads[f"{pre}.mlp.fc2.bias"] += dz.reshape(-1, d).sum(0)
    du = _gelu_back(dz @ params[f"{pre}.mlp.fc2.weight"].T, u, tanh_u)
    grads[f"{pre}.mlp.fc1.weight"] += h.reshape(-1, d).T @ du.reshape(-1, hid)
    grads[f"{pre}.mlp.fc1.bias"] += du.reshape(-1, hid).sum(0)
    dx, dg, db = _layer_norm_back(du @ params[f"{pre}.mlp.fc1.weight"].T, cache["m_ln"])
    grads[f"{pre}.mlp.norm.weight"] += dg
    grads[f"{pre}.mlp.norm.bias"] += db
    dz = dz + dx

    for kind, attn_key, ln_key in (("spatial", "s_attn", "s_ln"), ("temporal", "t_attn", "t_ln")):
        if kind == "spatial":
            da = dz.reshape(b * t, s, d)
        else:
            da = dz.transpose(0, 2, 1, 3).reshape(b * s, t, d)
        dh, dw_qkv, db_qkv, dw_o, db_o = _attention_back(da, cache[attn_key])
        grads[f"{pre}.{kind}.qkv.weight"] += dw_qkv
        grads[f"{pre}.{kind}.qkv.bias"] += db_qkv
        grads[f"{pre}.{kind}.proj.weight"] += dw_o
        grads[f"{pre}.{kind}.proj.bias"] += db_o
        if kind == "spatial":
            dh = dh.reshape(b, t, s, d)
        else:
            dh = dh.reshape(b, s, t, d).transpose(0, 2, 1, 3)
        dx, dg, db = _layer_norm_back(dh, cache[ln_key])
        grads[f"{pre}.{kind}.norm.weight"] += dg
        grads[f"{pre}.{kind}.norm.bias"] += db
        dz = dz + dx
    return dz


def divided_block(tokens, params, cfg, index=0):
    """Apply block ``index`` to tokens shaped T x (P+1) x D (or batched)."""
    z, single = (tokens[None], True) if tokens.ndim == 3 else (tokens, False)
    z, _ = _block_forward(z, params, f"blocks.{index}", cfg.heads)
    if not np.isfinite(z).all():
        raise NumericError(f"non-finite activation in block {index}")
    return z[0] if single else z


def _forward(x, params, cfg):
    """Batched forward pass keeping everything the backward pass needs."""
    _check_clip(x, cfg)
    b, t = x.shape[:2]
    d = cfg.embed_dim
    patches = patchify(x, cfg.patch_size)
    emb = (patches @ params["patch.weight"] + params["patch.bias"]
           + params["pos_space"][None, None] + params["pos_time"][None, :t, None])
    cls = np.broadcast_to(params["cls_token"], (b, t, 1, d))
    z = np.concatenate([cls, emb], axis=2)
    assert z.shape == (b, t, cfg.num_patches + 1, d)

    block_caches = []
    for i in range(cfg.depth):
        z, c = _block_forward(z, params, f"blocks.{i}", cfg.heads)
        if not np.isfinite(z).all():
            raise NumericError(f"non-finite activation in block {i}")
        block_caches.append(c)

    zn, ln_cache = _layer_norm(z, params["norm.weight"], params["norm.bias"])
    pooled = zn[:, :, 0, :].mean(axis=1)
    logits = pooled @ params["head.weight"] + params["head.bias"]
    assert logits.shape == (b, cfg.num_classes)
    cache = {"patches": patches, "blocks": block_caches, "ln": ln_cache,
             "pooled": pooled, "shape": z.shape}
    return logits, cache


def forward(clip, params, cfg, return_cache=False):
    """Class logits for a clip (shape (4,)) or a batch (shape (B, 4))."""
    x, single = _as_batch(clip)
    logits, cache = _forward(x, params, cfg)
    if single:
        logits = logits[0]
    return (logits, cache) if return_cache else logits


def cross_entropy(logits, label):
    """Loss ``-log softmax(logits)[label]`` and its gradient w.r.t. the logits.

    Batched logits (B x K) with a label array give the mean loss and the
    gradient of that mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_p = z - log_z
    label = np.asarray(label, dtype=np.intp)
    onehot = np.zeros_like(logits)
    if logits.ndim == 1:
        onehot[label] = 1.0
        return float(-log_p[label]), np.exp(log_p) - onehot
    onehot[np.arange(len(label)), label] = 1.0
    loss = float(-log_p[np.arange(len(label)), label].mean())
    return loss, (np.exp(log_p) - onehot) / len(label)


def _backward(dlogits, cache, params, cfg):
    grads = zeros_like_params(params)
    b, t, s, d = cache["shape"]
    grads["head.weight"] += cache["pooled"].T @ dlogits
    grads["head.bias"] += dlogits.sum(0)
    dpooled = dlogits @ params["head.weight"].T
    dzn = np.zeros((b, t, s, d), dtype=dpooled.dtype)
    dzn[:, :, 0, :] = dpooled[:, None, :] / t
    dz, dg, db = _layer_norm_back(dzn, cache["ln"])
    grads["norm.weight"] += dg
    grads["norm.bias"] += db

    for i in reversed(range(cfg.depth)):
        dz = _block_backward(dz, cache["blocks"][i], params, grads, f"blocks.{i}")

    grads["cls_token"] += dz[:, :, 0, :].sum((0, 1))
    demb = dz[:, :, 1:, :]
    grads["patch.bias"] += demb.sum((0, 1, 2))
    grads["pos_space"] += demb.sum((0, 1))
    grads["pos_time"][:t] += demb.sum((0, 2))
    patches = cache["patches"]
    grads["patch.weight"] += patches.reshape(-1, patches.shape[-1]).T @ demb.reshape(-1, d)
    return grads


def loss_and_grads(clip, label, params, cfg):
    """Cross-entropy loss and exact gradients for every parameter.

    For a batch the loss is the batch mean, as is the gradient.
    """
    x, single = _as_batch(clip)
    labels = np.atleast_1d(np.asarray(label, dtype=np.intp))
    if len(labels) != x.shape[0]:
        raise ShapeError(f"{len(labels)} labels for a batch of {x.shape[0]} clips")
    logits, cache = _forward(x, params, cfg)
    loss, dlogits = cross_entropy(logits, labels)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")
    return loss, _backward(dlogits, cache, params, cfg)


def backward(clip, label, params, cfg):
    """Gradient ParamSet of ``cross_entropy(forward(clip), label)``."""
    return loss_and_grads(clip, label, params, cfg)[1]


def predict_proba(clip, params, cfg):
    return softmax(forward(clip, params, cfg))


def attention_maps(clip, params, cfg):
    """Softmax attention weights of every block, for inspection and tests.

    Returns a list of ``(temporal, spatial)`` arrays per block, each shaped
    sequences x heads x queries x keys.
    """
    x, _ = _as_batch(clip)
    _, cache = _forward(x, params, cfg)
    return [(c["t_attn"][4], c["s_attn"][4]) for c in cache["blocks"]]


class ClassifierBackend(Protocol):
    """Anything that maps a preprocessed n x h x w x 3 clip to 4 class probabilities.

    External runtimes (for instance other pretrained video transformers)
    plug in here; outputs must be non-negative and sum to 1.
    """

    def predict_proba(self, clip: np.ndarray) -> np.ndarray: ...


class NativeBackend:
    """:class:`ClassifierBackend` backed by this module's transformer."""

    def __init__(self, params, cfg):
        check_params(params, cfg)
        self.params = params
        self.cfg = cfg

    def predict_proba(self, clip):
        return predict_proba(clip, self.params, self.cfg)


def validate_probabilities(probs, num_classes=4, atol=1e-6):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[-1] != num_classes:
        raise ShapeError(f"expected {num_classes} probabilities, got shape {probs.shape}")
    if not np.isfinite(probs).all() or (probs < 0).any():
        raise NumericError("probabilities must be finite and non-negative")
    if np.abs(probs.sum(-1) - 1.0).max() > atol:
        raise NumericError(f"probabilities sum to {probs.sum(-1)}, not 1")
    return probs
