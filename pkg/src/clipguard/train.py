"""Fine-tuning loop: AdamW, linear warmup/decay schedule, best-epoch selection."""

import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from .checkpoint import Checkpoint
from .errors import ConfigError, DomainError, NumericError
from .preprocess import ClipTransform
from .model import init_params, loss_and_grads, predict_proba
from .rng import RngStream, derive_seed


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 4
    epochs: int = 9
    warmup_ratio: float = 0.1
    max_steps: int = 6905
    seed: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError("warmup_ratio must lie in [0, 1]")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")

    @property
    def warmup_steps(self):
        # exact decimal product, so 0.1 * 6905 floors to 690 without float drift
        return math.floor(Fraction(repr(float(self.warmup_ratio))) * self.max_steps)


def lr_at_step(step, cfg):
    """Linear warmup from 0 to the base rate, then linear decay back to 0."""
    if not 0 <= step <= cfg.max_steps:
        raise DomainError(f"step {step} outside [0, {cfg.max_steps}]")
    warm = cfg.warmup_steps
    if warm > 0 and step <= warm:
        return cfg.learning_rate * (step / warm)
    if warm == cfg.max_steps:
        return 0.0
    return cfg.learning_rate * ((cfg.max_steps - step) / (cfg.max_steps - warm))


class AdamW:
    """Adam with decoupled weight decay, updating a ParamSet in place."""

    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            if self.weight_decay:
                p -= lr * self.weight_decay * p
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class LabeledClip:
    path: str
    clip: object  # FrameVolume
    label: int


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    epochs: list = field(default_factory=list)

    def records(self):
        """Step and epoch events merged in chronological order."""
        out = []
        by_epoch = {e["epoch"]: e for e in self.epochs}
        for s in self.steps:
            out.append(s)
            last = by_epoch.get(s["epoch"])
            if last is not None and last["step"] == s["step"]:
                out.append(last)
        return out

    def to_jsonl(self, destination):
        with open(destination, "w", encoding="utf-8") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, source):
        log = cls()
        with open(source, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                (log.steps if rec["event"] == "step" else log.epochs).append(rec)
        return log


def select_best(checkpoints):
    """Highest validation accuracy; the earliest step wins ties."""
    if not checkpoints:
        raise DomainError("no checkpoints to select from")
    return min(checkpoints, key=lambda c: (-c.val_accuracy, c.step))


def predict_batched(xs, params, model_cfg, chunk=32):
    """Probabilities for a list of preprocessed clips, grouped by frame count."""
    probs = [None] * len(xs)
    groups = {}
    for i, x in enumerate(xs):
        groups.setdefault(x.shape, []).append(i)
    for idx in groups.values():
        for s in range(0, len(idx), chunk):
            part = idx[s:s + chunk]
            out = predict_proba(np.stack([xs[i] for i in part]), params, model_cfg)
            for i, p in zip(part, out):
                probs[i] = p
    return np.array(probs).reshape(len(xs), -1)


def _batch_loss_and_grads(xs, labels, params, model_cfg):
    """Mean loss/gradient over clips that may differ in frame count."""
    groups = {}
    for x, y in zip(xs, labels):
        groups.setdefault(x.shape, ([], []))
        groups[x.shape][0].append(x)
        groups[x.shape][1].append(y)
    total_loss, grads = 0.0, None
    n = len(xs)
    for gx, gy in groups.values():
        loss, g = loss_and_grads(np.stack(gx), np.array(gy), params, model_cfg)
        w = len(gx) / n
        total_loss += w * loss
        if grads is None:
            grads = {k: w * v for k, v in g.items()}
        else:
            for k, v in g.items():
                grads[k] += w * v
    return total_loss, grads


def fit(train_set, dev_set, model_cfg, train_cfg, transform, global_seed=None, progress=None):
    """Fine-tune from a seeded initialization; return ``(best_checkpoint, log)``.

    ``transform`` is a train-mode :class:`~clipguard.preprocess.ClipTransform`;
    dev clips go through its eval-mode twin. Validation runs after every
    epoch and the epoch with the highest dev accuracy is returned.
    """
    if not train_set or not dev_set:
        raise ConfigError("train and dev sets must both be non-empty")
    seed = train_cfg.seed if global_seed is None else global_seed
    eval_transform = ClipTransform(replace(transform.cfg, mode="eval"), transform.norm,
                                   transform.sampler)
    dev_x = [eval_transform(ex.clip) for ex in dev_set]
    dev_y = np.array([int(ex.label) for ex in dev_set])

    params = init_params(model_cfg, seed=derive_seed(seed, 1))
    opt = AdamW(params, weight_decay=train_cfg.weight_decay)
    steps_per_epoch = math.ceil(len(train_set) / train_cfg.batch_size)
    total_steps = min(train_cfg.epochs * steps_per_epoch, train_cfg.max_steps)

    log = TrainLog()
    candidates = []
    step = 0
    epoch = 0
    while step < total_steps:
        epoch += 1
        order = RngStream(derive_seed(seed, 2, epoch)).shuffle(list(range(len(train_set))))
        # per-epoch augmentation seed; each clip's stream then follows from its path
        aug_seed = derive_seed(seed, 3, epoch)
        for start in range(0, len(order), train_cfg.batch_size):
            if step >= total_steps:
                break
            batch = [train_set[i] for i in order[start:start + train_cfg.batch_size]]
            xs = [transform.for_clip(ex.clip, ex.path, aug_seed) for ex in batch]
            step += 1
            try:
                loss, grads = _batch_loss_and_grads(xs, [int(ex.label) for ex in batch],
                                                    params, model_cfg)
            except NumericError as exc:
                raise NumericError(f"step {step}: {exc}",
                                   select_best(candidates) if candidates else None) from exc
            lr = lr_at_step(step, train_cfg)
            opt.step(params, grads, lr)
            log.steps.append({"event": "step", "step": step, "epoch": epoch,
                              "loss": loss, "lr": lr})

        probs = predict_batched(dev_x, params, model_cfg)
        dev_loss = float(-np.log(np.maximum(probs[np.arange(len(dev_y)), dev_y], 1e-300)).mean())
        dev_acc = float((probs.argmax(1) == dev_y).mean())
        train_loss = float(np.mean([s["loss"] for s in log.steps if s["epoch"] == epoch]))
        log.epochs.append({"event": "epoch", "epoch": epoch, "step": step,
                           "train_loss": train_loss, "val_loss": dev_loss,
                           "val_accuracy": dev_acc})
        candidates.append(Checkpoint({k: v.copy() for k, v in params.items()},
                                     step=step, epoch=epoch, val_accuracy=dev_acc))
        if progress is not None:
            progress(log.epochs[-1])

    best = select_best(candidates)
    best.meta.update(model=asdict(model_cfg), train=asdict(train_cfg))
    return best, log
