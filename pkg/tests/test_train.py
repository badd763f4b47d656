from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from clipguard.checkpoint import Checkpoint
from clipguard.config import PipelineConfig
from clipguard.errors import ConfigError, DomainError
from clipguard.frame_store import synth_clip
from clipguard.model import init_params
from clipguard.train import (
    AdamW, LabeledClip, TrainConfig, TrainLog, fit, lr_at_step, select_best,
)

DESK = Path(__file__).resolve().parents[1] / "configs" / "desk.cfg"

FULL = TrainConfig()


def test_defaults():
    assert (FULL.learning_rate, FULL.batch_size, FULL.epochs) == (5e-5, 4, 9)
    assert (FULL.warmup_ratio, FULL.max_steps) == (0.1, 6905)
    assert FULL.warmup_steps == 690


def test_schedule_examples():
    assert lr_at_step(0, FULL) == 0.0
    assert lr_at_step(345, FULL) == 2.5e-5
    assert lr_at_step(690, FULL) == 5e-5
    assert lr_at_step(6905, FULL) == 0.0


def test_schedule_shape():
    lrs = np.array([lr_at_step(s, FULL) for s in range(FULL.max_steps + 1)])
    assert lrs.max() == 5e-5 and int(lrs.argmax()) == 690
    assert (np.diff(lrs[:691]) > 0).all() and (np.diff(lrs[690:]) < 0).all()
    # one-step jumps on either side of the peak match their own slopes
    assert lrs[690] - lrs[689] == pytest.approx(5e-5 / 690)
    assert lrs[690] - lrs[691] == pytest.approx(5e-5 / (6905 - 690))


def test_schedule_domain():
    with pytest.raises(DomainError):
        lr_at_step(6906, FULL)
    with pytest.raises(DomainError):
        lr_at_step(-1, FULL)


def test_schedule_edge_ratios():
    none = TrainConfig(warmup_ratio=0.0, max_steps=10)
    assert lr_at_step(0, none) == none.learning_rate and lr_at_step(10, none) == 0.0
    full = TrainConfig(warmup_ratio=1.0, max_steps=10)
    assert lr_at_step(10, full) == full.learning_rate


def test_config_validation():
    for bad in (dict(learning_rate=0), dict(warmup_ratio=1.5), dict(max_steps=0),
                dict(batch_size=0), dict(weight_decay=-1)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


def test_adamw_zero_gradient_is_noop(tiny_cfg):
    params = init_params(tiny_cfg, seed=1)
    before = {k: v.copy() for k, v in params.items()}
    opt = AdamW(params)
    for _ in range(3):
        opt.step(params, {k: np.zeros_like(v) for k, v in params.items()}, 1e-3)
    assert all(np.array_equal(params[k], before[k]) for k in params)


def test_adamw_first_step_moves_by_lr():
    # bias correction makes the first update lr * sign(g) up to eps
    p = {"w": np.array([1.0, -2.0, 0.5])}
    AdamW(p).step(p, {"w": np.array([0.3, -4.0, 1e-3])}, 0.1)
    np.testing.assert_allclose(p["w"], [0.9, -1.9, 0.4], atol=1e-5)


def test_adamw_decoupled_decay():
    p = {"w": np.array([2.0])}
    AdamW(p, weight_decay=0.5).step(p, {"w": np.zeros(1)}, 0.1)
    assert p["w"][0] == pytest.approx(2.0 * (1 - 0.05))


def test_select_best():
    cps = [Checkpoint({}, step=s, epoch=e, val_accuracy=a)
           for s, e, a in ((10, 1, 0.7), (20, 2, 0.9), (30, 3, 0.8))]
    assert select_best(cps).epoch == 2
    tie = [Checkpoint({}, step=10, epoch=1, val_accuracy=0.8),
           Checkpoint({}, step=20, epoch=2, val_accuracy=0.8)]
    assert select_best(tie).epoch == 1 and select_best(tie[::-1]).epoch == 1
    assert select_best(cps[:1]) is cps[0]
    with pytest.raises(DomainError):
        select_best([])


def _dataset(per_class, offset=0):
    out = []
    for label in range(4):
        for i in range(per_class):
            seed = 1000 * label + i + offset
            clip = synth_clip(label, seed, t=16 + seed % 17, h=36, w=48)
            out.append(LabeledClip(f"{label}/{i + offset}.fvt", clip, label))
    return out


@pytest.fixture(scope="module")
def small_run():
    cfg = PipelineConfig.from_file(DESK)
    cfg = replace(cfg, train=replace(cfg.train, epochs=3, max_steps=1000))
    train_set, dev_set = _dataset(10), _dataset(3, offset=500)
    a = fit(train_set, dev_set, cfg.model, cfg.train, cfg.transform("train"), cfg.global_seed)
    b = fit(train_set, dev_set, cfg.model, cfg.train, cfg.transform("train"), cfg.global_seed)
    return cfg, a, b


def test_fit_log_structure(small_run):
    cfg, (best, log), _ = small_run
    assert [s["step"] for s in log.steps] == list(range(1, 31))
    assert [e["epoch"] for e in log.epochs] == [1, 2, 3]
    for s in log.steps:
        assert s["lr"] == lr_at_step(s["step"], replace(cfg.train, max_steps=1000))


def test_fit_loss_decreases(small_run):
    _, (_, log), _ = small_run
    assert log.epochs[-1]["train_loss"] < log.epochs[0]["train_loss"]


def test_fit_returns_best_logged(small_run):
    _, (best, log), _ = small_run
    assert best.val_accuracy == max(e["val_accuracy"] for e in log.epochs)
    first = min(e["step"] for e in log.epochs if e["val_accuracy"] == best.val_accuracy)
    assert best.step == first
    assert best.meta["model"]["embed_dim"] == 32


def test_fit_deterministic(small_run):
    _, (best_a, log_a), (best_b, log_b) = small_run
    assert log_a == log_b
    assert all(best_a.params[k].tobytes() == best_b.params[k].tobytes() for k in best_a.params)


def test_log_jsonl_round_trip(small_run, tmp_path):
    _, (_, log), _ = small_run
    log.to_jsonl(tmp_path / "log.jsonl")
    assert TrainLog.from_jsonl(tmp_path / "log.jsonl") == log
    events = [r["event"] for r in log.records()]
    assert events.count("epoch") == 3 and events[-1] == "epoch"


def test_fit_respects_max_steps():
    cfg = PipelineConfig.from_file(DESK)
    tcfg = replace(cfg.train, epochs=5, max_steps=3)
    best, log = fit(_dataset(2), _dataset(1, 9), cfg.model, tcfg, cfg.transform("train"))
    assert len(log.steps) == 3 and log.steps[-1]["lr"] == 0.0
    # 8 clips at batch 4: two steps per epoch, the cap lands one step into epoch 2
    assert [(e["epoch"], e["step"]) for e in log.epochs] == [(1, 2), (2, 3)]


def test_fit_empty_split():
    cfg = PipelineConfig()
    with pytest.raises(ConfigError):
        fit([], _dataset(1), cfg.model, cfg.train, cfg.transform("train"))
    with pytest.raises(ConfigError):
        fit(_dataset(1), [], cfg.model, cfg.train, cfg.transform("train"))
