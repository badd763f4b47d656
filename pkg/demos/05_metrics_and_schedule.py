"""Report formatting, macro averaging and the learning-rate schedule."""

from clipguard.metrics import confusion, report
from clipguard.train import TrainConfig, lr_at_step

truths = [0, 0, 1, 1, 2, 2]
preds = [0, 1, 1, 1, 2, 0]
rep = report(confusion(truths, preds), "toy")
print(rep.render())
print("per-class F1:", {k: round(v["f1"], 4) for k, v in rep.per_class.items()})

# Full-size schedule: 10% linear warmup, then linear decay to zero.
cfg = TrainConfig()
print(f"\nwarmup steps: {cfg.warmup_steps}")
for step in (0, 345, 690, 3000, 6905):
    print(f"lr({step}) = {lr_at_step(step, cfg):.3e}")
