"""Synthetic clips, the .fvt container, and how many frames each clip gets.

Run from the repository root:  python demos/01_clips_and_frames.py
"""

import io

from clipguard.dataset import Label
from clipguard.frame_store import fvt_size, read_fvt, synth_clip, write_fvt
from clipguard.sampling import SamplingConfig, activity_score, adaptive_frame_count, uniform_indices

# One clip per class. Each class has a distinct motion signature, which
# shows up directly in the activity score.
clips = {label: synth_clip(int(label), seed=3, t=24, h=36, w=48) for label in Label}
for label, vol in clips.items():
    print(f"{label.display:<8} shape={vol.frames.shape} activity={activity_score(vol):.4f}")

# The container is a 28-byte header followed by raw uint8 frames.
vol = clips[Label.HARMFUL]
buf = io.BytesIO()
write_fvt(vol, buf)
print(f"\n.fvt bytes: {len(buf.getvalue())} (expected {fvt_size(*vol.frames.shape[:3])})")
assert read_fvt(buf.getvalue()) == vol

# Longer and busier clips are sampled more densely, within [n_min, n_max].
cfg = SamplingConfig()
print("\nframes chosen for a 60 s clip:")
for a in (0.0, 0.5, 1.0):
    n = adaptive_frame_count(60.0, a, cfg)
    print(f"  activity {a:.1f} -> {n} frames")
print("uniform pick of 8 from 30:", list(uniform_indices(30, 8)))
