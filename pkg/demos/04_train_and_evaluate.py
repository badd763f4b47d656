"""End to end on synthetic data: generate, train, evaluate, flag one clip.

Drives the same code paths as the ``clipguard`` command. Takes a few
seconds on a laptop CPU.
"""

import sys
import tempfile
from pathlib import Path

from clipguard.cli import main

cfg = "configs/desk.cfg"
with tempfile.TemporaryDirectory() as tmp:
    data, ckpt = Path(tmp) / "data", Path(tmp) / "model.ntc"
    steps = [
        ["--config", cfg, "synth", data, "--per-class", 50],
        ["stats", data / "manifest.jsonl"],
        ["--config", cfg, "train", "--manifest", data / "manifest.jsonl", "--out", ckpt],
        ["eval", ckpt, data / "manifest.jsonl", "--split", "test"],
        ["flag", ckpt, data / "suicide" / "suicide_0000.fvt"],
    ]
    for argv in steps:
        print(f"\n$ clipguard {' '.join(str(a) for a in argv)}")
        code = main([str(a) for a in argv])
        if code not in (0, 1):
            sys.exit(code)
        if argv[0] == "flag":
            print(f"(exit code {code}: {'flagged' if code else 'not flagged'})")
