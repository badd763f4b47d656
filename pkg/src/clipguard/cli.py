"""``clipguard`` command line: stats, synth, train, eval, flag.

Exit codes: 0 success (or clip not flagged), 1 clip flagged, 2 usage /
config / data error, 3 numeric failure during training or inference.
"""

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PipelineConfig
from .dataset import (SPLITS, ClipRecord, Label, compute_stats, dump_manifest, load_manifest,
                      stratified_split)
from .errors import ClipGuardError, NumericError
from .frame_store import load_clip, synth_clip, write_fvt
from .metrics import confusion, read_predictions, report, score_predictions, write_predictions
from .model import check_params
from .moderation import moderate
from .rng import derive_seed
from .train import LabeledClip, fit, predict_batched

EXIT_OK, EXIT_FLAGGED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ClipGuardError):
    pass


def _load_config(args):
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = replace(cfg, global_seed=args.seed)
    return cfg


def _resolve(manifest_path, record):
    p = Path(record.path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def _read_manifest(path):
    try:
        return load_manifest(Path(path))
    except FileNotFoundError:
        raise UsageError(f"manifest not found: {path}") from None


def _load_split(manifest_path, manifest, split):
    out = []
    for rec in manifest.split(split):
        clip = load_clip(_resolve(manifest_path, rec), fps=rec.fps)
        out.append(LabeledClip(rec.path, clip, int(rec.label)))
    return out


def format_stats(stats):
    """Pipe tables: one block per split, one per class."""
    def block(title, rows):
        lines = [f"| {title:<7} | Samples | Avg Duration (s) | Total Duration (h) |",
                 "|---------|---------|------------------|--------------------|"]
        for name, s in rows:
            lines.append(f"| {name:<7} | {s.samples:>7} | {s.avg_duration_s:>16.2f} "
                         f"| {s.total_duration_h:>18.2f} |")
        return "\n".join(lines)

    splits = [(s.capitalize(), stats.by_split[s]) for s in SPLITS]
    labels = [(lab.display, stats.by_label[lab]) for lab in Label]
    return block("Subset", splits) + "\n\n" + block("Class", labels)


def cmd_stats(args):
    manifest = _read_manifest(args.manifest)
    print(format_stats(compute_stats(manifest)))
    return EXIT_OK


def cmd_synth(args):
    cfg = _load_config(args)
    seed = cfg.global_seed
    if args.per_class < 1:
        raise UsageError("--per-class must be >= 1")
    if not args.min_frames <= args.max_frames:
        raise UsageError("--min-frames must not exceed --max-frames")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc.strerror}") from None

    records = []
    for label in Label:
        (out / label.key).mkdir(exist_ok=True)
        for i in range(args.per_class):
            clip_seed = derive_seed(seed, int(label), i)
            span = args.max_frames - args.min_frames + 1
            t = args.min_frames + int(clip_seed % span)
            vol = synth_clip(int(label), clip_seed, t=t, h=args.height, w=args.width, fps=args.fps)
            rel = f"{label.key}/{label.key}_{i:04d}.fvt"
            write_fvt(vol, out / rel)
            records.append(ClipRecord(rel, label, None, vol.duration_s, vol.fps))
    manifest = stratified_split(records, (0.7, 0.2, 0.1), seed=seed)
    dump_manifest(manifest, out / "manifest.jsonl")
    print(f"wrote {len(manifest)} clips and {out / 'manifest.jsonl'}")
    return EXIT_OK


def cmd_train(args):
    cfg = _load_config(args)
    manifest = _read_manifest(args.manifest)
    for split in ("train", "dev"):
        if not manifest.split(split):
            raise UsageError(f"manifest has no {split!r} records")
    train_set = _load_split(args.manifest, manifest, "train")
    dev_set = _load_split(args.manifest, manifest, "dev")

    def progress(ep):
        if not args.quiet:
            print(f"epoch {ep['epoch']}: step {ep['step']} train_loss {ep['train_loss']:.4f} "
                  f"val_loss {ep['val_loss']:.4f} val_acc {ep['val_accuracy']:.4f}", flush=True)

    t0 = time.perf_counter()
    try:
        best, log = fit(train_set, dev_set, cfg.model, cfg.train, cfg.transform("train"),
                        global_seed=cfg.global_seed, progress=progress)
    except NumericError as exc:
        if exc.checkpoint is not None:
            exc.checkpoint.meta["pipeline"] = cfg.to_flat()
            save_checkpoint(exc.checkpoint, args.out)
            print(f"saved last good checkpoint (epoch {exc.checkpoint.epoch}) to {args.out}",
                  file=sys.stderr)
        raise
    best.meta["pipeline"] = cfg.to_flat()
    save_checkpoint(best, args.out)
    log_path = Path(args.log) if args.log else Path(args.out).with_suffix(".log.jsonl")
    log.to_jsonl(log_path)

    probs = predict_batched([cfg.transform("eval")(ex.clip) for ex in dev_set], best.params, cfg.model)
    rep = report(confusion([ex.label for ex in dev_set], probs.argmax(1)), "dev")
    print(f"best epoch {best.epoch} (step {best.step}), {time.perf_counter() - t0:.1f}s")
    print(rep.render())
    return EXIT_OK


def _checkpoint_config(ckpt):
    if "pipeline" not in ckpt.meta:
        raise UsageError("checkpoint carries no pipeline config")
    cfg = PipelineConfig.from_flat(ckpt.meta["pipeline"])
    check_params(ckpt.params, cfg.model)
    return cfg


def _read_checkpoint(path):
    try:
        return load_checkpoint(path)
    except FileNotFoundError:
        raise UsageError(f"checkpoint not found: {path}") from None


def cmd_eval(args):
    if args.predictions:
        rep = score_predictions(read_predictions(Path(args.predictions)), args.name or "external")
    else:
        if not (args.checkpoint and args.manifest):
            raise UsageError("eval needs CHECKPOINT and MANIFEST, or --predictions")
        ckpt = _read_checkpoint(args.checkpoint)
        cfg = _checkpoint_config(ckpt)
        manifest = _read_manifest(args.manifest)
        clips = _load_split(args.manifest, manifest, args.split)
        if not clips:
            raise UsageError(f"split {args.split!r} has no records")
        transform = cfg.transform("eval")
        probs = predict_batched([transform(ex.clip) for ex in clips], ckpt.params, cfg.model)
        preds = probs.argmax(1)
        rep = report(confusion([ex.label for ex in clips], preds), args.name or "clipguard")
        if args.predictions_out:
            write_predictions([{"path": ex.path, "true_label": ex.label, "predicted_label": int(p),
                                "probabilities": pr} for ex, p, pr in zip(clips, preds, probs)],
                              args.predictions_out)
    print(rep.render())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(rep.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_flag(args):
    ckpt = _read_checkpoint(args.checkpoint)
    cfg = _checkpoint_config(ckpt)
    try:
        clip = load_clip(args.clip, fps=args.fps)
    except OSError as exc:
        raise UsageError(f"cannot read clip {args.clip}: {exc.strerror or exc}") from None
    x = cfg.transform("eval")(clip)
    probs = predict_batched([x], ckpt.params, cfg.model)[0]
    verdict = moderate(probs, args.threshold)
    print(json.dumps(verdict.to_json()))
    return EXIT_FLAGGED if verdict.flagged else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="clipguard", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="pipeline config file (key = value lines)")
    parser.add_argument("--seed", type=int, help="override global_seed")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-split and per-class duration tables")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write a synthetic four-class clip set and manifest")
    p.add_argument("out_dir")
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--min-frames", type=int, default=16)
    p.add_argument("--max-frames", type=int, default=48)
    p.add_argument("--height", type=int, default=36)
    p.add_argument("--width", type=int, default=48)
    p.add_argument("--fps", type=float, default=8.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fine-tune and keep the best dev checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.ntc)")
    p.add_argument("--log", help="train log path (JSON Lines)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a split, or an external prediction file")
    p.add_argument("checkpoint", nargs="?")
    p.add_argument("manifest", nargs="?")
    p.add_argument("--split", default="test", choices=SPLITS)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--predictions", help="score this prediction JSON Lines file instead")
    p.add_argument("--predictions-out", help="write per-clip predictions here")
    p.add_argument("--name", help="model name shown in the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("flag", help="moderation verdict for one clip")
    p.add_argument("checkpoint")
    p.add_argument("clip", help=".fvt file or image-sequence directory")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--fps", type=float, help="frame rate for image-sequence directories")
    p.set_defaults(func=cmd_flag)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"clipguard: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ClipGuardError, OSError) as exc:
        print(f"clipguard: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
