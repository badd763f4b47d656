"""Four-class clip manifests, duration statistics and stratified splitting.

Manifests are JSON Lines files, one clip per line::

    {"path": "safe/safe_0000.fvt", "label": "safe", "split": "train",
     "duration_s": 4.0, "fps": 8.0}
"""

import enum
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, replace
from fractions import Fraction

from .errors import ConfigError, DuplicateError, ManifestError
from .rng import RngStream

SPLITS = ("train", "dev", "test")


class Label(enum.IntEnum):
    SAFE = 0
    ADULT = 1
    HARMFUL = 2
    SUICIDE = 3

    @property
    def key(self):
        """Lowercase form used in manifest files."""
        return self.name.lower()

    @property
    def display(self):
        return self.name.capitalize()

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return cls(value)
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown label {value!r}") from None


@dataclass(frozen=True)
class ClipRecord:
    path: str
    label: Label
    split: str | None
    duration_s: float
    fps: float

    def __post_init__(self):
        if not self.path:
            raise ValueError("path must be non-empty")
        if not self.duration_s >= 0:
            raise ValueError(f"duration_s must be >= 0, got {self.duration_s}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    def to_json(self):
        d = asdict(self)
        d["label"] = self.label.key
        return d


class Manifest(tuple):
    """Immutable, ordered collection of ClipRecords."""

    def split(self, name):
        return Manifest(r for r in self if r.split == name)

    def by_label(self, label):
        label = Label.parse(label)
        return Manifest(r for r in self if r.label == label)


def _parse_record(obj, lineno):
    if not isinstance(obj, dict):
        raise ManifestError("record must be a JSON object", lineno)
    missing = [k for k in ("path", "label", "split", "duration_s", "fps") if k not in obj]
    if missing:
        raise ManifestError(f"missing field(s) {', '.join(missing)}", lineno)
    try:
        label = Label.parse(obj["label"])
    except ValueError:
        raise ManifestError(f"unknown label {obj['label']!r}", lineno) from None
    if obj["split"] not in SPLITS:
        raise ManifestError(f"unknown split {obj['split']!r}", lineno)
    try:
        return ClipRecord(
            path=str(obj["path"]),
            label=label,
            split=obj["split"],
            duration_s=float(obj["duration_s"]),
            fps=float(obj["fps"]),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(str(exc), lineno) from None


def load_manifest(source):
    """Parse a manifest from an iterable of lines, a path, or a text stream."""
    if hasattr(source, "__fspath__") or (isinstance(source, str) and "\n" not in source):
        with open(source, encoding="utf-8") as fh:
            return load_manifest(fh)
    if isinstance(source, str):
        source = source.splitlines()

    records, seen = [], {}
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON: {exc.msg}", lineno) from None
        rec = _parse_record(obj, lineno)
        if rec.path in seen:
            raise DuplicateError(
                f"duplicate path {rec.path!r} (first seen on line {seen[rec.path]})", lineno
            )
        seen[rec.path] = lineno
        records.append(rec)
    return Manifest(records)


def dump_manifest(records, destination):
    lines = "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records)
    if hasattr(destination, "write"):
        destination.write(lines)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(lines)


@dataclass(frozen=True)
class SplitStats:
    samples: int
    avg_duration_s: float
    total_duration_h: float

    @classmethod
    def of(cls, durations):
        durations = list(durations)
        total_s = math.fsum(durations)
        avg = total_s / len(durations) if durations else 0.0
        return cls(len(durations), avg, total_s / 3600.0)


@dataclass(frozen=True)
class DatasetStats:
    by_split: dict
    by_label: dict
    overall: SplitStats


def compute_stats(manifest):
    """Sample count, mean duration and total hours per split and per class."""
    per_split = defaultdict(list)
    per_label = defaultdict(list)
    for r in manifest:
        per_split[r.split].append(r.duration_s)
        per_label[r.label].append(r.duration_s)
    return DatasetStats(
        by_split={s: SplitStats.of(per_split[s]) for s in SPLITS},
        by_label={lab: SplitStats.of(per_label[lab]) for lab in Label},
        overall=SplitStats.of(r.duration_s for r in manifest),
    )


def largest_remainder(n, ratios):
    """Integer sizes summing to ``n`` that are proportional to ``ratios``.

    Floors of the exact quotas are topped up one by one in order of
    decreasing fractional part; ties go to the earlier ratio.
    """
    quotas = [Fraction(r).limit_denominator(10**9) * n for r in ratios]
    sizes = [math.floor(q) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def stratified_split(records, ratios=(0.7, 0.2, 0.1), seed=0):
    """Assign every record to train/dev/test, class by class.

    Within each class, records are shuffled with a SplitMix64 stream and cut
    into contiguous runs whose sizes come from :func:`largest_remainder`.
    Output keeps the input order of records.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLITS) or any(r <= 0 for r in ratios):
        raise ConfigError(f"need {len(SPLITS)} positive ratios, got {ratios}")
    if abs(math.fsum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {math.fsum(ratios)}")

    records = list(records)
    assignment = {}
    for label in Label:
        members = [i for i, r in enumerate(records) if r.label == label]
        RngStream(seed ^ (0x5A17 + int(label))).shuffle(members)
        sizes = largest_remainder(len(members), ratios)
        start = 0
        for split, size in zip(SPLITS, sizes):
            for i in members[start:start + size]:
                assignment[i] = split
            start += size
    return Manifest(replace(r, split=assignment[i]) for i, r in enumerate(records))
