"""Flat ``key = value`` pipeline configuration shared by every CLI command.

Example::

    # desk-scale run
    global_seed = 7
    n_min = 4
    norm_mean = 0.485, 0.456, 0.406
    learning_rate = 1e-3

Unknown keys and ill-typed values are rejected before any work starts.
"""

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .model import ModelConfig
from .preprocess import AugmentConfig, NormalizationParams, build_pipeline
from .sampling import SamplingConfig
from .train import TrainConfig

# Defaults sized for the small CPU model; full-scale values remain the
# defaults of the individual config dataclasses.
DESK_SAMPLING = SamplingConfig(n_min=4, n_max=8, seconds_per_frame_base=0.5, activity_weight=1.0)
DESK_AUGMENT = AugmentConfig(short_side_min=32, short_side_max=40, target_h=32, target_w=32,
                             eval_frames=8)

_SECTIONS = {
    "sampling": ("n_min", "n_max", "seconds_per_frame_base", "activity_weight"),
    "augment": ("flip_probability", "short_side_min", "short_side_max", "target_h",
                "target_w", "eval_frames"),
    "norm": ("norm_mean", "norm_std"),
    "model": tuple(f.name for f in fields(ModelConfig)),
    "train": tuple(f.name for f in fields(TrainConfig) if f.name != "seed"),
}
_KEY_SECTION = {k: s for s, keys in _SECTIONS.items() for k in keys}


@dataclass(frozen=True)
class PipelineConfig:
    sampling: SamplingConfig = DESK_SAMPLING
    augment: AugmentConfig = DESK_AUGMENT
    norm: NormalizationParams = field(default_factory=NormalizationParams)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    global_seed: int = 0

    def __post_init__(self):
        m, a, s = self.model, self.augment, self.sampling
        if (a.target_h, a.target_w) != (m.image_size, m.image_size):
            raise ConfigError(f"crop target {a.target_h}x{a.target_w} must equal "
                              f"image_size {m.image_size}")
        if s.n_max > m.frames:
            raise ConfigError(f"n_max {s.n_max} exceeds model frames {m.frames}")
        if a.eval_frames > m.frames:
            raise ConfigError(f"eval_frames {a.eval_frames} exceeds model frames {m.frames}")
        if self.train.seed != self.global_seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.global_seed))

    def transform(self, mode="train"):
        return build_pipeline(replace(self.augment, mode=mode), self.norm, self.sampling)

    def to_flat(self):
        out = {"global_seed": self.global_seed}
        for section, keys in _SECTIONS.items():
            obj = getattr(self, section)
            for key in keys:
                attr = key[len("norm_"):] if section == "norm" else key
                value = getattr(obj, attr)
                out[key] = list(value) if isinstance(value, tuple) else value
        return out

    def to_text(self):
        lines = []
        for key, value in self.to_flat().items():
            if isinstance(value, list):
                value = ", ".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_flat(cls, values):
        sections = {s: {} for s in _SECTIONS}
        seed = 0
        for key, value in values.items():
            if key == "global_seed":
                seed = _coerce(key, value, int)
                continue
            if key not in _KEY_SECTION:
                raise ConfigError(f"unknown config key {key!r}")
            section = _KEY_SECTION[key]
            if section == "norm":
                sections["norm"][key[len("norm_"):]] = _coerce(key, value, tuple)
            else:
                target = {"sampling": SamplingConfig, "augment": AugmentConfig,
                          "model": ModelConfig, "train": TrainConfig}[section]
                kind = {f.name: f.type for f in fields(target)}[key]
                sections[section][key] = _coerce(key, value, kind)
        try:
            return cls(
                sampling=replace(DESK_SAMPLING, **sections["sampling"]),
                augment=replace(DESK_AUGMENT, **sections["augment"]),
                norm=NormalizationParams(**sections["norm"]),
                model=ModelConfig(**sections["model"]),
                train=TrainConfig(**sections["train"]),
                global_seed=seed,
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = value
        return cls.from_flat(values)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _coerce(key, value, kind):
    kind = {"int": int, "float": float, "str": str, "tuple": tuple}.get(kind, kind)
    try:
        if kind is tuple:
            if isinstance(value, str):
                value = [v for v in value.replace("(", "").replace(")", "").split(",") if v.strip()]
            return tuple(float(v) for v in value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            if isinstance(value, str) and not value.strip().lstrip("+-").isdigit():
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None
