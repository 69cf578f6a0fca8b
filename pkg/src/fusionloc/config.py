"""Run configuration: one INI file with [world], [dataset], [model] and [train] sections.

Values are written ``key = value``; tuples are comma separated. Set
abstraction layers go in ``sa1``, ``sa2``, ... as ``points radius samples
w1,w2,...``. Unknown keys are rejected so typos do not pass silently.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .data.io import SET01_SPECS, SequenceSpec, default_sequence_specs
from .data.world import WorldConfig
from .errors import ConfigError
from .models.image_branch import ImageBranchConfig
from .models.network import ModelConfig
from .models.point_branch import PointBranchConfig, SetAbstractionParams
from .training import TrainConfig

SEED_ENV = "FUSIONLOC_SEED"


@dataclass
class DatasetConfig:
    set_id: str = "set-01"
    # "set01" reproduces the reference ten-sequence layout; "uniform" uses the counts below
    layout: str = "set01"
    n_train: int = 5
    n_eval: int = 2
    length: int = 200

    def __post_init__(self):
        if self.layout not in ("set01", "uniform"):
            raise ConfigError(f"dataset layout must be 'set01' or 'uniform', got {self.layout!r}")
        if self.layout == "uniform" and (self.n_train < 1 or self.n_eval < 0 or self.length < 1):
            raise ConfigError("uniform layout needs n_train >= 1, n_eval >= 0, length >= 1")

    def specs(self) -> list[SequenceSpec]:
        if self.layout == "set01":
            return list(SET01_SPECS)
        return default_sequence_specs(self.n_train, self.n_eval, self.length)


@dataclass
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


def _parse_scalar(text: str, like):
    text = text.strip()
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def _parse(text: str, default):
    if isinstance(default, tuple):
        parts = [p for p in text.replace(" ", "").split(",") if p]
        like = default[0] if default else 0.0
        return tuple(_parse_scalar(p, like) for p in parts)
    if default is None:
        low = text.strip().lower()
        if low in ("", "none"):
            return None
        try:
            return int(text)
        except ValueError:
            return text.strip()
    return _parse_scalar(text, default)


def _fields(cls):
    obj = cls()
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(cls) if not f.name.startswith("_")}


def _section(cp, name, cls, renames=None, skip=()):
    renames = renames or {}
    defaults = _fields(cls)
    out = {}
    if not cp.has_section(name):
        return out
    for key, raw in cp.items(name):
        if key in skip:
            continue
        attr = renames.get(key, key)
        if attr not in defaults:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            out[attr] = _parse(raw, defaults[attr])
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    return out


# model section keys that live on the branch configs
_IMAGE_KEYS = {"d_i": "d_I", "backbone_layers": "layers", "backbone_widths": "widths", "pretrained": "pretrained",
               "dropout_p": "dropout_p", "dropout": "dropout"}
_POINT_KEYS = {"d_p": "d_P", "n_points": "n_points", "point_batch_norm": "batch_norm"}


def _parse_sa(text: str) -> SetAbstractionParams:
    try:
        pts, radius, samples, widths = text.split()
        return SetAbstractionParams(int(pts), float(radius), int(samples), tuple(int(w) for w in widths.split(",")))
    except ValueError:
        raise ConfigError(f"[model] set abstraction must be 'points radius samples w1,w2,..', got {text!r}") from None


def _model_from(cp) -> ModelConfig:
    if not cp.has_section("model"):
        return ModelConfig()
    image, point, top = {}, {}, {}
    sa = []
    strict = True
    img_defaults, pt_defaults, top_defaults = _fields(ImageBranchConfig), _fields(PointBranchConfig), _fields(ModelConfig)
    for key, raw in cp.items("model"):
        try:
            if key in _IMAGE_KEYS:
                attr = _IMAGE_KEYS[key]
                image[attr] = _parse(raw, img_defaults[attr])
            elif key in _POINT_KEYS:
                attr = _POINT_KEYS[key]
                point[attr] = _parse(raw, pt_defaults[attr])
            elif key.startswith("sa") and key[2:].isdigit():
                sa.append((int(key[2:]), _parse_sa(raw)))
            elif key == "strict_dims":
                strict = _parse_scalar(raw, True)
            elif key in ("kind", "n_heads", "n_layers", "norm_kind", "crop_size"):
                top[key] = _parse(raw, top_defaults[key])
            else:
                raise ConfigError(f"[model] unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"[model] {key}: {exc}") from None
    if sa:
        point["sa"] = tuple(p for _, p in sorted(sa))
    return ModelConfig(
        image=ImageBranchConfig(strict_dims=strict, **image),
        point=PointBranchConfig(strict_dims=strict, **point),
        **top,
    )


def load_config(path=None, text: str | None = None, env=None) -> RunConfig:
    """Parse a config file (or ``text``). ``FUSIONLOC_SEED`` overrides both seeds."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    if text is not None:
        cp.read_string(text)
    elif path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cp.read_string(p.read_text(encoding="utf-8"), source=str(p))
    for sec in cp.sections():
        if sec not in ("world", "dataset", "model", "train"):
            raise ConfigError(f"unknown config section [{sec}]")
    world = _section(cp, "world", WorldConfig)
    train = _section(cp, "train", TrainConfig)
    env = os.environ if env is None else env
    if env.get(SEED_ENV, "").strip():
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
        world["seed"] = seed
        train["seed"] = seed
    return RunConfig(
        world=WorldConfig(**world),
        dataset=DatasetConfig(**_section(cp, "dataset", DatasetConfig)),
        model=_model_from(cp),
        train=TrainConfig(**train),
    )


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """Full config as INI text; ``load_config(text=dump_config(c))`` rebuilds ``c``."""
    lines = ["[world]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in dataclasses.asdict(cfg.world).items()]
    lines += ["", "[dataset]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in dataclasses.asdict(cfg.dataset).items()]
    m = cfg.model
    lines += ["", "[model]"]
    for k in ("kind", "n_heads", "n_layers", "norm_kind", "crop_size"):
        lines.append(f"{k} = {_fmt(getattr(m, k))}")
    for key, attr in _IMAGE_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(m.image, attr))}")
    for key, attr in _POINT_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(m.point, attr))}")
    lines.append(f"strict_dims = {_fmt(m.image.strict_dims and m.point.strict_dims)}")
    for i, p in enumerate(m.point.sa, 1):
        lines.append(f"sa{i} = {p.point_num} {p.radius!r} {p.sample_num} {','.join(map(str, p.mlp_widths))}")
    lines += ["", "[train]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in dataclasses.asdict(cfg.train).items()]
    return "\n".join(lines) + "\n"
