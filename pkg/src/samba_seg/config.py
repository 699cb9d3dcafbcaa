"""Run configuration files: ``[section]`` headers and ``key = value`` lines.

Every section maps onto a dataclass and every key must be one of its fields.
Overrides use the dotted ``section.key`` form of the file.
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .data.augment import AugmentationConfig
from .data.manifest import IGNORE_INDEX
from .decoder import DecoderConfig
from .encoder import SambaConfig
from .errors import ConfigError
from .optim import TrainConfig


@dataclass
class DataConfig:
    root: str = "data"
    train_split: str = "train"
    val_split: str = "val"
    exclude_classes: tuple[int, ...] = ()
    ignore_index: int = IGNORE_INDEX


@dataclass
class EvalConfig:
    tile: int = 512
    stride: int = 512


@dataclass
class OutputConfig:
    dir: str = "runs/default"


SECTIONS: dict[str, type] = {
    "model": SambaConfig,
    "decoder": DecoderConfig,
    "augment": AugmentationConfig,
    "train": TrainConfig,
    "data": DataConfig,
    "eval": EvalConfig,
    "output": OutputConfig,
}


def _parse_value(raw: str, kind, where: str):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind in (int, float, str):
            return kind(raw)
        if typing.get_origin(kind) is tuple:
            item = typing.get_args(kind)[0]
            return tuple(item(p.strip()) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    raise ConfigError(f"{where}: unsupported field type {kind}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _field_types(cls) -> dict[str, object]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if f.init}


@dataclass
class RunConfig:
    model: SambaConfig = field(default_factory=SambaConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_text(self) -> str:
        lines = []
        for name in SECTIONS:
            section = getattr(self, name)
            lines.append(f"[{name}]")
            for key in _field_types(type(section)):
                lines.append(f"{key} = {_format_value(getattr(section, key))}")
            lines.append("")
        return "\n".join(lines)


def _build(values: dict[str, dict[str, str]]) -> RunConfig:
    sections = {}
    for name, cls in SECTIONS.items():
        types = _field_types(cls)
        kwargs = {}
        for key, raw in values.get(name, {}).items():
            if key not in types:
                raise ConfigError(f"unknown config key '{name}.{key}'")
            kwargs[key] = _parse_value(raw, types[key], f"{name}.{key}")
        try:
            sections[name] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {exc}") from None
    return RunConfig(**sections)


def _read_sections(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown config section '[{name}]'")
        out[name] = dict(parser.items(name))
    return out


def parse_config(text: str, overrides: dict[str, str] | None = None, source: str = "<config>") -> RunConfig:
    """Parse config text, then apply ``{"section.key": value}`` overrides."""
    values = _read_sections(text, source)
    for dotted, raw in (overrides or {}).items():
        name, sep, key = dotted.partition(".")
        if not sep or name not in SECTIONS:
            raise ConfigError(f"unknown config key '{dotted}'")
        values.setdefault(name, {})[key] = raw
    return _build(values)


def load_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read a config file. Relative data and output paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text, overrides, source=str(path))
    base = path.resolve().parent
    cfg.data.root = str((base / cfg.data.root).resolve())
    cfg.output.dir = str((base / cfg.output.dir).resolve())
    return cfg
