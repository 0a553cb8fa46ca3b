# semicon/models/config_io.py
# Line-oriented "section.key = value" config files.
# - '#' starts a comment, blank lines are ignored
# - unknown keys and unparsable values are errors (no silent typos)
# - write_config() emits every field, so a run is reproducible from the file

from __future__ import annotations

import dataclasses
import typing
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Tuple

from semicon.errors import ConfigError
from .settings import RunConfig

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}

_SECTIONS = ("stage", "icon", "model", "train", "data")


def _field_types(cls: type) -> Dict[str, Any]:
    return typing.get_type_hints(cls)


def _parse_value(raw: str, kind: Any, where: str) -> Any:
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if isinstance(kind, type) and issubclass(kind, Enum):
            for member in kind:
                if raw == member.value or raw.upper() == member.name:
                    return member
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    raise ConfigError(f"{where}: unsupported field type {kind!r}")


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in _SECTIONS}
    top: Dict[str, Any] = {}
    top_types = _field_types(RunConfig)

    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        where = f"line {lineno} ({key})"
        if "." in key:
            section, name = key.split(".", 1)
            if section not in sections:
                raise ConfigError(f"{where}: unknown section {section!r}")
            types = _field_types(type(getattr(cfg, section)))
            if name not in types:
                raise ConfigError(f"{where}: unknown key")
            sections[section][name] = _parse_value(raw, types[name], where)
        else:
            if key not in top_types or key in _SECTIONS:
                raise ConfigError(f"{where}: unknown key")
            top[key] = _parse_value(raw, top_types[key], where)

    updates = {name: dataclasses.replace(getattr(cfg, name), **vals) for name, vals in sections.items() if vals}
    cfg = dataclasses.replace(cfg, **updates, **top)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def config_items(cfg: RunConfig) -> Tuple[Tuple[str, str], ...]:
    items = []
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            items.append((f"{section}.{f.name}", _format_value(getattr(obj, f.name))))
    for f in dataclasses.fields(cfg):
        if f.name not in _SECTIONS:
            items.append((f.name, _format_value(getattr(cfg, f.name))))
    return tuple(items)


def write_config(cfg: RunConfig, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {value}" for key, value in config_items(cfg)]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p
