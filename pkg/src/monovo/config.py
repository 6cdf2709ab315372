"""Pipeline configuration as flat TOML: one section per module, key = value.

Every field has a default, so an empty file (or none) yields the stock
configuration. ``dump_config`` writes every key, which makes a dumped file a
complete, diffable snapshot suitable for run manifests.
"""
from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

import tomli_w

from .core import RansacConfig
from .errors import ParseError
from .pipeline import PipelineConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Section name -> PipelineConfig attribute holding that sub-config.
SECTIONS = ("frontend", "essential", "homography", "scale_ransac", "scale", "pnp", "lm")
PIPELINE_SECTION = "pipeline"
# RANSAC seeds are derived per frame from the master seed, so the
# sub-config seed fields are not user-facing.
_HIDDEN = {"seed"}


def _fields(obj):
    hidden = _HIDDEN if isinstance(obj, RansacConfig) else set()
    return [f for f in dataclasses.fields(obj) if f.name not in hidden]


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = {}
    for name in SECTIONS:
        sub = getattr(cfg, name)
        out[name] = {f.name: _plain(getattr(sub, f.name)) for f in _fields(sub)}
    out[PIPELINE_SECTION] = {
        f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name not in SECTIONS
    }
    return out


def _coerce(value, default, where: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ParseError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or len(value) != len(default):
            raise ParseError(f"{where}: expected a list of {len(default)} values")
        return tuple(_coerce(v, d, where) for v, d in zip(value, default))
    return value


def _update(obj, values: dict, section: str):
    known = {f.name: getattr(obj, f.name) for f in _fields(obj)}
    changes = {}
    for key, value in values.items():
        if key not in known:
            raise ParseError(f"unknown key [{section}].{key}")
        changes[key] = _coerce(value, known[key], f"[{section}].{key}")
    try:
        return dataclasses.replace(obj, **changes)
    except ValueError as exc:
        raise ParseError(f"[{section}]: {exc}") from None


def config_from_dict(data: dict, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    changes = {}
    for section, values in data.items():
        if not isinstance(values, dict):
            raise ParseError(f"top-level key {section!r} must be a [section]")
        if section in SECTIONS:
            changes[section] = _update(getattr(base, section), values, section)
        elif section == PIPELINE_SECTION:
            top = {f.name: getattr(base, f.name) for f in dataclasses.fields(base) if f.name not in SECTIONS}
            for key, value in values.items():
                if key not in top:
                    raise ParseError(f"unknown key [{section}].{key}")
                changes[key] = _coerce(value, top[key], f"[{section}].{key}")
        else:
            raise ParseError(f"unknown section [{section}]")
    return dataclasses.replace(base, **changes)


def parse_config(text: str, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"config: {exc}") from None
    return config_from_dict(data, base)


def load_config(path, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    return parse_config(Path(path).read_text(), base)


def dump_config(cfg: PipelineConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
