"""Plain-text ``key = value`` configuration shared by every CLI command.

One flat namespace covers run, sampler, importance, model, embedder and
synthetic-corpus settings.  Lines starting with ``#`` are comments.  Unknown
keys are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import fields, replace
from pathlib import Path
from typing import Any

from lts.backbone import ModelConfig
from lts.hin import EmbedderSpec, SyntheticSpec
from lts.trainer import RunConfig


class ConfigError(ValueError):
    pass


_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"model", "embedder"}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"seed"}
_SYNTH_KEYS = {f.name for f in fields(SyntheticSpec)} - {"seed"}
_EMBED_KEYS = {"embedder": "kind", "embed_seed": "seed", "embed_path": "path", "embed_dim": "dimension"}
_EXTRA_KEYS = {"corpus", "out_dir"}

KNOWN_KEYS = _RUN_KEYS | _MODEL_KEYS | _SYNTH_KEYS | set(_EMBED_KEYS) | _EXTRA_KEYS


def _coerce(key: str, raw: str, default: Any):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(s.strip() for s in text.split(",") if s.strip())
        if default is None:
            if text.lower() in ("", "none", "null"):
                return None
            try:
                return int(text)
            except ValueError:
                return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return text


def _default_for(key: str):
    for cls, keys in ((RunConfig, _RUN_KEYS), (ModelConfig, _MODEL_KEYS), (SyntheticSpec, _SYNTH_KEYS)):
        if key in keys:
            f = next(f for f in fields(cls) if f.name == key)
            return f.default
    if key in _EMBED_KEYS:
        return getattr(EmbedderSpec(), _EMBED_KEYS[key])
    return None


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[lts]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for key, raw in parser.items("lts"):
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        values[key] = _coerce(key, raw, _default_for(key))
    return values


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    values = parse_config(text, str(path))
    # relative corpus / out_dir paths are taken relative to the config file
    for key in ("corpus", "out_dir", "embed_path"):
        if isinstance(values.get(key), str) and not Path(values[key]).is_absolute():
            values[key] = str(path.parent / values[key])
    return values


def run_config(values: dict[str, Any]) -> RunConfig:
    model = ModelConfig(**{k: v for k, v in values.items() if k in _MODEL_KEYS},
                        **({"seed": values["seed"]} if "seed" in values else {}))
    embed = EmbedderSpec(**{_EMBED_KEYS[k]: v for k, v in values.items() if k in _EMBED_KEYS})
    run_vals = {k: v for k, v in values.items() if k in _RUN_KEYS}
    try:
        return RunConfig(model=model, embedder=embed, **run_vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def synthetic_spec(values: dict[str, Any]) -> SyntheticSpec:
    vals = {k: v for k, v in values.items() if k in _SYNTH_KEYS}
    if "seed" in values:
        vals["seed"] = values["seed"]
    return replace(SyntheticSpec(), **vals)
