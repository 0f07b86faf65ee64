"""YAML run configuration: environment interpolation, path anchoring and
key=value overrides layered on top of the file."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import yaml

from .dataset import BIRD_JSON, SPIDER_JSON
from .errors import ConfigError
from .executor import DEFAULT_TIMEOUT
from .llmclient import ModelEndpointConfig
from .pipeline import RunConfig, TEXT2SQL

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

_TOP_LEVEL_KEYS = {
    "task",
    "template",
    "data",
    "data_format",
    "db_root",
    "cache_dir",
    "output",
    "prior_record",
    "with_fk",
    "parallelism",
    "rounds",
    "strategy",
    "mode",
    "variant",
    "method",
    "timeout",
    "model",
    "debugger_model",
    "evaluator_model",
}

_MODEL_KEYS = {
    "base_url",
    "model_name",
    "temperature",
    "max_tokens",
    "request_timeout",
    "max_retries",
    "auth_token_env",
}


@dataclass(frozen=True)
class AppConfig:
    """Everything the CLI needs to drive one run."""

    run: RunConfig
    data_path: Path | None
    db_root: Path | None
    data_format: str = BIRD_JSON
    cache_dir: Path | None = None
    output_path: Path | None = None
    prior_record: Path | None = None


def _interpolate(value):
    if isinstance(value, str):

        def sub(match):
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name} is not set")
            return os.environ[name]

        return _ENV_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply `key=value` pairs after the file; dotted keys reach into maps."""
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            parsed = yaml.safe_load(value) if value != "" else ""
        except yaml.YAMLError:
            parsed = value
        target = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-mapping value")
            target = node
        target[parts[-1]] = parsed
    return raw


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")


def _endpoint(raw, where: str) -> ModelEndpointConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping")
    _check_keys(raw, _MODEL_KEYS, where)
    if not raw.get("base_url"):
        raise ConfigError(f"{where}.base_url is required")
    if not raw.get("model_name"):
        raise ConfigError(f"{where}.model_name is required")
    kwargs = {
        "base_url": str(raw["base_url"]),
        "model_name": str(raw["model_name"]),
    }
    for key, cast in (
        ("temperature", float),
        ("max_tokens", int),
        ("request_timeout", float),
        ("max_retries", int),
        ("auth_token_env", str),
    ):
        if key in raw:
            try:
                kwargs[key] = cast(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}.{key}: {exc}") from exc
    return ModelEndpointConfig(**kwargs)


def _path(raw, base: Path) -> Path | None:
    if raw is None:
        return None
    p = Path(str(raw))
    return p if p.is_absolute() else base / p


def load_config(path: str | Path, overrides=()) -> AppConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    raw = _interpolate(raw)
    raw = apply_overrides(raw, overrides)
    _check_keys(raw, _TOP_LEVEL_KEYS, "config")

    base = path.parent
    data_format = raw.get("data_format", BIRD_JSON)
    if data_format not in (BIRD_JSON, SPIDER_JSON):
        raise ConfigError(f"unknown data_format {data_format!r}")

    run_kwargs = {
        "task": raw.get("task", TEXT2SQL),
        "model": _endpoint(raw.get("model"), "model"),
        "debugger_model": _endpoint(raw.get("debugger_model"), "debugger_model"),
        "evaluator_model": _endpoint(raw.get("evaluator_model"), "evaluator_model"),
    }
    for key, cast in (
        ("template", str),
        ("rounds", int),
        ("strategy", str),
        ("mode", str),
        ("variant", str),
        ("method", str),
        ("with_fk", bool),
        ("parallelism", int),
        ("timeout", float),
    ):
        if key in raw:
            try:
                run_kwargs[key] = cast(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key}: {exc}") from exc
    if "timeout" not in run_kwargs:
        run_kwargs["timeout"] = DEFAULT_TIMEOUT

    return AppConfig(
        run=RunConfig(**run_kwargs),
        data_path=_path(raw.get("data"), base),
        db_root=_path(raw.get("db_root"), base),
        data_format=data_format,
        cache_dir=_path(raw.get("cache_dir"), base),
        output_path=_path(raw.get("output"), base),
        prior_record=_path(raw.get("prior_record"), base),
    )
