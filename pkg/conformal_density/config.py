"""Config files: loading, schema validation and flag overrides.

Configs are TOML or JSON (chosen by suffix). Each is validated with a
Draft 7 JSON Schema shipped in ``conformal_density/schemas``. Every object in
those schemas sets ``additionalProperties: false``, so unknown keys are
errors. Shipped experiment configs in ``conformal_density/configs`` can be
referred to by bare name (``table1``).
"""

from __future__ import annotations

import copy
import json
import os
import tomllib
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from jsonschema import Draft7Validator

from conformal_density.errors import ConfigError

PACKAGE_DIR = Path(__file__).resolve().parent
SCHEMA_DIR = PACKAGE_DIR / "schemas"
CONFIG_DIR = PACKAGE_DIR / "configs"

RUN_SCHEMA = "run.schema.json"
EXPERIMENT_SCHEMA = "experiment.schema.json"
THREADS_ENV = "CONFORMAL_DENSITY_THREADS"


def load_config_file(path: Path | str) -> dict[str, Any]:
    """Parse a TOML or JSON config file into a dict."""
    p = Path(path)
    try:
        if p.suffix == ".toml":
            with open(p, "rb") as f:
                return tomllib.load(f)
        if p.suffix == ".json":
            with open(p, encoding="utf-8") as f:
                data = json.load(f)
            if not isinstance(data, dict):
                raise ConfigError(f"{p}: top level must be an object")
            return data
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: invalid TOML - {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON - {e}") from e
    raise ConfigError(f"{p}: unsupported config format (expected .toml or .json)")


def shipped_configs() -> list[str]:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.toml"))


def resolve_config_path(name_or_path: str) -> Path:
    """A path on disk, or the name of a shipped config."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    shipped = CONFIG_DIR / f"{name_or_path}.toml"
    if shipped.is_file():
        return shipped
    raise ConfigError(
        f"Config {name_or_path!r} not found; shipped configs: {', '.join(shipped_configs())}"
    )


def load_schema(name: str) -> dict[str, Any]:
    with open(SCHEMA_DIR / name, encoding="utf-8") as f:
        return json.load(f)  # type: ignore[no-any-return]


def _key_path(parts: Any) -> str:
    joined = ".".join(str(p) for p in parts)
    return joined or "<root>"


def validate_config(data: Mapping[str, Any], schema_name: str) -> None:
    """Raise ``ConfigError`` listing every schema violation with its key path."""
    validator = Draft7Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        lines = [f"{_key_path(e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError("Config validation failed:\n  " + "\n  ".join(lines))


def merge_overrides(data: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Apply dotted-key overrides (``"experiment.seed": 7``); ``None`` values are skipped."""
    merged = copy.deepcopy(dict(data))
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = merged
        *parents, leaf = dotted.split(".")
        for key in parents:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Cannot override {dotted}: {key} is not a table")
            node = child
        node[leaf] = value
    return merged


def load_experiment_config(
    name_or_path: str, overrides: Mapping[str, Any] | None = None
) -> tuple[dict[str, Any], Path]:
    """Load, merge flag overrides into, and validate an experiment config."""
    path = resolve_config_path(name_or_path)
    data = merge_overrides(load_config_file(path), overrides or {})
    validate_config(data, EXPERIMENT_SCHEMA)
    return data, path


def load_run_config(path: Path | str | None, overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Load an optional run config; flags win over file values."""
    data = load_config_file(path) if path is not None else {}
    merged = merge_overrides(data, overrides)
    validate_config(merged, RUN_SCHEMA)
    return merged


def default_threads(environ: Mapping[str, str] | None = None) -> int:
    env = os.environ if environ is None else environ
    raw = env.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value
