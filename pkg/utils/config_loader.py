"""Plain key=value config files and environment settings."""

import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from models.config import TrainConfig
from .exceptions import ConfigError

# Load environment variables
load_dotenv()

PathLike = Union[str, Path]


def parse_key_value_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped.

    Raises:
        ConfigError: malformed line or a key given twice
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{number}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key '{key}'")
        values[key] = value
    return values


def parse_key_value_file(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_key_value_text(path.read_text(encoding="utf-8"), source=str(path))


def _nest(flat: Mapping[str, Any], model: Type[BaseModel]) -> Dict[str, Any]:
    """Turn dotted keys into nested dicts, rejecting names the model does not define."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        field = model.model_fields.get(head)
        if field is None:
            raise ConfigError(f"unknown config key '{key}'")
        if rest:
            sub_model = field.annotation
            if not (isinstance(sub_model, type) and issubclass(sub_model, BaseModel)):
                raise ConfigError(f"config key '{key}': '{head}' has no sub-keys")
            nested.setdefault(head, {}).update(_nest({rest: value}, sub_model))
        else:
            nested[head] = value
    return nested


def build_train_config(values: Mapping[str, Any], base: Optional[TrainConfig] = None) -> TrainConfig:
    """Validate flat (dotted) values layered over ``base``."""
    merged = (base or TrainConfig()).model_dump()
    for head, value in _nest(values, TrainConfig).items():
        if isinstance(value, dict):
            merged[head].update(value)
        else:
            merged[head] = value
    try:
        return TrainConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(f"invalid training config: {exc}") from exc


def load_train_config(path: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None) -> TrainConfig:
    """
    Training config from an optional key=value file plus explicit overrides.

    Overrides (e.g. CLI flags) win over file values; both win over defaults.
    """
    values: Dict[str, Any] = dict(parse_key_value_file(path)) if path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_train_config(values)


def dump_key_value(config: BaseModel, prefix: str = "") -> str:
    """Inverse of the loader: one dotted ``key=value`` line per scalar field."""
    lines = []
    for name, value in config:
        key = prefix + name
        if isinstance(value, BaseModel):
            lines.append(dump_key_value(value, key + "."))
        elif value is not None:
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={value}")
    return "\n".join(line for line in lines if line)


def default_seed() -> int:
    raw = os.getenv("COLLAGAN_DEFAULT_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"COLLAGAN_DEFAULT_SEED must be an integer, got '{raw}'") from exc
