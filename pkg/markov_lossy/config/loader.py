import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, get_origin

from pydantic import BaseModel, ValidationError

from ..exceptions import ConfigError
from .models import Config, EncoderConfig, ExperimentConfig, SourceConfig

logger = logging.getLogger(__name__)

SECTIONS: Dict[str, type[BaseModel]] = {
    "encoder": EncoderConfig,
    "source": SourceConfig,
    "experiment": ExperimentConfig,
}


def _route(key: str) -> tuple[str, str]:
    """Map 'section.field' or a bare field name to (section, field)"""
    if "." in key:
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in SECTIONS[section].model_fields:
            raise ConfigError(f"unknown config key {key!r}")
        return section, name
    for section, model in SECTIONS.items():
        if key in model.model_fields:
            return section, key
    raise ConfigError(f"unknown config key {key!r}")


def _coerce(section: str, name: str, value: Any) -> Any:
    """Wrap a scalar given for a list field"""
    annotation = SECTIONS[section].model_fields[name].annotation
    if get_origin(annotation) is list and not isinstance(value, list):
        return [value]
    return value


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [item.strip() for item in text.split(",") if item.strip()]
    return text


def parse_flat_config(text: str) -> Dict[str, Dict[str, Any]]:
    """
    Parse the flat key=value format into nested sections

    Blank lines and '#' comments are ignored. Keys are 'section.field' or a bare
    field name; values are JSON literals, comma-separated lists or plain strings.
    """
    nested: Dict[str, Dict[str, Any]] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key=value, got {raw_line!r}")
        key, _, value = line.partition("=")
        section, name = _route(key.strip())
        parsed = _parse_value(value.strip())
        nested.setdefault(section, {})[name] = _coerce(section, name, parsed)
    return nested


def _read_file(path: Path) -> Dict[str, Dict[str, Any]]:
    text = path.read_text()
    if path.suffix != ".json":
        return parse_flat_config(text)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    nested: Dict[str, Dict[str, Any]] = {}
    for key, value in raw.items():
        if key in SECTIONS and isinstance(value, dict):
            nested.setdefault(key, {}).update(value)
        else:
            section, name = _route(key)
            nested.setdefault(section, {})[name] = value
    return nested


def load_config(
    data_dir: Path | str = "data",
    config_path: Path | str | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> Config:
    """
    Load configuration with precedence overrides > config file > defaults

    Args:
        data_dir: Directory holding config.json and the results database
        config_path: Config file; JSON when the suffix is .json, flat key=value otherwise.
            Defaults to data_dir/config.json, which may be absent.
        overrides: Flag values keyed like the flat format; None values are skipped
    """
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    if config_path is None:
        resolved_config_path = data_dir / "config.json"
        nested = _read_file(resolved_config_path) if resolved_config_path.exists() else {}
    else:
        nested = _read_file(Path(config_path))

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, name = _route(key)
        nested.setdefault(section, {})[name] = _coerce(section, name, value)

    try:
        sections = {name: model(**nested.get(name, {})) for name, model in SECTIONS.items()}
        config = Config(data_dir=data_dir, **sections)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e

    logger.debug(f"loaded config: {config.model_dump_json()}")
    return config
