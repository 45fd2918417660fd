#!/usr/bin/env python3
"""
config_manager.py

Loading of run configuration: flat `key = value` files with `#` comments,
task presets shipped in configs/, and environment settings read through
python-dotenv.

License: GPL-3.0
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from dotenv import load_dotenv

from libs.errors import ConfigurationError

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).parent.parent / "configs"
_TRUE = {"true", "yes", "on"}
_FALSE = {"false", "no", "off"}


def load_environment(env_file: Optional[Union[str, Path]] = None) -> None:
    """
    Load a .env file (project root by default) into the process environment.
    Variables already set are not overridden.
    """
    path = Path(env_file) if env_file else Path(__file__).parent.parent / ".env"
    if path.exists():
        load_dotenv(path, override=False)
        logger.debug("loaded environment from %s", path)


def env_log_level(default: str = "INFO") -> str:
    return os.environ.get("DWDT_LOG_LEVEL", default).upper()


def env_threads(default: int = 1) -> int:
    raw = os.environ.get("DWDT_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.error("DWDT_THREADS must be an integer, got %r", raw)
        raise ConfigurationError(f"DWDT_THREADS must be an integer, got {raw!r}")
    return max(1, value)


def parse_value(text: str) -> Any:
    """Interpret a config value as bool, int, float or string, in that order."""
    lowered = text.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    if lowered in {"none", "null", ""}:
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config_text(text: str, source: str = "<string>",
                      allowed: Optional[Iterable[str]] = None) -> Dict[str, Any]:
    """
    Parse `key = value` lines.

    Args:
        text: file contents.
        source: name used in diagnostics.
        allowed: when given, keys outside this set are rejected.

    Returns:
        dict: parsed values in file order.

    Raises:
        ConfigurationError: malformed line, duplicate or unknown key.
    """
    allowed_set = set(allowed) if allowed is not None else None
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{number}: missing key")
        if allowed_set is not None and key not in allowed_set:
            raise ConfigurationError(f"{source}:{number}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"{source}:{number}: duplicate key {key!r}")
        values[key] = parse_value(value)
    return values


def load_config_file(path: Union[str, Path], allowed: Optional[Iterable[str]] = None) -> Dict[str, Any]:
    """Read and parse a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        logger.error("config file not found: %s", path)
        raise
    return parse_config_text(text, str(path), allowed)


def preset_path(name: str) -> Path:
    return PRESET_DIR / f"{name}.cfg"


def available_presets() -> Dict[str, Path]:
    if not PRESET_DIR.exists():
        return {}
    return {p.stem: p for p in sorted(PRESET_DIR.glob("*.cfg"))}


def load_preset(name: str, allowed: Optional[Iterable[str]] = None) -> Dict[str, Any]:
    """
    Values of the preset configs/<name>.cfg.

    Raises:
        ConfigurationError: no such preset.
    """
    path = preset_path(name)
    if not path.exists():
        logger.error("no preset named %s in %s", name, PRESET_DIR)
        raise ConfigurationError(f"no preset named {name!r} (available: {sorted(available_presets())})")
    return load_config_file(path, allowed)


def format_config(values: Dict[str, Any]) -> str:
    """Render values back to `key = value` text, floats with 17 significant digits."""
    lines = []
    for key, value in values.items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = f"{value:.17g}"
        elif value is None:
            text = "none"
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
