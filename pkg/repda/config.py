"""Run settings for repda.

A setting is looked up in the environment (``.env`` included), then in the
JSON settings file, then falls back to its default. Instance documents given
with ``--config`` are separate and read by ``load_document``.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()

REPDA_DIR = Path(os.getenv("REPDA_DIR", str(Path.home() / ".repda")))
CONFIG_FILE = Path(os.getenv("REPDA_CONFIG_FILE", str(REPDA_DIR / "config.json")))

DEFAULT_SEED = 20130101
DEFAULT_THREADS = 1
DEFAULT_OUT_DIR = "repda-out"
DEFAULT_FORMAT = "csv"
FORMATS = ("csv", "json")
TRUTHY = ("true", "1", "yes")


def _warn(message: str, style: str = "yellow"):
    from .display import console

    console.print(f"[{style}]{message}[/{style}]")


def ensure_repda_dir():
    """Create the settings directory if it is missing."""
    try:
        REPDA_DIR.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        _warn(f"Warning: Could not create directory {REPDA_DIR}: {e}")


def load_config() -> Dict[str, Any]:
    """Settings file contents, or ``{}`` when it is missing or unreadable."""
    if not CONFIG_FILE.exists():
        return {}
    try:
        with open(CONFIG_FILE) as f:
            settings = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        _warn(f"Warning: Could not load config file: {e}")
        return {}
    if not isinstance(settings, dict):
        _warn(f"Warning: {CONFIG_FILE} does not hold a JSON object, ignoring it")
        return {}
    return settings


def save_config(settings: Dict[str, Any]) -> bool:
    ensure_repda_dir()
    try:
        with open(CONFIG_FILE, "w") as f:
            json.dump(settings, f, indent=2, sort_keys=True)
    except OSError as e:
        _warn(f"Error saving config file: {e}", "red")
        return False
    return True


def get_setting(key: str, default: str = "") -> str:
    """Environment variable, then settings file, then ``default``."""
    from_env = os.getenv(key)
    if from_env:
        return from_env
    settings = load_config()
    if key in settings:
        return str(settings[key])
    return default


def _int_setting(key: str, default: int) -> int:
    raw = get_setting(key, str(default))
    try:
        return int(raw)
    except ValueError:
        _warn(f"Warning: {key}={raw!r} is not an integer, using {default}")
        return default


def _format_setting() -> str:
    value = get_setting("REPDA_FORMAT", DEFAULT_FORMAT).lower()
    return value if value in FORMATS else DEFAULT_FORMAT


def reload_config():
    """Re-read every setting into the module-level values."""
    global SEED, THREADS, OUT_DIR, FORMAT, VERBOSE
    SEED = _int_setting("REPDA_SEED", DEFAULT_SEED)
    THREADS = max(1, _int_setting("REPDA_THREADS", DEFAULT_THREADS))
    OUT_DIR = Path(get_setting("REPDA_OUT_DIR", DEFAULT_OUT_DIR))
    FORMAT = _format_setting()
    VERBOSE = get_setting("REPDA_VERBOSE").lower() in TRUTHY


def load_document(path: Path) -> dict:
    """Read a JSON instance document passed with ``--config``."""
    from .errors import ConfigError

    try:
        with open(path) as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from None
    if not isinstance(document, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return document


SEED: int
THREADS: int
OUT_DIR: Path
FORMAT: str
VERBOSE: bool
reload_config()
