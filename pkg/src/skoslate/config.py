"""
INI configuration for skoslate.

    [pipeline]   target_lang, format, prop, threshold, min_translations, providers, ...
    [translate]  out, out_format, report
    [llm]        model, endpoint, temperature, max_retries, timeout, ...
    [evaluate]   strip_lang, measures, report, plot, bpemb_dir, ...
    [cache]      path, enabled
    [cli]        log, quiet, verbose
    [provider.<id>]  endpoint, rate_limit, timeout, max_retries, backoff (dictionary for mock_dict)

Command-line flags win over file values, which win over built-in defaults.
API keys are never read from here; see `api_key_env`.
"""
from __future__ import annotations
import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import ConfigError

log = logging.getLogger(__name__)

KNOWN_SECTIONS = ("pipeline", "translate", "llm", "evaluate", "cache", "cli")
PROVIDER_PREFIX = "provider."

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def api_key_env(provider_id: str) -> str:
    return f"SKOSLATE_{provider_id.upper()}_API_KEY"


@dataclass
class Settings:
    parser: configparser.ConfigParser = field(default_factory=configparser.ConfigParser)
    path: Optional[Path] = None

    def get(self, section: str, key: str, fallback: Any = None) -> Any:
        if not self.parser.has_option(section, key):
            return fallback
        value = self.parser.get(section, key).strip()
        return value if value != "" else fallback

    def get_float(self, section: str, key: str, fallback: Optional[float] = None) -> Optional[float]:
        raw = self.get(section, key)
        if raw is None:
            return fallback
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from None

    def get_int(self, section: str, key: str, fallback: Optional[int] = None) -> Optional[int]:
        raw = self.get(section, key)
        if raw is None:
            return fallback
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from None

    def get_bool(self, section: str, key: str, fallback: Optional[bool] = None) -> Optional[bool]:
        raw = self.get(section, key)
        if raw is None:
            return fallback
        if raw.lower() in _TRUE:
            return True
        if raw.lower() in _FALSE:
            return False
        raise ConfigError(f"[{section}] {key} must be true/false, got {raw!r}")

    def get_list(self, section: str, key: str, fallback: Optional[List[str]] = None) -> Optional[List[str]]:
        raw = self.get(section, key)
        if raw is None:
            return fallback
        return [p for p in raw.replace(",", " ").split() if p]

    def provider(self, provider_id: str) -> Dict[str, str]:
        name = PROVIDER_PREFIX + provider_id
        if not self.parser.has_section(name):
            return {}
        return {k: v.strip() for k, v in self.parser.items(name)}

    def provider_ids(self) -> List[str]:
        return [s[len(PROVIDER_PREFIX):] for s in self.parser.sections() if s.startswith(PROVIDER_PREFIX)]


def load_settings(path: Optional[Path | str] = None) -> Settings:
    """Read an INI file; `None` yields empty settings (all defaults)."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is None:
        return Settings(parser)
    path = Path(path).expanduser()
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    for section in parser.sections():
        if section not in KNOWN_SECTIONS and not section.startswith(PROVIDER_PREFIX):
            log.warning("Ignoring unknown config section [%s] in %s", section, path)
    return Settings(parser, path)
