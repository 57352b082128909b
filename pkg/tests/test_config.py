from __future__ import annotations
import logging

import pytest

from skoslate.config import api_key_env, load_settings
from skoslate.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "skoslate.ini"
    path.write_text(text, encoding="utf-8")
    return path


def test_no_file_means_defaults():
    settings = load_settings(None)
    assert settings.get("pipeline", "threshold") is None
    assert settings.get_float("pipeline", "threshold", 0.6) == 0.6


def test_typed_values(tmp_path):
    settings = load_settings(write(tmp_path, """
[pipeline]
threshold = 0.8
min_translations = 4
providers = google, argos pons
mark_generated = yes
context =

[provider.google]
rate_limit = 2
endpoint = https://translation.example.org/v2
"""))
    assert settings.get_float("pipeline", "threshold") == 0.8
    assert settings.get_int("pipeline", "min_translations") == 4
    assert settings.get_list("pipeline", "providers") == ["google", "argos", "pons"]
    assert settings.get_bool("pipeline", "mark_generated") is True
    assert settings.get("pipeline", "context", "fallback") == "fallback"
    assert settings.provider("google") == {"rate_limit": "2", "endpoint": "https://translation.example.org/v2"}
    assert settings.provider("argos") == {}
    assert settings.provider_ids() == ["google"]


@pytest.mark.parametrize("text,getter", [
    ("[pipeline]\nthreshold = high\n", "get_float"),
    ("[pipeline]\nthreshold = 0.5.1\n", "get_float"),
    ("[pipeline]\nthreshold = 3.5\n", "get_int"),
    ("[pipeline]\nthreshold = maybe\n", "get_bool"),
])
def test_bad_values(tmp_path, text, getter):
    settings = load_settings(write(tmp_path, text))
    with pytest.raises(ConfigError, match="threshold"):
        getattr(settings, getter)("pipeline", "threshold")


def test_missing_or_broken_file(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "absent.ini")
    with pytest.raises(ConfigError):
        load_settings(write(tmp_path, "threshold = 0.6\n"))


def test_unknown_section_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING, logger="skoslate"):
        load_settings(write(tmp_path, "[pipeline]\n[pipelines]\nthreshold = 0.6\n"))
    assert "pipelines" in caplog.text


def test_api_key_env_names():
    assert api_key_env("google") == "SKOSLATE_GOOGLE_API_KEY"
    assert api_key_env("modernmt") == "SKOSLATE_MODERNMT_API_KEY"
