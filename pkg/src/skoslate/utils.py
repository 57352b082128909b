from __future__ import annotations
import hashlib
import json
import re
import unicodedata
from pathlib import Path
from typing import Any

UNDETERMINED = "und"  # sentinel tag for plain literals

_LANG_TAG = re.compile(r"^[A-Za-z]{1,8}(?:-[A-Za-z0-9]{1,8})*$")
_WS = re.compile(r"\s+")

# display names used in prompts; unknown codes fall back to the code itself
LANGUAGE_NAMES = {
    "ar": "Arabic", "bg": "Bulgarian", "cs": "Czech", "da": "Danish", "de": "German",
    "el": "Greek", "en": "English", "es": "Spanish", "et": "Estonian", "fi": "Finnish",
    "fr": "French", "ga": "Irish", "hr": "Croatian", "hu": "Hungarian", "it": "Italian",
    "ja": "Japanese", "ko": "Korean", "la": "Latin", "lt": "Lithuanian", "lv": "Latvian",
    "nl": "Dutch", "no": "Norwegian", "pl": "Polish", "pt": "Portuguese", "ro": "Romanian",
    "ru": "Russian", "sk": "Slovak", "sl": "Slovenian", "sr": "Serbian", "sv": "Swedish",
    "tr": "Turkish", "uk": "Ukrainian", "zh": "Chinese",
}


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def stable_key(*parts: Any) -> str:
    """Hash of a JSON-encoded tuple; used for cache keys and blank-node ids."""
    return sha256_text(json.dumps(list(parts), ensure_ascii=False, separators=(",", ":")))


def ensure_dir(p: Path) -> None:
    p.mkdir(parents=True, exist_ok=True)


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def canonical(text: str) -> str:
    """Grouping form: NFC + trimmed. Case and diacritics stay significant."""
    return nfc(text).strip()


def fold(text: str) -> str:
    """Loose matching form: NFC, trimmed, casefolded."""
    return nfc(text).strip().casefold()


def is_lang_tag(tag: str) -> bool:
    return bool(tag) and bool(_LANG_TAG.match(tag))


def primary_subtag(tag: str | None) -> str:
    """'EN-GB' -> 'en'; None/'' -> 'und'."""
    if not tag:
        return UNDETERMINED
    return tag.split("-", 1)[0].lower()


def same_language(a: str | None, b: str | None) -> bool:
    return primary_subtag(a) == primary_subtag(b)


def language_name(code: str) -> str:
    return LANGUAGE_NAMES.get(primary_subtag(code), code)
