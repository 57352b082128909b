"""
HTTP adapters for the recommended translation services, plus registry wiring.

Each adapter only knows its endpoint, auth header and JSON shape; status codes
and transport failures are mapped to `ProviderError` kinds in one place
(`post_json`) so that retries and rate limiting stay in the
registry. Keys come from `SKOSLATE_<ID>_API_KEY`.
"""
from __future__ import annotations
import logging
import os
from importlib import resources
from typing import Any, Callable, Dict, Optional, Tuple, Type

import requests

from .cache import TranslationCache
from .config import Settings, api_key_env
from .errors import ErrorKind, ProviderError
from .mock import DictionaryTranslator, EchoTranslator
from .providers import (
    DEFAULT_MAX_INFLIGHT,
    DEFAULT_PRIORITY,
    DEFAULT_RATE_LIMIT,
    DEFAULT_TIMEOUT,
    BaseTranslator,
    ProviderDescriptor,
    ProviderRegistry,
    RetryPolicy,
    language_set_pairs,
)

log = logging.getLogger(__name__)

_EU = (
    "bg cs da de el en es et fi fr ga hr hu it la lt lv nl pl pt ro ru sk sl sr sv tr uk"
).split()
_WIDE = _EU + "ar ja ko no zh".split()


def _retry_after(resp: requests.Response) -> Optional[float]:
    value = resp.headers.get("Retry-After")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


def post_json(session: requests.Session, url: str, provider_id: str, *, timeout: float,
              json: Any = None, data: Any = None, params: Optional[Dict[str, str]] = None,
              headers: Optional[Dict[str, str]] = None) -> Any:
    """POST and decode JSON, mapping every failure to a ProviderError kind."""
    try:
        resp = session.post(url, json=json, data=data, params=params, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        # connection refused, DNS, timeouts
        raise ProviderError(ErrorKind.NETWORK, provider_id, str(exc)) from exc

    if resp.status_code == 429:
        raise ProviderError(ErrorKind.RATE_LIMITED, provider_id, "HTTP 429", retry_after=_retry_after(resp))
    if resp.status_code in (401, 403):
        raise ProviderError(ErrorKind.AUTH, provider_id, f"HTTP {resp.status_code}")
    if resp.status_code >= 500:
        raise ProviderError(ErrorKind.NETWORK, provider_id, f"HTTP {resp.status_code}")
    if resp.status_code >= 400:
        raise ProviderError(ErrorKind.MALFORMED_RESPONSE, provider_id,
                            f"HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProviderError(ErrorKind.MALFORMED_RESPONSE, provider_id, "response is not JSON") from exc


class HttpTranslator(BaseTranslator):
    provider_id = "http"
    endpoint = ""
    requires_key = True
    languages: Tuple[str, ...] = tuple(_WIDE)

    def __init__(self, endpoint: Optional[str] = None, timeout: float = DEFAULT_TIMEOUT,
                 session: Optional[requests.Session] = None) -> None:
        self.endpoint = endpoint or self.endpoint
        self.timeout = timeout
        self.session = session or requests.Session()

    @property
    def api_key(self) -> Optional[str]:
        return os.environ.get(api_key_env(self.provider_id))

    def _key_or_fail(self) -> str:
        key = self.api_key
        if self.requires_key and not key:
            raise ProviderError(ErrorKind.AUTH, self.provider_id,
                                f"set {api_key_env(self.provider_id)}")
        return key or ""

    def _post(self, **kwargs: Any) -> Any:
        return post_json(self.session, self.endpoint, self.provider_id, timeout=self.timeout, **kwargs)

    def _extract(self, payload: Any, getter: Callable[[Any], Any]) -> str:
        try:
            value = getter(payload)
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(ErrorKind.MALFORMED_RESPONSE, self.provider_id,
                                f"unexpected payload: {str(payload)[:200]}") from exc
        if not isinstance(value, str):
            raise ProviderError(ErrorKind.MALFORMED_RESPONSE, self.provider_id, "translation is not a string")
        return value

    def supports(self, source: str, target: str) -> bool:
        return source != target and source in self.languages and target in self.languages


class GoogleTranslator(HttpTranslator):
    provider_id = "google"
    endpoint = "https://translation.googleapis.com/language/translate/v2"

    def translate_text(self, text: str, source: str, target: str) -> str:
        key = self._key_or_fail()
        payload = self._post(params={"key": key},
                             json={"q": text, "source": source, "target": target, "format": "text"})
        return self._extract(payload, lambda p: p["data"]["translations"][0]["translatedText"])


class MicrosoftTranslator(HttpTranslator):
    provider_id = "microsoft"
    endpoint = "https://api.cognitive.microsofttranslator.com/translate"

    def translate_text(self, text: str, source: str, target: str) -> str:
        key = self._key_or_fail()
        headers = {"Ocp-Apim-Subscription-Key": key, "Content-Type": "application/json"}
        region = os.environ.get("SKOSLATE_MICROSOFT_REGION")
        if region:
            headers["Ocp-Apim-Subscription-Region"] = region
        payload = self._post(params={"api-version": "3.0", "from": source, "to": target},
                             json=[{"Text": text}], headers=headers)
        return self._extract(payload, lambda p: p[0]["translations"][0]["text"])


class LingvanexTranslator(HttpTranslator):
    provider_id = "lingvanex"
    endpoint = "https://api-b2b.backenster.com/b1/api/v3/translate"

    def translate_text(self, text: str, source: str, target: str) -> str:
        key = self._key_or_fail()
        payload = self._post(json={"from": source, "to": target, "data": text, "platform": "api"},
                             headers={"Authorization": f"Bearer {key}"})
        return self._extract(payload, lambda p: p["result"])


class ModernMtTranslator(HttpTranslator):
    provider_id = "modernmt"
    endpoint = "https://api.modernmt.com/translate"

    def translate_text(self, text: str, source: str, target: str) -> str:
        key = self._key_or_fail()
        payload = self._post(json={"source": source, "target": target, "q": text},
                             headers={"MMT-ApiKey": key})
        return self._extract(payload, lambda p: p["data"]["translation"])


class YandexTranslator(HttpTranslator):
    provider_id = "yandex"
    endpoint = "https://translate.api.cloud.yandex.net/translate/v2/translate"

    def translate_text(self, text: str, source: str, target: str) -> str:
        key = self._key_or_fail()
        body: Dict[str, Any] = {"sourceLanguageCode": source, "targetLanguageCode": target, "texts": [text]}
        folder = os.environ.get("SKOSLATE_YANDEX_FOLDER_ID")
        if folder:
            body["folderId"] = folder
        payload = self._post(json=body, headers={"Authorization": f"Api-Key {key}"})
        return self._extract(payload, lambda p: p["translations"][0]["text"])


class ArgosTranslator(HttpTranslator):
    """Argos via a self-hosted LibreTranslate server; no key unless the server wants one."""

    provider_id = "argos"
    endpoint = "http://localhost:5000/translate"
    requires_key = False

    def translate_text(self, text: str, source: str, target: str) -> str:
        body = {"q": text, "source": source, "target": target, "format": "text"}
        if self.api_key:
            body["api_key"] = self.api_key
        payload = self._post(json=body)
        return self._extract(payload, lambda p: p["translatedText"])


# Reverso speaks ISO 639-2 codes
_ISO3 = {
    "ar": "ara", "de": "ger", "en": "eng", "es": "spa", "fr": "fra", "it": "ita", "ja": "jpn",
    "nl": "dut", "pl": "pol", "pt": "por", "ro": "rum", "ru": "rus", "sv": "swe", "tr": "tur",
    "uk": "ukr", "zh": "chi",
}


class ReversoTranslator(HttpTranslator):
    provider_id = "reverso"
    endpoint = "https://api.reverso.net/translate/v1/translation"
    requires_key = False
    languages = tuple(_ISO3)

    def translate_text(self, text: str, source: str, target: str) -> str:
        body = {"format": "text", "from": _ISO3[source], "to": _ISO3[target], "input": text,
                "options": {"sentenceSplitter": False, "origin": "translation.web"}}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = self._post(json=body, headers=headers)
        return self._extract(payload, lambda p: p["translation"][0])


class PonsTranslator(HttpTranslator):
    provider_id = "pons"
    endpoint = "https://api.pons.com/text-translation-web/v4/translate"
    # no Latin or Serbian
    languages = tuple(x for x in _WIDE if x not in ("la", "sr"))

    def translate_text(self, text: str, source: str, target: str) -> str:
        key = self._key_or_fail()
        payload = self._post(json={"text": text, "sourceLanguage": source, "targetLanguage": target},
                             headers={"X-Secret": key})
        return self._extract(payload, lambda p: p["text"])


SERVICES: Dict[str, Type[HttpTranslator]] = {
    cls.provider_id: cls
    for cls in (LingvanexTranslator, GoogleTranslator, ModernMtTranslator, MicrosoftTranslator,
                YandexTranslator, ArgosTranslator, ReversoTranslator, PonsTranslator)
}

MOCK_IDS = ("mock_dict", "mock_echo")


def default_dictionary() -> DictionaryTranslator:
    ref = resources.files("skoslate") / "data" / "tadirah_en_de.csv"
    with resources.as_file(ref) as path:
        return DictionaryTranslator.from_csv(path, "mock_dict")


def _provider_retry(settings: Settings, provider_id: str, default: RetryPolicy) -> Optional[RetryPolicy]:
    """`[provider.<id>] max_retries/backoff`, each falling back to the pipeline policy."""
    section = f"provider.{provider_id}"
    n = settings.get_int(section, "max_retries")
    backoff = settings.get_float(section, "backoff")
    if n is None and backoff is None:
        return None
    return RetryPolicy(max_retries=default.max_retries if n is None else n,
                       backoff=default.backoff if backoff is None else backoff,
                       sleep=default.sleep)


def build_registry(settings: Optional[Settings] = None, *, cache: Optional[TranslationCache] = None,
                   max_inflight: int = DEFAULT_MAX_INFLIGHT,
                   session: Optional[requests.Session] = None) -> ProviderRegistry:
    """Registry with the eight services (ranked by the recommended order) and the mocks."""
    settings = settings or Settings()
    retry = RetryPolicy(max_retries=settings.get_int("pipeline", "max_retries", 3),
                        backoff=settings.get_float("pipeline", "backoff", 1.0))
    registry = ProviderRegistry(cache=cache, retry=retry, max_inflight=max_inflight)

    for rank, pid in enumerate(DEFAULT_PRIORITY, start=1):
        cls = SERVICES[pid]
        section = f"provider.{pid}"
        adapter = cls(endpoint=settings.get(section, "endpoint"),
                      timeout=settings.get_float(section, "timeout", DEFAULT_TIMEOUT),
                      session=session)
        desc = ProviderDescriptor(pid, rank, language_set_pairs(adapter.languages), cls.requires_key)
        registry.register(desc, adapter,
                          rate_limit=settings.get_float(section, "rate_limit", DEFAULT_RATE_LIMIT),
                          retry=_provider_retry(settings, pid, retry))

    rank = len(DEFAULT_PRIORITY)
    dict_path = settings.get("provider.mock_dict", "dictionary")
    dictionary = (DictionaryTranslator.from_csv(dict_path, "mock_dict") if dict_path
                  else default_dictionary())
    # mocks are unthrottled unless the config says otherwise
    registry.register(ProviderDescriptor("mock_dict", rank + 1, lambda s, t: dictionary.supports(s, t)),
                      dictionary, rate_limit=settings.get_float("provider.mock_dict", "rate_limit"),
                      retry=_provider_retry(settings, "mock_dict", retry))
    registry.register(ProviderDescriptor("mock_echo", rank + 2, lambda s, t: s != t),
                      EchoTranslator(), rate_limit=settings.get_float("provider.mock_echo", "rate_limit"),
                      retry=_provider_retry(settings, "mock_echo", retry))

    for pid in settings.provider_ids():
        if pid not in registry:
            log.warning("Config section [provider.%s] does not match a known provider", pid)
    return registry
