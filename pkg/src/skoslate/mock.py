"""Deterministic translators and LLM clients for offline runs and tests."""
from __future__ import annotations
import logging
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ErrorKind, ProviderError
from .llm import LlmClient
from .providers import BaseTranslator, ProviderDescriptor
from .utils import primary_subtag

log = logging.getLogger(__name__)

DictKey = Tuple[str, str, str]   # (source lang, target lang, source text)


class DictionaryTranslator(BaseTranslator):
    """Looks translations up in a fixed table; unknown terms are malformed responses."""

    def __init__(self, entries: Mapping[DictKey, str], provider_id: str = "mock_dict") -> None:
        self.provider_id = provider_id
        self.entries: Dict[DictKey, str] = {
            (primary_subtag(s), primary_subtag(t), text): out for (s, t, text), out in entries.items()
        }
        self.calls = 0

    @classmethod
    def from_pairs(cls, source: str, target: str, pairs: Mapping[str, str] | Iterable[Tuple[str, str]],
                   provider_id: str = "mock_dict") -> "DictionaryTranslator":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        return cls({(source, target, a): b for a, b in items}, provider_id)

    @classmethod
    def from_csv(cls, path, provider_id: str = "mock_dict") -> "DictionaryTranslator":
        """CSV with columns source_lang, target_lang, source, target."""
        import pandas as pd

        df = pd.read_csv(path, dtype=str, keep_default_na=False)
        missing = {"source_lang", "target_lang", "source", "target"} - set(df.columns)
        if missing:
            raise ValueError(f"dictionary {path} lacks column(s): {', '.join(sorted(missing))}")
        entries = {(r.source_lang, r.target_lang, r.source): r.target for r in df.itertuples(index=False)}
        return cls(entries, provider_id)

    def languages(self) -> Tuple[frozenset, frozenset]:
        return (frozenset(k[0] for k in self.entries), frozenset(k[1] for k in self.entries))

    def supports(self, source: str, target: str) -> bool:
        srcs, tgts = self.languages()
        return source in srcs and target in tgts

    def translate_text(self, text: str, source: str, target: str) -> str:
        self.calls += 1
        try:
            return self.entries[(source, target, text)]
        except KeyError:
            raise ProviderError(ErrorKind.MALFORMED_RESPONSE, self.provider_id,
                                f"no entry for {text!r} {source}->{target}") from None


class EchoTranslator(BaseTranslator):
    """Returns the input, optionally passed through `transform`."""

    def __init__(self, transform: Optional[Callable[[str], str]] = None) -> None:
        self.transform = transform
        self.calls = 0

    def translate_text(self, text: str, source: str, target: str) -> str:
        self.calls += 1
        return self.transform(text) if self.transform else text


class FailingTranslator(BaseTranslator):
    def __init__(self, kind: ErrorKind = ErrorKind.NETWORK, provider_id: str = "mock_fail",
                 fail_on: Optional[Callable[[str], bool]] = None,
                 fallback: Optional[BaseTranslator] = None) -> None:
        self.kind = ErrorKind(kind)
        self.provider_id = provider_id
        self.fail_on = fail_on
        self.fallback = fallback
        self.calls = 0

    def translate_text(self, text: str, source: str, target: str) -> str:
        self.calls += 1
        if self.fail_on is None or self.fail_on(text):
            raise ProviderError(self.kind, self.provider_id, f"injected failure for {text!r}")
        if self.fallback is None:
            return text
        return self.fallback.translate_text(text, source, target)


def mock_descriptor(provider_id: str, priority: int, *,
                    languages: Optional[Iterable[str]] = None,
                    pairs: Optional[Iterable[Tuple[str, str]]] = None) -> ProviderDescriptor:
    """Descriptor for a mock: any pair, a language set, or an explicit pair list."""
    if pairs is not None:
        allowed = frozenset((primary_subtag(a), primary_subtag(b)) for a, b in pairs)
        return ProviderDescriptor(provider_id, priority, lambda s, t: (s, t) in allowed)
    if languages is not None:
        langs = frozenset(primary_subtag(x) for x in languages)
        return ProviderDescriptor(provider_id, priority, lambda s, t: s != t and s in langs and t in langs)
    return ProviderDescriptor(provider_id, priority, lambda s, t: s != t)


Reply = Union[str, Exception]


class ScriptedLlm(LlmClient):
    """LLM client replaying canned replies.

    `script` is either a list consumed in order (the last reply repeats) or a
    callable `(instructions, user_input) -> reply`. A reply that is an
    exception instance is raised instead of returned.
    """

    def __init__(self, script: Union[Sequence[Reply], Callable[[str, str], Reply]]) -> None:
        self.script = script
        self.prompts: List[Tuple[str, str]] = []
        self._i = 0

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, instructions: str, user_input: str) -> str:
        self.prompts.append((instructions, user_input))
        if callable(self.script):
            reply = self.script(instructions, user_input)
        else:
            if not self.script:
                raise ProviderError(ErrorKind.MALFORMED_RESPONSE, "mock_llm", "empty script")
            reply = self.script[min(self._i, len(self.script) - 1)]
            self._i += 1
        if isinstance(reply, Exception):
            raise reply
        return reply
