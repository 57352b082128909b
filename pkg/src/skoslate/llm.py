"""
LLM refinement of low-confidence terms.

Two stages per term, both zero-shot:

1. translate each source label with context; a result is only trusted when it
   matches one of the primary candidates (case-insensitive, NFC, trimmed),
   in which case the primary's surface form is kept;
2. otherwise ask the model to pick one option from primary candidates plus
   its own translations.

Anything that goes wrong ends in the frequency fallback, never in an abort.
"""
from __future__ import annotations
import logging
import os
import re
import threading
from abc import ABC, abstractmethod
from contextlib import nullcontext
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .consensus import fallback_pick, largest_group_for, group_candidates
from .errors import ConfigError, EmptyCandidates, ErrorKind, ProviderError, TooFewCandidates
from .providers import RetryPolicy, TranslationCandidate, call_with_retries
from .utils import LANGUAGE_NAMES, collapse_ws, fold, language_name

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gemini-2.0-flash"
DEFAULT_ENDPOINT = "https://generativelanguage.googleapis.com/v1beta/openai/chat/completions"

TRANSLATION_INSTRUCTIONS = (
    "You are a machine translation system that translates a term from {source} to {target}. "
    "Use the additional details provided to determine the correct context. "
    "Return only the translated term and nothing else."
)

SELECTION_INSTRUCTIONS = (
    "You are a professional translation review system that assesses translations of a single "
    "term that was given in one or more source languages. The candidate translations were produced "
    "by translation systems. Give me the best fitting translation out of the given list, where:\n"
    "- the best fitting translation is one of the given possible translations;\n"
    "- in the current context, no other possible translation has a different meaning.\n"
    "Return exactly one translation from the list, spelled as listed, and nothing else."
)

MAX_ANSWER_WORDS = 8


@dataclass
class LlmConfig:
    model_id: str = DEFAULT_MODEL
    temperature: float = 0.0
    endpoint: str = DEFAULT_ENDPOINT
    max_retries: int = 3
    timeout: float = 30.0
    supports_system_prompt: bool = True
    repeat_instructions: bool = False
    backoff: float = 1.0
    api_key_env: str = "SKOSLATE_LLM_API_KEY"

    def validate(self) -> None:
        if self.temperature < 0:
            raise ConfigError(f"LLM temperature must be >= 0, got {self.temperature}")
        if self.timeout <= 0:
            raise ConfigError(f"LLM timeout must be > 0, got {self.timeout}")
        if self.max_retries < 0:
            raise ConfigError(f"LLM max_retries must be >= 0, got {self.max_retries}")

    def retry_policy(self) -> RetryPolicy:
        return RetryPolicy(max_retries=self.max_retries, backoff=self.backoff)


@dataclass(frozen=True)
class PromptContext:
    term_description: Optional[str] = None
    scheme_description: Optional[str] = None
    user_context: Optional[str] = None
    broader_terms: Tuple[str, ...] = ()

    def blocks(self) -> List[str]:
        out = []
        if self.term_description:
            out.append(f"Description of the term that should be translated: {collapse_ws(self.term_description)}")
        if self.broader_terms:
            out.append(f"Broader terms in the vocabulary: {', '.join(self.broader_terms)}")
        if self.scheme_description:
            out.append(f"Description of the vocabulary the term belongs to: {collapse_ws(self.scheme_description)}")
        if self.user_context:
            out.append(f"Additional context: {self.user_context.strip()}")
        return out


class RefinementRoute(str, Enum):
    LLM_TRANSLATION_MATCHED = "llm_translation_matched"
    LLM_SELECTION = "llm_selection"
    FREQUENCY_FALLBACK = "frequency_fallback"


@dataclass
class RefinementOutcome:
    final_text: str
    route: RefinementRoute
    llm_calls: int                    # stages used: 1 or 2
    requests: int = 0                 # prompts actually sent (one per label in stage 1)
    raw_responses: List[str] = field(default_factory=list)
    prompts: List[Tuple[str, str]] = field(default_factory=list)
    llm_translations: List[str] = field(default_factory=list)
    chars_sent: int = 0
    chars_received: int = 0

    def audit_record(self) -> Dict[str, Any]:
        return {
            "route": self.route.value,
            "final": self.final_text,
            "llm_calls": self.llm_calls,
            "prompts": [{"instructions": i, "input": u} for i, u in self.prompts],
            "responses": list(self.raw_responses),
            "llm_translations": list(self.llm_translations),
        }


class LlmClient(ABC):
    @abstractmethod
    def complete(self, instructions: str, user_input: str) -> str:
        """Return the raw model reply or raise ProviderError."""


class ChatCompletionClient(LlmClient):
    """OpenAI-style /chat/completions endpoint; works for most hosted models."""

    provider_id = "llm"

    def __init__(self, cfg: LlmConfig, session=None) -> None:
        import requests

        self.cfg = cfg
        self.session = session or requests.Session()

    def complete(self, instructions: str, user_input: str) -> str:
        from .services import post_json

        key = os.environ.get(self.cfg.api_key_env)
        if not key:
            raise ProviderError(ErrorKind.AUTH, self.provider_id, f"set {self.cfg.api_key_env}")
        if self.cfg.supports_system_prompt:
            messages = [{"role": "system", "content": instructions},
                        {"role": "user", "content": user_input}]
        else:
            messages = [{"role": "user", "content": user_input}]
        payload = post_json(
            self.session, self.cfg.endpoint, self.provider_id, timeout=self.cfg.timeout,
            json={"model": self.cfg.model_id, "temperature": self.cfg.temperature, "messages": messages},
            headers={"Authorization": f"Bearer {key}"},
        )
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(ErrorKind.MALFORMED_RESPONSE, self.provider_id,
                                f"unexpected payload: {str(payload)[:200]}") from exc
        return content if isinstance(content, str) else ""


# ----------------------------- prompts -----------------------------

def _with_instructions(instructions: str, body: List[str], repeat: bool) -> str:
    lines = ([instructions, ""] if repeat else []) + body
    return "\n".join(lines)


def build_translation_prompt(source_text: str, source_lang: str, target_lang: str,
                             ctx: PromptContext = PromptContext(), *,
                             supports_system_prompt: bool = True,
                             repeat_instructions: bool = False) -> Tuple[str, str]:
    if not source_text.strip():
        raise ValueError("source_text is empty")
    instructions = TRANSLATION_INSTRUCTIONS.format(source=language_name(source_lang),
                                                   target=language_name(target_lang))
    body = [f"Term to translate: {source_text.strip()}"] + ctx.blocks()
    repeat = repeat_instructions or not supports_system_prompt
    return instructions, _with_instructions(instructions, body, repeat)


def _list_item(text: str) -> str:
    if "," in text or text.startswith('"'):
        return '"' + text.replace('"', '""') + '"'
    return text


def dedupe(texts: Sequence[str]) -> List[str]:
    """First occurrence per matching key (NFC + casefold), order kept."""
    seen = set()
    out = []
    for t in texts:
        key = fold(t)
        if key and key not in seen:
            seen.add(key)
            out.append(t.strip())
    return out


def build_selection_prompt(target_lang: str, candidates: Sequence[str], source_text: str,
                           ctx: PromptContext = PromptContext(), *,
                           supports_system_prompt: bool = True,
                           repeat_instructions: bool = False) -> Tuple[str, str]:
    options = dedupe(candidates)
    if len(options) < 2:
        raise TooFewCandidates(f"selection needs at least 2 distinct candidates, got {len(options)}")
    target = language_name(target_lang)
    body = [
        f"Choose the best fitting translation to {target}.",
        f"Term: {source_text.strip()}",
        *ctx.blocks(),
        f"The possible translations to {target} coming from translation systems are: "
        + ", ".join(_list_item(o) for o in options),
    ]
    repeat = repeat_instructions or not supports_system_prompt
    return SELECTION_INSTRUCTIONS, _with_instructions(SELECTION_INSTRUCTIONS, body, repeat)


# ----------------------------- output parsing -----------------------------

_SCAFFOLD = re.compile(
    r"^(term to translate|description of|additional context|choose the best|the possible translations|"
    r"term:|broader terms|instructions?\b|you are a|return only|return exactly)",
    re.IGNORECASE,
)
_CODE = re.compile(
    r"^(def |class |import |from \S+ import |print\(|return |#include|function |const |let |var |<\?|</?\w+>)"
    r"|[{};]\s*$|=>|\w+\s*=\s*\S|\w+\(.*\)\s*$"
)
_LANGUAGES = "|".join(re.escape(n.lower()) for n in sorted(LANGUAGE_NAMES.values(), key=len, reverse=True))
_PREFIX = re.compile(
    r"^(?:the )?(?:best(?: fitting)? |final |correct )?"
    rf"(?:(?:{_LANGUAGES}) )?(?:translation|answer|output|result)"
    r"(?: is)?\s*[:\-]\s*",
    re.IGNORECASE,
)
_BULLET = re.compile(r"^(?:[-*+•]|\d+[.)])\s+")
_EMPHASIS = re.compile(r"(\*\*|__|\*|_|`)")
_QUOTES = "\"'“”„‚‘’«»`"
_FINAL_PUNCT = ".!;,:。"


def _clean_line(line: str) -> str:
    s = line.strip()
    s = _BULLET.sub("", s)
    s = _PREFIX.sub("", s)
    s = _EMPHASIS.sub("", s)
    s = s.strip().strip(_QUOTES).strip()
    s = s.rstrip(_FINAL_PUNCT).strip().strip(_QUOTES).strip()
    return collapse_ws(s)


def _candidate_lines(raw: str) -> List[str]:
    lines: List[str] = []
    in_fence = False
    for line in raw.splitlines():
        stripped = line.strip()
        if stripped.startswith("```"):
            in_fence = not in_fence
            continue
        if in_fence or not stripped:
            continue
        if _SCAFFOLD.match(stripped) or stripped.endswith("?") or stripped.endswith(":"):
            continue
        if _CODE.search(stripped):
            continue
        cleaned = _clean_line(stripped)
        if cleaned:
            lines.append(cleaned)
    return lines


def parse_llm_output(raw: Optional[str], expected_candidates: Optional[Sequence[str]] = None) -> Optional[str]:
    """
    Pull a single term out of a possibly chatty reply.

    Code, fenced blocks, restated prompt lines and lead-in lines ending in ':'
    or '?' are dropped first. One line left: that line. Several: the first one
    matching an expected candidate (case-insensitive, NFC), else the first line
    if it has at most eight words. Otherwise None.
    """
    if not raw or not raw.strip():
        return None
    lines = _candidate_lines(raw)
    if not lines:
        return None
    if len(lines) == 1:
        return lines[0]
    if expected_candidates:
        wanted = {fold(c) for c in expected_candidates}
        for line in lines:
            if fold(line) in wanted:
                return line
    first = lines[0]
    return first if len(first.split()) <= MAX_ANSWER_WORDS else None


# ----------------------------- refinement -----------------------------

@dataclass
class _Session:
    client: LlmClient
    policy: RetryPolicy
    inflight: Optional[threading.BoundedSemaphore]
    outcome_prompts: List[Tuple[str, str]] = field(default_factory=list)
    raw: List[str] = field(default_factory=list)
    requests: int = 0
    chars_sent: int = 0
    chars_received: int = 0

    def ask(self, instructions: str, user_input: str) -> Optional[str]:
        self.outcome_prompts.append((instructions, user_input))
        self.requests += 1
        self.chars_sent += len(instructions) + len(user_input)

        def attempt() -> str:
            with self.inflight if self.inflight is not None else nullcontext():
                return self.client.complete(instructions, user_input)

        try:
            reply = call_with_retries(attempt, self.policy, what="llm")
        except ProviderError as exc:
            log.warning("LLM request failed: %s", exc)
            return None
        reply = reply or ""
        self.raw.append(reply)
        self.chars_received += len(reply)
        return reply


def _match_primary(text: str, primary: Sequence[TranslationCandidate]) -> List[str]:
    key = fold(text)
    return [c.text for c in primary if fold(c.text) == key]


def refine(source_labels: Sequence[Tuple[str, str]], primary_candidates: Sequence[TranslationCandidate],
           target_lang: str, ctx: PromptContext, cfg: LlmConfig, client: LlmClient, *,
           priority: Sequence[str] = (),
           inflight: Optional[threading.BoundedSemaphore] = None) -> RefinementOutcome:
    """Run both LLM stages for one term; `source_labels` are (text, language) pairs."""
    if not primary_candidates:
        raise EmptyCandidates("refinement needs at least one primary candidate")
    s = _Session(client, cfg.retry_policy(), inflight)
    flags = dict(supports_system_prompt=cfg.supports_system_prompt,
                 repeat_instructions=cfg.repeat_instructions)
    expected = [c.text for c in primary_candidates]

    def done(final: str, route: RefinementRoute, stages: int, llm_texts: List[str]) -> RefinementOutcome:
        return RefinementOutcome(final, route, stages, s.requests, s.raw, s.outcome_prompts,
                                 llm_texts, s.chars_sent, s.chars_received)

    # stage 1: one prompt per source label
    llm_texts: List[str] = []
    answered = 0
    for text, lang in source_labels:
        instructions, user_input = build_translation_prompt(text, lang, target_lang, ctx, **flags)
        reply = s.ask(instructions, user_input)
        if reply is None:
            continue
        answered += 1
        parsed = parse_llm_output(reply, expected)
        if parsed:
            llm_texts.append(parsed)

    matched = [m for t in llm_texts for m in _match_primary(t, primary_candidates)]
    if matched:
        group = largest_group_for(matched, primary_candidates, priority)
        if group is not None:
            final = group.representative(priority).text
            log.debug("LLM translation matched primary %r", final)
            return done(final, RefinementRoute.LLM_TRANSLATION_MATCHED, 1, llm_texts)

    fallback = fallback_pick(primary_candidates, priority)
    if answered == 0:
        log.info("LLM unavailable for %r; using frequency fallback", source_labels[0][0] if source_labels else "")
        return done(fallback, RefinementRoute.FREQUENCY_FALLBACK, 1, llm_texts)

    # stage 2: selection over primaries plus the model's own proposals
    options = dedupe([g.representative(priority).text
                      for g in group_candidates(primary_candidates, priority)] + llm_texts)
    source_text = "; ".join(f"{t} ({language_name(lang)})" for t, lang in source_labels)
    try:
        instructions, user_input = build_selection_prompt(target_lang, options, source_text, ctx, **flags)
    except TooFewCandidates:
        return done(fallback, RefinementRoute.FREQUENCY_FALLBACK, 1, llm_texts)

    reply = s.ask(instructions, user_input)
    choice = parse_llm_output(reply, options) if reply is not None else None
    if choice is not None:
        for option in options:
            if fold(option) == fold(choice):
                return done(option, RefinementRoute.LLM_SELECTION, 2, llm_texts)
    log.debug("LLM selection unusable (%r); using frequency fallback", reply)
    return done(fallback, RefinementRoute.FREQUENCY_FALLBACK, 2, llm_texts)
