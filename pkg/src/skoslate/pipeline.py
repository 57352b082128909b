"""
Per-term translation: gather candidates -> frequency consensus -> optional LLM
refinement -> write back.

Terms are worked on concurrently, but the graph is only written in a final
single-writer pass over the outcomes sorted by concept IRI, so output is
deterministic whenever the services are.
"""
from __future__ import annotations
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from .consensus import ConsensusResult, ConsensusRoute, fallback_pick, score
from .errors import ConfigError, ProviderError
from .llm import LlmClient, LlmConfig, PromptContext, RefinementOutcome, refine
from .providers import (
    DEFAULT_MAX_INFLIGHT,
    DEFAULT_PRIORITY,
    ProviderDescriptor,
    ProviderRegistry,
    TranslationCandidate,
    default_priority,
)
from .skos_graph import (
    PREF_LABEL,
    LabelProperty,
    Term,
    Thesaurus,
    add_translation,
    copy_thesaurus,
    extract_terms,
    labels_for,
    mark_generated,
)
from .utils import UNDETERMINED, ensure_dir, fold, is_lang_tag, primary_subtag

log = logging.getLogger(__name__)

SourceLabel = Tuple[str, str]   # (text, language tag)


class TermRoute(str, Enum):
    ACCEPTED_BY_FREQUENCY = "accepted_by_frequency"
    LLM_TRANSLATION_MATCHED = "llm_translation_matched"
    LLM_SELECTION = "llm_selection"
    FREQUENCY_FALLBACK = "frequency_fallback"
    UNTRANSLATED = "untranslated"
    SKIPPED_EXISTING = "skipped_existing"


@dataclass
class PipelineConfig:
    target_lang: str
    prop: LabelProperty = PREF_LABEL
    threshold: float = 0.6
    min_translations: int = 5
    provider_order: Optional[List[str]] = None      # None: recommended order
    llm: Optional[LlmConfig] = None                 # None: no refinement
    skip_existing: bool = True
    max_inflight: int = DEFAULT_MAX_INFLIGHT
    assume_source_lang: Optional[str] = None
    mark_generated: bool = False
    context: Optional[str] = None
    audit_log: Optional[Path] = None
    show_progress: bool = False

    def validate(self, registry: Optional[ProviderRegistry] = None) -> None:
        if not is_lang_tag(self.target_lang) or primary_subtag(self.target_lang) == UNDETERMINED:
            raise ConfigError(f"malformed target language tag {self.target_lang!r}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.min_translations < 1:
            raise ConfigError(f"min_translations must be >= 1, got {self.min_translations}")
        if self.max_inflight < 1:
            raise ConfigError(f"max_inflight must be >= 1, got {self.max_inflight}")
        if self.assume_source_lang is not None and not is_lang_tag(self.assume_source_lang):
            raise ConfigError(f"malformed source language tag {self.assume_source_lang!r}")
        if self.llm is not None:
            self.llm.validate()
        if registry is not None:
            self.priority(registry)

    def warnings(self) -> List[str]:
        out = []
        if self.threshold * self.min_translations < 3:
            out.append(
                f"threshold x min_translations = {self.threshold:g} x {self.min_translations} "
                f"= {self.threshold * self.min_translations:g} < 3; "
                "a frequency consensus may rest on fewer than three agreeing services"
            )
        return out

    def priority(self, registry: ProviderRegistry) -> List[str]:
        if self.provider_order:
            return default_priority(self.provider_order, known=registry.ids())
        recommended = [p for p in DEFAULT_PRIORITY if p in registry]
        return recommended or registry.ids()


@dataclass
class Gathered:
    candidates: List[TranslationCandidate]
    uncovered: List[SourceLabel] = field(default_factory=list)
    queried: List[str] = field(default_factory=list)
    seconds: float = 0.0


@dataclass
class TermOutcome:
    iri: str
    final_text: Optional[str]
    route: TermRoute
    candidates: List[TranslationCandidate] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    extra_texts: List[str] = field(default_factory=list)      # multi-valued properties only
    uncovered: List[SourceLabel] = field(default_factory=list)
    consensus: Optional[ConsensusResult] = None
    refinement: Optional[RefinementOutcome] = None
    provider_id: str = ""
    written: int = 0
    error: Optional[str] = None

    def __post_init__(self) -> None:
        empty = self.route in (TermRoute.UNTRANSLATED, TermRoute.SKIPPED_EXISTING)
        if empty != (self.final_text is None):
            raise ValueError(f"route {self.route.value} and final_text={self.final_text!r} disagree")

    @property
    def texts(self) -> List[str]:
        return ([self.final_text] if self.final_text else []) + self.extra_texts

    @property
    def llm_calls(self) -> int:
        return self.refinement.llm_calls if self.refinement else 0


def source_labels(term: Term, cfg: PipelineConfig) -> List[SourceLabel]:
    """Labels not in the target language; untagged ones only with an assumed language."""
    out: List[SourceLabel] = []
    for tag in sorted(term.labels):
        if tag == UNDETERMINED:
            if cfg.assume_source_lang is None:
                log.warning("Skipping untagged label(s) of %s (set --assume-source-lang to use them)", term.iri)
                continue
            lang = cfg.assume_source_lang
        else:
            lang = tag
        if primary_subtag(lang) == primary_subtag(cfg.target_lang):
            continue
        out.extend((text, lang) for text in term.labels[tag])
    return out


def gather_candidates(term: Term, cfg: PipelineConfig, registry: ProviderRegistry,
                      labels: Optional[Sequence[SourceLabel]] = None) -> Gathered:
    """
    Ask providers in priority order until there are at least `min_translations`
    candidates and every source label has been translated at least once.
    """
    labels = list(labels) if labels is not None else source_labels(term, cfg)
    start = time.perf_counter()
    candidates: List[TranslationCandidate] = []
    covered = {label: False for label in labels}
    queried: List[str] = []

    for pid in cfg.priority(registry):
        if len(candidates) >= cfg.min_translations and all(covered.values()):
            break
        desc: ProviderDescriptor = registry.get(pid).descriptor
        used = False
        for label in labels:
            text, lang = label
            if len(candidates) >= cfg.min_translations and covered[label]:
                continue
            if not desc.supports(lang, cfg.target_lang):
                continue
            used = True
            try:
                cand = registry.translate(desc, text, lang, cfg.target_lang)
            except ProviderError as exc:
                log.warning("%s failed on %r (%s->%s): %s", pid, text, lang, cfg.target_lang, exc.kind.value)
                continue
            candidates.append(cand)
            covered[label] = True
        if used:
            queried.append(pid)

    uncovered = [label for label, ok in covered.items() if not ok]
    return Gathered(candidates, uncovered, queried, time.perf_counter() - start)


@dataclass
class _Unit:
    final: Optional[str]
    route: TermRoute
    gathered: Gathered
    consensus: Optional[ConsensusResult] = None
    refinement: Optional[RefinementOutcome] = None
    provider_id: str = ""
    timings: Dict[str, float] = field(default_factory=dict)


def _prompt_context(term: Term, labels: Sequence[SourceLabel], cfg: PipelineConfig,
                    thesaurus: Optional[Thesaurus]) -> PromptContext:
    lang = labels[0][1] if labels else "en"
    broader: List[str] = []
    if thesaurus is not None:
        for ref in term.broader:
            names = labels_for(thesaurus, ref, lang)
            if names:
                broader.append(names[0])
    return PromptContext(
        term_description=term.definition_for(lang),
        scheme_description=thesaurus.scheme_description if thesaurus is not None else None,
        user_context=cfg.context,
        broader_terms=tuple(broader),
    )


def _translate_unit(term: Term, labels: Sequence[SourceLabel], cfg: PipelineConfig,
                    registry: ProviderRegistry, llm: Optional[LlmClient],
                    thesaurus: Optional[Thesaurus]) -> _Unit:
    gathered = gather_candidates(term, cfg, registry, labels)
    timings = {"gather": gathered.seconds}
    if not gathered.candidates:
        return _Unit(None, TermRoute.UNTRANSLATED, gathered, timings=timings)

    priority = cfg.priority(registry)
    t0 = time.perf_counter()
    result = score(gathered.candidates, cfg.threshold, priority)
    timings["consensus"] = time.perf_counter() - t0
    if result.route is ConsensusRoute.ACCEPTED_BY_FREQUENCY:
        return _Unit(result.best, TermRoute.ACCEPTED_BY_FREQUENCY, gathered, result,
                     provider_id=result.provider_id, timings=timings)

    if llm is None or cfg.llm is None:
        final = fallback_pick(gathered.candidates, priority)
        return _Unit(final, TermRoute.FREQUENCY_FALLBACK, gathered, result,
                     provider_id=result.provider_id, timings=timings)

    t0 = time.perf_counter()
    outcome = refine(labels, gathered.candidates, cfg.target_lang,
                     _prompt_context(term, labels, cfg, thesaurus), cfg.llm, llm,
                     priority=priority, inflight=registry.inflight())
    timings["llm"] = time.perf_counter() - t0
    provider = next((c.provider_id for c in gathered.candidates if fold(c.text) == fold(outcome.final_text)), "llm")
    return _Unit(outcome.final_text, TermRoute(outcome.route.value), gathered, result, outcome,
                 provider_id=provider, timings=timings)


def translate_term(term: Term, cfg: PipelineConfig, registry: ProviderRegistry,
                   llm: Optional[LlmClient] = None, thesaurus: Optional[Thesaurus] = None) -> TermOutcome:
    """Work out the translation of one term. Never raises; failures come back as untranslated."""
    try:
        if cfg.skip_existing and term.has_language(cfg.target_lang):
            return TermOutcome(term.iri, None, TermRoute.SKIPPED_EXISTING)
        labels = source_labels(term, cfg)
        if not labels:
            log.warning("%s has no source label outside %s", term.iri, cfg.target_lang)
            return TermOutcome(term.iri, None, TermRoute.UNTRANSLATED)

        # SKOS allows one prefLabel per language; other properties translate each label on its own
        groups = [[label] for label in labels] if cfg.prop.multi_valued else [labels]
        units = [_translate_unit(term, g, cfg, registry, llm, thesaurus) for g in groups]

        done = [u for u in units if u.final is not None]
        timings: Dict[str, float] = {}
        for u in units:
            for stage, secs in u.timings.items():
                timings[stage] = timings.get(stage, 0.0) + secs
        candidates = [c for u in units for c in u.gathered.candidates]
        uncovered = [lab for u in units for lab in u.gathered.uncovered]
        if not done:
            return TermOutcome(term.iri, None, TermRoute.UNTRANSLATED, candidates, timings,
                               uncovered=uncovered)

        head = done[0]
        extra: List[str] = []
        seen = {fold(head.final)}
        for u in done[1:]:
            if fold(u.final) not in seen:
                seen.add(fold(u.final))
                extra.append(u.final)
        return TermOutcome(term.iri, head.final, head.route, candidates, timings, extra, uncovered,
                           head.consensus, _merge_refinements(units), head.provider_id)
    except Exception as exc:  # one bad term must not end the run
        log.exception("Translating %s failed", term.iri)
        return TermOutcome(term.iri, None, TermRoute.UNTRANSLATED, error=f"{type(exc).__name__}: {exc}")


def _merge_refinements(units: Sequence[_Unit]) -> Optional[RefinementOutcome]:
    refs = [u.refinement for u in units if u.refinement is not None]
    if len(refs) <= 1:
        return refs[0] if refs else None
    head = refs[0]
    return RefinementOutcome(
        head.final_text, head.route,
        llm_calls=sum(r.llm_calls for r in refs),
        requests=sum(r.requests for r in refs),
        raw_responses=[x for r in refs for x in r.raw_responses],
        prompts=[x for r in refs for x in r.prompts],
        llm_translations=[x for r in refs for x in r.llm_translations],
        chars_sent=sum(r.chars_sent for r in refs),
        chars_received=sum(r.chars_received for r in refs),
    )


# ----------------------------- run report -----------------------------

@dataclass
class RunReport:
    target_lang: str
    prop: str
    terms: int
    routes: Dict[str, int]
    written: int = 0
    llm_calls: int = 0
    llm_requests: int = 0
    provider_calls: int = 0
    cache_hits: int = 0
    chars_sent: int = 0
    chars_received: int = 0
    latency: Dict[str, float] = field(default_factory=dict)   # micro averages, seconds
    term_seconds: float = 0.0                                  # macro average per term
    wall_seconds: float = 0.0
    uncovered: List[Dict[str, str]] = field(default_factory=list)
    provider_stats: Dict[str, Dict[str, int]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    outcomes: List[TermOutcome] = field(default_factory=list, repr=False)

    @property
    def all_untranslated(self) -> bool:
        attempted = self.terms - self.routes.get(TermRoute.SKIPPED_EXISTING.value, 0)
        return attempted > 0 and self.routes.get(TermRoute.UNTRANSLATED.value, 0) == attempted

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[TermOutcome], cfg: PipelineConfig,
                      registry: ProviderRegistry, wall_seconds: float) -> "RunReport":
        routes = {r.value: 0 for r in TermRoute}
        for o in outcomes:
            routes[o.route.value] += 1

        cands = [c for o in outcomes for c in o.candidates]
        refs = [o.refinement for o in outcomes if o.refinement is not None]
        llm_requests = sum(r.requests for r in refs)
        scored = [o for o in outcomes if "consensus" in o.timings]
        latency = {
            "translation": (sum(c.latency for c in cands) / len(cands)) if cands else 0.0,
            "consensus": (sum(o.timings["consensus"] for o in scored) / len(scored)) if scored else 0.0,
            "llm_request": (sum(o.timings.get("llm", 0.0) for o in outcomes) / llm_requests)
            if llm_requests else 0.0,
        }
        worked = [o for o in outcomes if o.timings]
        stats = registry.stats()
        return cls(
            target_lang=cfg.target_lang,
            prop=cfg.prop.name,
            terms=len(outcomes),
            routes=routes,
            written=sum(o.written for o in outcomes),
            llm_calls=sum(r.llm_calls for r in refs),
            llm_requests=llm_requests,
            provider_calls=sum(s["calls"] for s in stats.values()),
            cache_hits=sum(s["cache_hits"] for s in stats.values()),
            chars_sent=sum(r.chars_sent for r in refs),
            chars_received=sum(r.chars_received for r in refs),
            latency=latency,
            term_seconds=(sum(sum(o.timings.values()) for o in worked) / len(worked)) if worked else 0.0,
            wall_seconds=wall_seconds,
            uncovered=[{"iri": o.iri, "text": t, "lang": lang} for o in outcomes for t, lang in o.uncovered],
            provider_stats={k: v for k, v in stats.items() if any(v.values())},
            warnings=cfg.warnings(),
            outcomes=list(outcomes),
        )

    def to_dict(self, *, terms: bool = True) -> Dict[str, Any]:
        d = {k: v for k, v in vars(self).items() if k != "outcomes"}
        if terms:
            d["per_term"] = [
                {
                    "iri": o.iri,
                    "route": o.route.value,
                    "final": o.final_text,
                    "extra": o.extra_texts,
                    "provider": o.provider_id,
                    "confidence": o.consensus.confidence if o.consensus else None,
                    "candidates": [{"text": c.text, "provider": c.provider_id, "source": c.source_text,
                                    "source_lang": c.source_lang} for c in o.candidates],
                    "error": o.error,
                }
                for o in self.outcomes
            ]
        return d

    def to_json(self, path: Optional[Path] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, ensure_ascii=False)
        if path is not None:
            path = Path(path)
            ensure_dir(path.parent)
            path.write_text(text + "\n", encoding="utf-8")
        return text

    def render_table(self) -> str:
        import pandas as pd

        rows = [(route, n) for route, n in self.routes.items()]
        rows += [
            ("labels written", self.written),
            ("provider calls", self.provider_calls),
            ("cache hits", self.cache_hits),
            ("LLM stages", self.llm_calls),
            ("LLM requests", self.llm_requests),
            ("LLM chars sent/received", f"{self.chars_sent}/{self.chars_received}"),
            ("uncovered labels", len(self.uncovered)),
            ("avg s / translation", f"{self.latency.get('translation', 0.0):.3f}"),
            ("avg s / LLM request", f"{self.latency.get('llm_request', 0.0):.3f}"),
            ("avg s / term", f"{self.term_seconds:.3f}"),
            ("wall s", f"{self.wall_seconds:.1f}"),
        ]
        df = pd.DataFrame(rows, columns=["metric", "value"])
        return df.to_string(index=False)


# ----------------------------- whole thesaurus -----------------------------

def _write_outcome(out: Thesaurus, o: TermOutcome, cfg: PipelineConfig, term: Term) -> None:
    texts = o.texts
    if not texts:
        return
    if not cfg.prop.multi_valued:
        texts = texts[:1]
        existing = term.labels_in(cfg.target_lang)
        if existing:
            if fold(existing[0]) != fold(texts[0]):
                log.warning("%s already has a %s@%s (%r); keeping it", o.iri, cfg.prop.name,
                            cfg.target_lang, existing[0])
            return
    before = len(out.graph)
    for text in texts:
        add_translation(out, o.iri, cfg.prop, text, cfg.target_lang)
    o.written = len(out.graph) - before
    if cfg.mark_generated and o.written:
        mark_generated(out, o.iri, cfg.prop, cfg.target_lang)


def _write_audit(path: Path, outcomes: Sequence[TermOutcome]) -> None:
    ensure_dir(Path(path).parent)
    with Path(path).open("w", encoding="utf-8") as fh:
        for o in outcomes:
            if o.refinement is None:
                continue
            rec = {"iri": o.iri, **o.refinement.audit_record()}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def translate_thesaurus(t: Thesaurus, cfg: PipelineConfig, registry: ProviderRegistry,
                        llm: Optional[LlmClient] = None) -> Tuple[Thesaurus, RunReport]:
    """Enriched copy of `t` plus a run report. The input thesaurus is left untouched."""
    cfg.validate(registry)
    for msg in cfg.warnings():
        log.warning(msg)

    out = copy_thesaurus(t)
    terms = extract_terms(out, cfg.prop)
    by_iri = {term.iri: term for term in terms}
    log.info("Translating %d term(s) into %s via %s", len(terms), cfg.target_lang,
             ", ".join(cfg.priority(registry)))

    start = time.perf_counter()
    outcomes: List[TermOutcome] = []
    with ThreadPoolExecutor(max_workers=cfg.max_inflight) as pool:
        futures = [pool.submit(translate_term, term, cfg, registry, llm, out) for term in terms]
        with tqdm(total=len(futures), desc="terms", unit="term", file=sys.stderr,
                  disable=not cfg.show_progress) as bar:
            for fut in as_completed(futures):
                outcomes.append(fut.result())
                bar.update(1)

    # single writer, IRI order
    outcomes.sort(key=lambda o: o.iri)
    for o in outcomes:
        _write_outcome(out, o, cfg, by_iri[o.iri])

    if cfg.audit_log is not None:
        _write_audit(cfg.audit_log, outcomes)

    report = RunReport.from_outcomes(outcomes, cfg, registry, time.perf_counter() - start)
    log.info("Done: %s", ", ".join(f"{k}={v}" for k, v in report.routes.items() if v))
    return out, report
