"""
Back-translation evaluation.

Remove one language from a thesaurus, translate it back, and compare each
concept's new label(s) with the removed originals using exact match,
Levenshtein, Jaro-Winkler and subword-embedding cosine similarity.
"""
from __future__ import annotations
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rapidfuzz.distance import Jaro, Levenshtein

from .embeddings import EmbeddingModel
from .errors import LanguageMissing, ModelMissing
from .skos_graph import PREF_LABEL, LabelProperty, Thesaurus, extract_terms, strip_language
from .utils import ensure_dir, fold, nfc

log = logging.getLogger(__name__)

MEASURES = ("exact", "levenshtein", "jaro_winkler", "cosine")
STRING_MEASURES = MEASURES[:3]

WINKLER_SCALE = 0.1
WINKLER_MAX_PREFIX = 4


def exact_match(a: str, b: str) -> int:
    return int(fold(a) == fold(b))


def levenshtein_sim(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - Levenshtein.distance(a, b) / longest


def jaro_sim(a: str, b: str) -> float:
    if a == b:
        return 1.0
    return Jaro.similarity(a, b)


def jaro_winkler_sim(a: str, b: str) -> float:
    """Jaro plus 0.1 per shared leading character, at most four, no boost threshold."""
    j = jaro_sim(a, b)
    prefix = 0
    for x, y in zip(a[:WINKLER_MAX_PREFIX], b[:WINKLER_MAX_PREFIX]):
        if x != y:
            break
        prefix += 1
    return j + prefix * WINKLER_SCALE * (1.0 - j)


def cosine_vectors(u: np.ndarray, v: np.ndarray) -> Tuple[float, bool]:
    """(cosine, zero_flag); a zero operand gives (0.0, True)."""
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0, True
    return float(np.dot(u, v) / (nu * nv)), False


def cosine_sim(a: str, b: str, model_a: Optional[EmbeddingModel],
               model_b: Optional[EmbeddingModel] = None) -> float:
    if model_a is None:
        raise ModelMissing("cosine similarity needs an embedding model")
    return cosine_vectors(model_a.embed(a), (model_b or model_a).embed(b))[0]


@dataclass
class SimilarityScores:
    exact: Optional[int] = None
    levenshtein: Optional[float] = None
    jaro_winkler: Optional[float] = None
    cosine: Optional[float] = None           # raw, may be negative
    cosine_zero: bool = False

    @property
    def cosine_clamped(self) -> Optional[float]:
        return None if self.cosine is None else min(1.0, max(0.0, self.cosine))

    def value(self, measure: str) -> Optional[float]:
        if measure == "cosine":
            return self.cosine_clamped
        v = getattr(self, measure)
        return None if v is None else float(v)

    @classmethod
    def zeros(cls, measures: Sequence[str]) -> "SimilarityScores":
        s = cls()
        for m in measures:
            setattr(s, m, 0 if m == "exact" else 0.0)
        return s


def _check_measures(measures: Sequence[str], model: Optional[EmbeddingModel]) -> Tuple[str, ...]:
    unknown = [m for m in measures if m not in MEASURES]
    if unknown:
        raise ValueError(f"unknown measure(s): {', '.join(unknown)}; choose from {', '.join(MEASURES)}")
    if "cosine" in measures and model is None:
        raise ModelMissing("cosine similarity needs an embedding model (or drop it from --measures)")
    return tuple(m for m in MEASURES if m in measures)


def score_pair(a: str, b: str, model: Optional[EmbeddingModel] = None,
               measures: Sequence[str] = MEASURES) -> SimilarityScores:
    """Scores of one label pair; string measures compare the folded forms exact_match uses."""
    measures = _check_measures(measures, model)
    s = SimilarityScores()
    fa, fb = fold(a), fold(b)
    if "exact" in measures:
        s.exact = int(fa == fb)
    if "levenshtein" in measures:
        s.levenshtein = levenshtein_sim(fa, fb)
    if "jaro_winkler" in measures:
        s.jaro_winkler = jaro_winkler_sim(fa, fb)
    if "cosine" in measures:
        s.cosine, s.cosine_zero = cosine_vectors(model.embed(a), model.embed(b))
    return s


def best_scores(originals: Sequence[str], translations: Sequence[str], model: Optional[EmbeddingModel],
                measures: Sequence[str]) -> SimilarityScores:
    """Per measure, the maximum over every (original, translation) pair."""
    pairs = [score_pair(o, t, model, measures) for o in originals for t in translations]
    out = SimilarityScores()
    for m in measures:
        setattr(out, m, max(getattr(p, m) for p in pairs))
    if "cosine" in measures:
        out.cosine_zero = any(p.cosine_zero for p in pairs)
    return out


@dataclass
class TermScore:
    iri: str
    originals: List[str]
    translations: List[str]
    scores: SimilarityScores
    exact_case_sensitive: int = 0

    @property
    def translated(self) -> bool:
        return bool(self.translations)


@dataclass
class SimilarityReport:
    language: str
    prop: str
    measures: Tuple[str, ...]
    terms: List[TermScore] = field(default_factory=list)
    translate_seconds: float = 0.0
    score_seconds: float = 0.0

    @property
    def term_count(self) -> int:
        return len(self.terms)

    @property
    def untranslated(self) -> int:
        return sum(1 for t in self.terms if not t.translated)

    @property
    def zero_vectors(self) -> int:
        return sum(1 for t in self.terms if t.scores.cosine_zero)

    @property
    def macro(self) -> Dict[str, float]:
        """Mean per measure over all terms (untranslated ones count as 0)."""
        if not self.terms:
            return {m: 0.0 for m in self.measures}
        return {m: float(np.mean([t.scores.value(m) for t in self.terms])) for m in self.measures}

    @property
    def exact_case_sensitive_rate(self) -> float:
        if not self.terms:
            return 0.0
        return sum(t.exact_case_sensitive for t in self.terms) / len(self.terms)

    @property
    def seconds_per_term(self) -> float:
        return (self.translate_seconds + self.score_seconds) / self.term_count if self.terms else 0.0

    def summary(self) -> Dict[str, object]:
        row: Dict[str, object] = {"language": self.language, "prop": self.prop, "terms": self.term_count,
                                  "untranslated": self.untranslated}
        row.update(self.macro)
        row["exact_case_sensitive"] = self.exact_case_sensitive_rate
        if "cosine" in self.measures:
            row["zero_vectors"] = self.zero_vectors
        row["translate_seconds"] = round(self.translate_seconds, 3)
        row["seconds_per_term"] = round(self.seconds_per_term, 4)
        return row

    def to_dict(self) -> Dict[str, object]:
        return {
            "summary": self.summary(),
            "terms": [
                {
                    "iri": t.iri,
                    "originals": t.originals,
                    "translations": t.translations,
                    "exact": t.scores.exact,
                    "exact_case_sensitive": t.exact_case_sensitive,
                    "levenshtein": t.scores.levenshtein,
                    "jaro_winkler": t.scores.jaro_winkler,
                    "cosine": t.scores.cosine,
                    "cosine_zero": t.scores.cosine_zero,
                }
                for t in self.terms
            ],
        }

    def to_json(self, path: Optional[Path] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, ensure_ascii=False)
        if path is not None:
            ensure_dir(Path(path).parent)
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def to_csv(self, path: Path) -> None:
        write_summary_csv([self], path)


def summary_frame(reports: Sequence[SimilarityReport]):
    """One row per evaluated language plus a macro row across languages."""
    import pandas as pd

    df = pd.DataFrame([r.summary() for r in reports])
    if len(reports) > 1:
        numeric = df.select_dtypes("number").columns
        overall = df[numeric].mean().to_dict()
        overall.update({"language": "all", "prop": reports[0].prop})
        df = pd.concat([df, pd.DataFrame([overall])], ignore_index=True)
    return df


def write_summary_csv(reports: Sequence[SimilarityReport], path: Path) -> None:
    path = Path(path)
    ensure_dir(path.parent)
    summary_frame(reports).to_csv(path, index=False, float_format="%.6g")


TranslateFn = Callable[[Thesaurus], Thesaurus]


def evaluate_backtranslation(original: Thesaurus, lang: str, prop: LabelProperty = PREF_LABEL,
                             translate_fn: Optional[TranslateFn] = None, *,
                             model: Optional[EmbeddingModel] = None,
                             measures: Sequence[str] = MEASURES) -> SimilarityReport:
    """
    Strip `lang`, translate the rest back with `translate_fn`, and score each
    concept against its removed originals.
    """
    if translate_fn is None:
        raise ValueError("translate_fn is required")
    measures = _check_measures(measures, model)
    stripped, removed = strip_language(original, lang, prop)
    if not removed:
        raise LanguageMissing(f"no {prop.name} literal in {lang!r} to evaluate against")
    log.info("Evaluating %s@%s on %d concept(s)", prop.name, lang, len(removed))

    t0 = time.perf_counter()
    translated = translate_fn(stripped)
    translate_seconds = time.perf_counter() - t0

    back = {term.iri: term.labels_in(lang) for term in extract_terms(translated, prop)}
    t0 = time.perf_counter()
    scores: List[TermScore] = []
    for iri in sorted(removed):
        originals = removed[iri]
        got = back.get(iri, [])
        if not got:
            scores.append(TermScore(iri, originals, [], SimilarityScores.zeros(measures)))
            continue
        cs = int(any(nfc(o).strip() == nfc(t).strip() for o in originals for t in got))
        scores.append(TermScore(iri, originals, got, best_scores(originals, got, model, measures), cs))
    report = SimilarityReport(lang, prop.name, measures, scores, translate_seconds,
                              time.perf_counter() - t0)
    if report.untranslated:
        log.warning("%d of %d concept(s) came back without a %s label", report.untranslated,
                    report.term_count, lang)
    return report
