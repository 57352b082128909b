from __future__ import annotations
import json
import random

import numpy as np
import pandas as pd
import pytest

from skoslate.config import Settings
from skoslate.embeddings import WORD_START, EmbeddingModel
from skoslate.errors import LanguageMissing, ModelMissing
from skoslate.pipeline import PipelineConfig, translate_thesaurus
from skoslate.services import build_registry
from skoslate.simeval import (
    MEASURES,
    STRING_MEASURES,
    SimilarityScores,
    best_scores,
    cosine_sim,
    cosine_vectors,
    evaluate_backtranslation,
    exact_match,
    jaro_sim,
    jaro_winkler_sim,
    levenshtein_sim,
    score_pair,
    summary_frame,
)
from skoslate.skos_graph import (
    PREF_LABEL,
    add_translation,
    copy_thesaurus,
    extract_terms,
    restore_labels,
    strip_language,
)

ALPHABET = "abcdeäöüßéñ漢字ΩЖ😀 -"


def dp_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def literal_jaro_winkler(s: str, t: str) -> float:
    if s == t:
        return 1.0
    if not s or not t:
        return 0.0
    reach = max(0, max(len(s), len(t)) // 2 - 1)
    taken = set()
    s_idx = []
    for i, c in enumerate(s):
        lo, hi = max(0, i - reach), min(len(t) - 1, i + reach)
        for j in range(lo, hi + 1):
            if j not in taken and t[j] == c:
                taken.add(j)
                s_idx.append(i)
                break
    m = len(s_idx)
    if m == 0:
        return 0.0
    s_chars = "".join(s[i] for i in s_idx)
    t_chars = "".join(t[j] for j in sorted(taken))
    half = sum(1 for x, y in zip(s_chars, t_chars) if x != y) / 2.0
    jaro = (m / len(s) + m / len(t) + (m - half) / m) / 3.0
    ell = 0
    while ell < min(4, len(s), len(t)) and s[ell] == t[ell]:
        ell += 1
    return jaro + ell * 0.1 * (1 - jaro)


def random_pairs(n: int, seed: int):
    rng = random.Random(seed)
    for _ in range(n):
        yield ("".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 12))),
               "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 12))))


def char_model(texts, dim: int = 8, seed: int = 0) -> EmbeddingModel:
    """One random vector per character (plus the word-start marker)."""
    chars = sorted({c for t in texts for c in t.lower()} | {WORD_START})
    rng = np.random.default_rng(seed)
    return EmbeddingModel.from_mapping("de", {c: rng.normal(size=dim) for c in chars})


# ----------------------------- measures -----------------------------

def test_kitten_sitting():
    assert levenshtein_sim("kitten", "sitting") == pytest.approx(1 - 3 / 7, abs=1e-12)


def test_levenshtein_matches_dp_oracle():
    for a, b in random_pairs(1000, seed=1):
        longest = max(len(a), len(b))
        expected = 1.0 if longest == 0 else 1.0 - dp_distance(a, b) / longest
        assert levenshtein_sim(a, b) == expected


def test_martha():
    assert jaro_winkler_sim("MARTHA", "MARHTA") == pytest.approx(0.9611, abs=1e-4)


def test_jaro_winkler_matches_literal_formula():
    for a, b in random_pairs(1000, seed=2):
        assert jaro_winkler_sim(a, b) == pytest.approx(literal_jaro_winkler(a, b), abs=1e-12)


def test_measures_stay_in_range():
    for a, b in random_pairs(300, seed=3):
        assert 0.0 <= levenshtein_sim(a, b) <= 1.0
        assert 0.0 <= jaro_winkler_sim(a, b) <= 1.0 + 1e-12


def test_measures_are_symmetric():
    for a, b in random_pairs(500, seed=4):
        assert levenshtein_sim(a, b) == levenshtein_sim(b, a)
        assert jaro_sim(a, b) == pytest.approx(jaro_sim(b, a), abs=1e-12)
        assert jaro_winkler_sim(a, b) == pytest.approx(jaro_winkler_sim(b, a), abs=1e-12)
        assert exact_match(a, b) == exact_match(b, a)


def test_winkler_boost_only_with_a_shared_prefix():
    for a, b in random_pairs(1000, seed=5):
        j, jw = jaro_sim(a, b), jaro_winkler_sim(a, b)
        shared = 0
        while shared < min(4, len(a), len(b)) and a[shared] == b[shared]:
            shared += 1
        if shared == 0 or j == 1.0:
            assert jw == pytest.approx(j, abs=1e-12)
        else:
            assert jw > j


def test_jaro_of_martha():
    assert jaro_sim("MARTHA", "MARHTA") == pytest.approx(17 / 18, abs=1e-12)
    assert jaro_sim("", "") == 1.0
    assert jaro_sim("a", "") == 0.0


def test_exact_match_implies_full_string_scores():
    rng = random.Random(6)
    for a, _ in random_pairs(300, seed=6):
        b = rng.choice([a.upper(), a.lower(), f" {a.title()}  "])
        s = score_pair(a, b, measures=STRING_MEASURES)
        if s.exact:
            assert (s.levenshtein, s.jaro_winkler) == (1.0, 1.0)
    s = score_pair("Analyse", "ANALYSE ", measures=STRING_MEASURES)
    assert (s.exact, s.levenshtein, s.jaro_winkler) == (1, 1.0, 1.0)


def test_cosine_ignores_vector_length():
    rng = np.random.default_rng(7)
    for _ in range(100):
        u, v = rng.normal(size=16), rng.normal(size=16)
        k = float(rng.uniform(0.01, 100.0))
        assert cosine_vectors(k * u, v)[0] == pytest.approx(cosine_vectors(u, v)[0], abs=1e-9)
        assert cosine_vectors(u, k * v)[0] == pytest.approx(cosine_vectors(u, v)[0], abs=1e-9)


def test_exact_match_ignores_case_only():
    assert exact_match("Analyse", "analyse") == 1
    assert exact_match("Analyse ", "Analyse") == 1
    assert exact_match("Analyse", "Analysis") == 0
    assert exact_match("Übersetzen", "Ubersetzen") == 0


def test_cosine_vectors():
    assert cosine_vectors(np.array([1.0, 0.0]), np.array([2.0, 0.0])) == (pytest.approx(1.0), False)
    assert cosine_vectors(np.array([1.0, 0.0]), np.array([0.0, 3.0]))[0] == pytest.approx(0.0)
    assert cosine_vectors(np.zeros(2), np.array([1.0, 1.0])) == (0.0, True)


def test_cosine_is_clamped_for_aggregation():
    s = SimilarityScores(cosine=-0.4)
    assert s.value("cosine") == 0.0
    assert s.cosine == -0.4


def test_cosine_on_words():
    model = char_model(["analyse", "schreiben"])
    assert cosine_sim("Analyse", "analyse", model) == pytest.approx(1.0, abs=1e-9)
    assert cosine_sim("Analyse", "Schreiben", model) < 1.0
    with pytest.raises(ModelMissing):
        cosine_sim("a", "b", None)


def test_score_pair_checks_measures():
    with pytest.raises(ValueError):
        score_pair("a", "b", measures=["bleu"])
    with pytest.raises(ModelMissing):
        score_pair("a", "b", model=None, measures=MEASURES)
    s = score_pair("Analyse", "Analyse", measures=STRING_MEASURES)
    assert (s.exact, s.levenshtein, s.jaro_winkler, s.cosine) == (1, 1.0, 1.0, None)


def test_best_scores_take_the_maximum():
    s = best_scores(["Randnotiz", "Marginalie"], ["Marginalien"], None, STRING_MEASURES)
    assert s.levenshtein == pytest.approx(levenshtein_sim("Marginalie", "Marginalien"))
    assert s.exact == 0


# ----------------------------- back-translation -----------------------------

def mock_dict_translate(thesaurus):
    cfg = PipelineConfig("de", provider_order=["mock_dict"])
    return translate_thesaurus(thesaurus, cfg, build_registry(Settings()))[0]


def test_tadirah_replay(tadirah):
    labels = [text for term in extract_terms(tadirah) for texts in term.labels.values() for text in texts]
    labels.append("abcdefghijklmnopqrstuvwxyzäöüß -")
    model = char_model(labels)

    report = evaluate_backtranslation(tadirah, "de", PREF_LABEL, mock_dict_translate, model=model)
    assert report.term_count == 42
    assert report.untranslated == 0
    assert report.macro["exact"] == 15 / 42
    for m in MEASURES:
        assert 0.0 <= report.macro[m] <= 1.0
    assert report.zero_vectors == 0


def test_identity_replay_is_perfect(tadirah):
    _, removed = strip_language(tadirah, "de")

    def replay(stripped):
        out = copy_thesaurus(stripped)
        restore_labels(out, removed)
        return out

    model = char_model([t for texts in removed.values() for t in texts])
    report = evaluate_backtranslation(tadirah, "de", PREF_LABEL, replay, model=model)
    for m in ("exact", "levenshtein", "jaro_winkler"):
        assert report.macro[m] == 1.0
    assert report.macro["cosine"] == pytest.approx(1.0, abs=1e-6)
    assert report.exact_case_sensitive_rate == 1.0


def test_untranslated_terms_score_zero(tadirah):
    report = evaluate_backtranslation(tadirah, "de", PREF_LABEL, lambda t: t, measures=STRING_MEASURES)
    assert report.untranslated == 42
    assert all(v == 0.0 for v in report.macro.values())


def test_evaluation_needs_the_language(tadirah):
    with pytest.raises(LanguageMissing):
        evaluate_backtranslation(tadirah, "fr", PREF_LABEL, lambda t: t, measures=STRING_MEASURES)
    with pytest.raises(ModelMissing):
        evaluate_backtranslation(tadirah, "de", PREF_LABEL, lambda t: t)


def test_several_originals_use_the_best_match(three_concepts):
    def answer(t):
        out = copy_thesaurus(t)
        add_translation(out, "http://example.org/thes/gloss", PREF_LABEL, "Marginalie", "de")
        return out

    report = evaluate_backtranslation(three_concepts, "de", PREF_LABEL, answer, measures=STRING_MEASURES)
    (term,) = report.terms
    assert term.originals == ["Marginalie", "Randnotiz"]
    assert term.scores.exact == 1


def test_report_outputs(tmp_path, tadirah):
    de = evaluate_backtranslation(tadirah, "de", PREF_LABEL, mock_dict_translate, measures=STRING_MEASURES)
    en = evaluate_backtranslation(tadirah, "en", PREF_LABEL, lambda t: t, measures=STRING_MEASURES)

    de.to_json(tmp_path / "de.json")
    payload = json.loads((tmp_path / "de.json").read_text(encoding="utf-8"))
    assert payload["summary"]["terms"] == 42
    assert len(payload["terms"]) == 42

    df = summary_frame([de, en])
    assert list(df["language"]) == ["de", "en", "all"]
    assert df.loc[2, "exact"] == pytest.approx((15 / 42 + 0.0) / 2)

    de.to_csv(tmp_path / "de.csv")
    assert pd.read_csv(tmp_path / "de.csv").loc[0, "terms"] == 42
