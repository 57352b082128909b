from __future__ import annotations

import pytest
from rdflib import Literal, URIRef
from rdflib.namespace import SKOS

from skoslate.errors import ParseError, UnknownConcept, UnsupportedFormat
from skoslate.skos_graph import (
    GENERATED_NOTE,
    PREF_LABEL,
    LabelProperty,
    add_translation,
    copy_thesaurus,
    extract_terms,
    mark_generated,
    parse_thesaurus,
    restore_labels,
    serialize,
    strip_language,
)

ANALYZING = "https://vocabs.dariah.eu/tadirah/analyzing"
GLOSS = "http://example.org/thes/gloss"


def test_tadirah_has_42_bilingual_terms(tadirah):
    terms = extract_terms(tadirah, PREF_LABEL)
    assert len(terms) == 42
    assert all(set(t.labels) == {"en", "de"} for t in terms)
    assert tadirah.scheme_description.startswith("Taxonomy of Digital Research Activities")


def test_empty_file_gives_no_terms(data_dir):
    t = parse_thesaurus(data_dir / "empty.ttl")
    assert len(t) == 0
    assert extract_terms(t) == []


def test_three_concept_fixture_triple_count(three_concepts):
    assert len(three_concepts) == 15


def test_extract_terms_filters_and_groups(three_concepts):
    terms = {t.iri: t for t in extract_terms(three_concepts, PREF_LABEL)}
    assert "http://example.org/thes/footnote" not in terms
    assert terms[GLOSS].labels["de"] == ["Marginalie", "Randnotiz"]
    assert terms["http://example.org/thes/annotating"].labels == {"und": ["Annotating"]}
    assert terms[GLOSS].definition_for("de") == "A note written in the margin of a manuscript."
    assert terms["http://example.org/thes/annotating"].broader == [GLOSS]


def test_alt_label_property(three_concepts):
    terms = extract_terms(three_concepts, LabelProperty.from_name("altLabel"))
    assert [t.iri for t in terms] == ["http://example.org/thes/footnote"]


def test_extract_terms_never_invents_languages(tadirah, three_concepts):
    for t in (tadirah, three_concepts):
        in_graph = {o.language.lower() for o in t.graph.objects(None, SKOS.prefLabel)
                    if isinstance(o, Literal) and o.language}
        seen = {tag for term in extract_terms(t) for tag in term.labels}
        assert seen <= in_graph | {"und"}


def test_label_property_names():
    assert LabelProperty.from_name("prefLabel") == PREF_LABEL
    assert LabelProperty.from_name("skos:definition").property_iri == SKOS.definition
    assert not PREF_LABEL.multi_valued
    assert LabelProperty.from_name("altLabel").multi_valued
    with pytest.raises(ValueError):
        LabelProperty(URIRef("not an iri"))


def test_add_translation_is_idempotent(tadirah):
    t = copy_thesaurus(tadirah)
    before = len(t)
    add_translation(t, ANALYZING, PREF_LABEL, "Analyse", "fr")
    assert len(t) == before + 1
    add_translation(t, ANALYZING, PREF_LABEL, "  Analyse ", "fr")
    assert len(t) == before + 1


def test_add_translation_errors(tadirah):
    with pytest.raises(UnknownConcept):
        add_translation(tadirah, "https://vocabs.dariah.eu/tadirah/nope", PREF_LABEL, "x", "de")
    with pytest.raises(ValueError):
        add_translation(tadirah, ANALYZING, PREF_LABEL, "   ", "de")
    with pytest.raises(ValueError):
        add_translation(tadirah, ANALYZING, PREF_LABEL, "x", "not a tag")


def test_copy_leaves_source_untouched(tadirah):
    before = set(tadirah.graph)
    t = copy_thesaurus(tadirah)
    add_translation(t, ANALYZING, PREF_LABEL, "Analyse", "fr")
    assert set(tadirah.graph) == before


def test_strip_language(tadirah):
    stripped, removed = strip_language(tadirah, "de")
    assert len(removed) == 42
    assert removed[ANALYZING] == ["Analyse"]
    assert all(not t.has_language("de") for t in extract_terms(stripped))

    same, nothing = strip_language(tadirah, "xx")
    assert nothing == {}
    assert set(same.graph) == set(tadirah.graph)


def test_strip_then_add_back_restores_graph(tadirah):
    stripped, removed = strip_language(tadirah, "de")
    restore_labels(stripped, removed)
    assert set(stripped.graph) == set(tadirah.graph)


@pytest.mark.parametrize("fmt,suffix", [("turtle", ".ttl"), ("rdfxml", ".rdf")])
def test_serialize_round_trip(tmp_path, data_dir, fmt, suffix):
    for name in ("tadirah.ttl", "three_concepts.ttl", "empty.ttl"):
        t = parse_thesaurus(data_dir / name)
        out = tmp_path / (name + suffix)
        serialize(t, out, fmt)
        again = parse_thesaurus(out)
        assert set(again.graph) == set(t.graph)


def test_added_literal_survives_round_trip(tmp_path, tadirah):
    t = copy_thesaurus(tadirah)
    add_translation(t, ANALYZING, PREF_LABEL, "Análisis", "es")
    serialize(t, tmp_path / "out.ttl")
    again = parse_thesaurus(tmp_path / "out.ttl")
    assert (URIRef(ANALYZING), SKOS.prefLabel, Literal("Análisis", lang="es")) in again.graph


def test_malformed_turtle_reports_position(data_dir):
    with pytest.raises(ParseError) as excinfo:
        parse_thesaurus(data_dir / "malformed.ttl")
    assert excinfo.value.line is not None
    assert "malformed.ttl" in str(excinfo.value)


def test_missing_file_and_unknown_format(tmp_path, data_dir):
    with pytest.raises(ParseError):
        parse_thesaurus(tmp_path / "absent.ttl")
    with pytest.raises(UnsupportedFormat):
        parse_thesaurus(data_dir / "tadirah.ttl", format="json-ld")
    odd = tmp_path / "vocab.data"
    odd.write_text("just some words\n", encoding="utf-8")
    with pytest.raises(UnsupportedFormat):
        parse_thesaurus(odd)


def test_format_sniffed_from_content(tmp_path, tadirah):
    rdf = tmp_path / "vocab.rdf"
    serialize(tadirah, rdf, "rdfxml")
    sniffed = tmp_path / "vocab.data"
    sniffed.write_bytes(rdf.read_bytes())
    assert set(parse_thesaurus(sniffed).graph) == set(tadirah.graph)


def test_blank_node_concepts_get_stable_keys(tmp_path):
    src = tmp_path / "bnode.ttl"
    src.write_text(
        "@prefix skos: <http://www.w3.org/2004/02/skos/core#> .\n"
        '[] a skos:Concept ; skos:prefLabel "Writing"@EN-GB .\n',
        encoding="utf-8",
    )
    keys = [extract_terms(parse_thesaurus(src))[0].iri for _ in range(2)]
    assert keys[0].startswith("_:") and keys[0] == keys[1]

    t = parse_thesaurus(src)
    term = extract_terms(t)[0]
    assert term.labels_in("en") == ["Writing"]
    add_translation(t, term.iri, PREF_LABEL, "Schreiben", "de")
    assert extract_terms(t)[0].labels_in("de") == ["Schreiben"]


def test_mark_generated_adds_editorial_note(tadirah):
    t = copy_thesaurus(tadirah)
    mark_generated(t, ANALYZING, PREF_LABEL, "fr")
    notes = [str(o) for o in t.graph.objects(URIRef(ANALYZING), SKOS.editorialNote)]
    assert notes == [f"prefLabel@fr {GENERATED_NOTE}"]


def test_restore_keeps_region_tags(tmp_path):
    src = tmp_path / "regional.ttl"
    src.write_text(
        "@prefix skos: <http://www.w3.org/2004/02/skos/core#> .\n"
        "<http://example.org/jan> a skos:Concept ;\n"
        '    skos:prefLabel "January"@en, "Jänner"@de-AT, "Januar"@de .\n',
        encoding="utf-8",
    )
    t = parse_thesaurus(src)
    stripped, removed = strip_language(t, "de")
    assert sorted(removed["http://example.org/jan"]) == ["Januar", "Jänner"]
    assert {text.lang.lower() for text in removed["http://example.org/jan"]} == {"de", "de-at"}

    restore_labels(stripped, removed)
    assert set(stripped.graph) == set(t.graph)


def test_identical_blank_node_concepts_get_distinct_keys(tmp_path):
    src = tmp_path / "twins.ttl"
    src.write_text(
        "@prefix skos: <http://www.w3.org/2004/02/skos/core#> .\n"
        '[] a skos:Concept ; skos:prefLabel "Writing"@en .\n'
        '[] a skos:Concept ; skos:prefLabel "Writing"@en .\n',
        encoding="utf-8",
    )
    t = parse_thesaurus(src)
    keys = [term.iri for term in extract_terms(t)]
    assert len(keys) == 2 and len(set(keys)) == 2

    add_translation(t, keys[0], PREF_LABEL, "Schreiben", "de")
    add_translation(t, keys[1], PREF_LABEL, "Verfassen", "de")
    german = sorted(label for term in extract_terms(t) for label in term.labels_in("de"))
    assert german == ["Schreiben", "Verfassen"]
