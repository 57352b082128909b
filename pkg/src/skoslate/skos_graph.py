"""
SKOS thesaurus access for skoslate.

Parses Turtle / RDF/XML into an rdflib graph, exposes concepts as translation
units (`Term`), and writes translated literals back. A `Thesaurus` may be read
from many threads at once; mutations (`add_translation`, `mark_generated`) are
meant to run from a single writer after candidate gathering.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
from xml.sax import SAXParseException

from rdflib import BNode, Graph, Literal, URIRef
from rdflib.namespace import DC, DCTERMS, RDF, RDFS, SKOS
from rdflib.term import Identifier

from .errors import ParseError, SerializeError, UnknownConcept, UnsupportedFormat
from .utils import UNDETERMINED, ensure_dir, is_lang_tag, same_language, stable_key

log = logging.getLogger(__name__)

GENERATED_NOTE = "machine-translated by skoslate"

_RDFLIB_FORMATS = {"turtle": "turtle", "rdfxml": "xml"}
_EXTENSIONS = {".ttl": "turtle", ".turtle": "turtle", ".rdf": "rdfxml", ".xml": "rdfxml", ".owl": "rdfxml"}

# scheme-level text used as prompt context, most specific first
_SCHEME_TEXT_PROPS = (
    DCTERMS.description, DC.description, RDFS.comment, SKOS.definition,
    DCTERMS.title, DC.title, RDFS.label, SKOS.prefLabel,
)

NodeRef = Union[str, Identifier]


@dataclass(frozen=True)
class LabelProperty:
    property_iri: URIRef = SKOS.prefLabel

    def __post_init__(self) -> None:
        iri = str(self.property_iri)
        scheme, sep, rest = iri.partition(":")
        if not sep or not scheme[:1].isalpha() or not rest:
            raise ValueError(f"label property must be an absolute IRI, got {iri!r}")
        object.__setattr__(self, "property_iri", URIRef(iri))

    @classmethod
    def from_name(cls, name: str) -> "LabelProperty":
        """'prefLabel', 'skos:altLabel' or a full IRI."""
        if name.startswith("skos:"):
            return cls(SKOS[name[5:]])
        if name in ("prefLabel", "altLabel", "hiddenLabel", "definition"):
            return cls(SKOS[name])
        return cls(URIRef(name))

    @property
    def name(self) -> str:
        iri = str(self.property_iri)
        return iri.rsplit("#", 1)[-1].rsplit("/", 1)[-1]

    @property
    def multi_valued(self) -> bool:
        # SKOS allows one prefLabel per language; every other label property is open
        return self.property_iri != SKOS.prefLabel


PREF_LABEL = LabelProperty()


@dataclass
class Term:
    iri: str                                   # IRI, or stable "_:" key for blank nodes
    labels: Dict[str, List[str]]               # lower-cased tag -> texts
    definitions: Dict[str, str] = field(default_factory=dict)
    broader: List[str] = field(default_factory=list)
    node: Optional[Identifier] = field(default=None, repr=False, compare=False)

    def has_language(self, lang: str) -> bool:
        return any(same_language(tag, lang) for tag in self.labels)

    def labels_in(self, lang: str) -> List[str]:
        out: List[str] = []
        for tag in sorted(self.labels):
            if same_language(tag, lang):
                out.extend(self.labels[tag])
        return out

    def definition_for(self, lang: str) -> Optional[str]:
        """Definition in `lang`, else English, else the first by tag."""
        for tag in sorted(self.definitions):
            if same_language(tag, lang):
                return self.definitions[tag]
        for tag in sorted(self.definitions):
            if same_language(tag, "en"):
                return self.definitions[tag]
        if self.definitions:
            return self.definitions[sorted(self.definitions)[0]]
        return None


@dataclass
class Thesaurus:
    graph: Graph
    scheme_description: Optional[str] = None
    source_path: str = ""
    _bnode_keys: Dict[BNode, str] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.graph)

    def key_for(self, node: Identifier) -> str:
        if isinstance(node, BNode):
            key = self._bnode_keys.get(node)
            if key is None:
                desc = sorted((str(p), o.n3()) for p, o in self.graph.predicate_objects(node))
                base = "_:" + stable_key(*desc)[:16]
                # identical descriptions still need distinct keys
                taken = set(self._bnode_keys.values())
                key, n = base, 1
                while key in taken:
                    n += 1
                    key = f"{base}-{n}"
                self._bnode_keys[node] = key
            return key
        return str(node)

    def resolve(self, ref: NodeRef) -> Identifier:
        if isinstance(ref, Identifier):
            return ref
        if ref.startswith("_:"):
            for node, key in self._bnode_keys.items():
                if key == ref:
                    return node
            raise UnknownConcept(f"unknown blank-node concept {ref}")
        return URIRef(ref)

    def index_blank_nodes(self) -> None:
        for s in set(self.graph.subjects()):
            if isinstance(s, BNode):
                self.key_for(s)


def _guess_format(path: Path) -> str:
    fmt = _EXTENSIONS.get(path.suffix.lower())
    if fmt:
        return fmt
    with path.open("rb") as fh:
        head = fh.read(2048).decode("utf-8", errors="ignore").lstrip()
    if head.startswith("<?xml") or "<rdf:RDF" in head:
        return "rdfxml"
    if head.startswith(("@prefix", "@base", "PREFIX", "BASE", "<", "#")) or not head:
        return "turtle"
    raise UnsupportedFormat(f"cannot infer RDF format of {path}")


def _parse_error(exc: Exception, path: Path) -> ParseError:
    if isinstance(exc, SAXParseException):
        return ParseError(exc.getMessage(), path=str(path),
                          line=exc.getLineNumber(), column=exc.getColumnNumber())
    line = getattr(exc, "lines", None)
    column = None
    text, pos = getattr(exc, "_str", None), getattr(exc, "_i", None)
    if isinstance(text, str) and isinstance(pos, int):
        column = pos - text.rfind("\n", 0, pos)
    why = getattr(exc, "_why", None) or str(exc)
    return ParseError(str(why), path=str(path),
                      line=line + 1 if isinstance(line, int) else None, column=column)


def _scheme_description(g: Graph) -> Optional[str]:
    schemes = sorted(g.subjects(RDF.type, SKOS.ConceptScheme), key=str)
    for prop in _SCHEME_TEXT_PROPS:
        for scheme in schemes:
            lits = [o for o in g.objects(scheme, prop) if isinstance(o, Literal) and str(o).strip()]
            if not lits:
                continue
            lits.sort(key=lambda o: (not same_language(o.language, "en"), o.language is not None, str(o)))
            return str(lits[0]).strip()
    return None


def parse_thesaurus(path: Path | str, format: str = "auto") -> Thesaurus:
    path = Path(path)
    if not path.exists():
        raise ParseError("file not found", path=str(path))
    if format == "auto":
        format = _guess_format(path)
    if format not in _RDFLIB_FORMATS:
        raise UnsupportedFormat(f"unsupported RDF format {format!r} (use turtle, rdfxml or auto)")

    g = Graph()
    try:
        g.parse(str(path), format=_RDFLIB_FORMATS[format])
    except Exception as exc:  # rdflib raises parser-specific types
        raise _parse_error(exc, path) from exc

    t = Thesaurus(graph=g, scheme_description=_scheme_description(g), source_path=str(path))
    t.index_blank_nodes()
    log.debug("Parsed %s: %d triples", path, len(g))
    return t


def copy_thesaurus(t: Thesaurus) -> Thesaurus:
    g = Graph()
    for prefix, ns in t.graph.namespaces():
        g.bind(prefix, ns, override=True)
    for triple in t.graph:
        g.add(triple)
    return Thesaurus(graph=g, scheme_description=t.scheme_description,
                     source_path=t.source_path, _bnode_keys=dict(t._bnode_keys))


def extract_terms(t: Thesaurus, prop: LabelProperty = PREF_LABEL) -> List[Term]:
    g = t.graph
    terms: List[Term] = []
    for subj in set(g.subjects(prop.property_iri, None)):
        labels: Dict[str, List[str]] = {}
        for obj in g.objects(subj, prop.property_iri):
            if not isinstance(obj, Literal):
                continue
            text = str(obj).strip()
            if not text:
                continue
            tag = obj.language.lower() if obj.language else UNDETERMINED
            labels.setdefault(tag, []).append(text)
        if not labels:
            continue
        for texts in labels.values():
            texts.sort()

        definitions: Dict[str, str] = {}
        for obj in sorted(g.objects(subj, SKOS.definition), key=str):
            if isinstance(obj, Literal) and str(obj).strip():
                tag = obj.language.lower() if obj.language else UNDETERMINED
                definitions.setdefault(tag, str(obj).strip())

        broader = sorted(t.key_for(o) for o in g.objects(subj, SKOS.broader))
        terms.append(Term(t.key_for(subj), labels, definitions, broader, node=subj))

    terms.sort(key=lambda term: term.iri)
    return terms


def add_translation(t: Thesaurus, iri: NodeRef, prop: LabelProperty, text: str, lang: str) -> None:
    text = text.strip()
    if not text:
        raise ValueError("translation text is empty")
    if not is_lang_tag(lang):
        raise ValueError(f"malformed language tag {lang!r}")
    node = t.resolve(iri)
    if (node, None, None) not in t.graph:
        raise UnknownConcept(f"{iri} is not a subject of the thesaurus")
    t.graph.add((node, prop.property_iri, Literal(text, lang=lang)))


def mark_generated(t: Thesaurus, iri: NodeRef, prop: LabelProperty, lang: str) -> None:
    node = t.resolve(iri)
    note = Literal(f"{prop.name}@{lang} {GENERATED_NOTE}", lang="en")
    t.graph.add((node, SKOS.editorialNote, note))


class StrippedLabel(str):
    """Text of a removed literal; `lang` keeps its exact tag (e.g. de-AT)."""

    lang: str

    def __new__(cls, text: str, lang: str) -> "StrippedLabel":
        obj = super().__new__(cls, text)
        obj.lang = lang
        return obj


def labels_for(t: Thesaurus, ref: NodeRef, lang: str, prop: LabelProperty = PREF_LABEL) -> List[str]:
    """`prop` literals of one concept in `lang` (any region), sorted."""
    node = t.resolve(ref)
    return sorted(str(o).strip() for o in t.graph.objects(node, prop.property_iri)
                  if isinstance(o, Literal) and o.language and same_language(o.language, lang)
                  and str(o).strip())


def strip_language(t: Thesaurus, lang: str, prop: LabelProperty = PREF_LABEL
                   ) -> Tuple[Thesaurus, Dict[str, List[StrippedLabel]]]:
    """Copy of `t` without `prop` literals in `lang`, plus the removed texts by concept."""
    out = copy_thesaurus(t)
    removed: Dict[str, List[StrippedLabel]] = {}
    for s, p, o in list(out.graph.triples((None, prop.property_iri, None))):
        if isinstance(o, Literal) and o.language and same_language(o.language, lang):
            out.graph.remove((s, p, o))
            removed.setdefault(out.key_for(s), []).append(StrippedLabel(str(o), o.language))
    for texts in removed.values():
        texts.sort()
    return out, removed


def restore_labels(t: Thesaurus, removed: Dict[str, List[StrippedLabel]],
                   prop: LabelProperty = PREF_LABEL) -> None:
    """Put literals taken out by `strip_language` back, with their original tags."""
    for iri, texts in removed.items():
        node = t.resolve(iri)
        for text in texts:
            t.graph.add((node, prop.property_iri, Literal(str(text), lang=text.lang)))


def serialize(t: Thesaurus, path: Path | str, format: str = "turtle") -> None:
    if format not in _RDFLIB_FORMATS:
        raise UnsupportedFormat(f"unsupported output format {format!r} (use turtle or rdfxml)")
    path = Path(path)
    try:
        ensure_dir(path.parent)
        data = t.graph.serialize(format=_RDFLIB_FORMATS[format], encoding="utf-8")
        path.write_bytes(data)
    except OSError as exc:
        raise SerializeError(f"cannot write {path}: {exc}") from exc
