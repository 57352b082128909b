__version__ = "0.1.0"

from .consensus import ConsensusResult, fallback_pick, score
from .pipeline import PipelineConfig, RunReport, TermOutcome, translate_thesaurus, translate_term
from .skos_graph import LabelProperty, Term, Thesaurus, parse_thesaurus, serialize, extract_terms

__all__ = [
    "ConsensusResult",
    "LabelProperty",
    "PipelineConfig",
    "RunReport",
    "Term",
    "TermOutcome",
    "Thesaurus",
    "extract_terms",
    "fallback_pick",
    "parse_thesaurus",
    "score",
    "serialize",
    "translate_term",
    "translate_thesaurus",
]
