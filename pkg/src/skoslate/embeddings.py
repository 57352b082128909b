"""
Subword (BPE) embeddings for the cosine measure.

A word vector is the mean of the vectors of its subword pieces, so unseen
words still get a vector. Pretrained per-language models are the published
BPEmb files (`<lang>.wiki.bpe.vs<V>.model` + `<lang>.wiki.bpe.vs<V>.d<D>.w2v.bin`),
fetched with scripts/get_bpemb.sh.
"""
from __future__ import annotations
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import ModelMissing
from .utils import nfc, primary_subtag

log = logging.getLogger(__name__)

WORD_START = "▁"
DEFAULT_VOCAB_SIZE = 1000   # smallest published vocabulary
DEFAULT_DIM = 25            # smallest published dimension

_DIGITS = re.compile(r"\d")


@dataclass
class EmbeddingModel:
    language: str
    pieces: Dict[str, int]                   # piece -> row in `vectors`
    vectors: np.ndarray                      # shape (n_pieces, dim)
    encoder: Optional[Callable[[str], List[str]]] = field(default=None, repr=False)
    lowercase: bool = True
    digits_to_zero: bool = True

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if self.vectors.shape[0] != len(self.pieces):
            raise ValueError(f"{len(self.pieces)} pieces but {self.vectors.shape[0]} vectors")

    @classmethod
    def from_mapping(cls, language: str, table: Mapping[str, Sequence[float]], **kw) -> "EmbeddingModel":
        names = list(table)
        vectors = np.array([table[n] for n in names], dtype=np.float64)
        return cls(language, {n: i for i, n in enumerate(names)}, vectors, **kw)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def preprocess(self, text: str) -> str:
        text = nfc(text).strip()
        if self.lowercase:
            text = text.lower()
        if self.digits_to_zero:
            text = _DIGITS.sub("0", text)
        return text

    def _greedy(self, word: str) -> List[str]:
        # longest match from the left; unknown characters are skipped
        out: List[str] = []
        s = WORD_START + word
        i = 0
        while i < len(s):
            for j in range(len(s), i, -1):
                if s[i:j] in self.pieces:
                    out.append(s[i:j])
                    i = j
                    break
            else:
                i += 1
        return out

    def tokenize(self, text: str) -> List[str]:
        text = self.preprocess(text)
        if not text:
            return []
        if self.encoder is not None:
            return list(self.encoder(text))
        return [p for word in text.split() for p in self._greedy(word)]

    def embed(self, text: str) -> np.ndarray:
        """Mean of the piece vectors over all words; zeros if no piece is known."""
        rows = [self.pieces[p] for p in self.tokenize(text) if p in self.pieces]
        if not rows:
            return np.zeros(self.dim)
        return self.vectors[rows].mean(axis=0)


def embed(word: str, model: EmbeddingModel) -> np.ndarray:
    return model.embed(word)


def model_files(directory: Path, lang: str, vs: int = DEFAULT_VOCAB_SIZE,
                dim: int = DEFAULT_DIM) -> tuple[Path, Path]:
    stem = f"{lang}.wiki.bpe.vs{vs}"
    for base in (directory / lang, directory):
        spm_file = base / f"{stem}.model"
        vec_file = base / f"{stem}.d{dim}.w2v.bin"
        if spm_file.exists() and vec_file.exists():
            return spm_file, vec_file
    raise ModelMissing(
        f"no {stem} model (d{dim}) under {directory}; fetch it with "
        f"scripts/get_bpemb.sh {lang} {vs} {dim} {directory}"
    )


def load_embedding_model(directory: Path | str, lang: str, vs: int = DEFAULT_VOCAB_SIZE,
                         dim: int = DEFAULT_DIM) -> EmbeddingModel:
    lang = primary_subtag(lang)
    spm_file, vec_file = model_files(Path(directory).expanduser(), lang, vs, dim)
    try:
        import sentencepiece as spm
        from gensim.models import KeyedVectors
    except ImportError as exc:
        raise ModelMissing("cosine similarity needs the 'embeddings' extra "
                           "(pip install 'skoslate[embeddings]')") from exc

    sp = spm.SentencePieceProcessor()
    sp.Load(str(spm_file))
    kv = KeyedVectors.load_word2vec_format(str(vec_file), binary=True)
    pieces = {p: i for i, p in enumerate(kv.index_to_key)}
    log.info("Loaded %s embeddings: %d pieces x %d dims", lang, len(pieces), kv.vector_size)
    return EmbeddingModel(lang, pieces, kv.vectors, encoder=sp.EncodeAsPieces)
