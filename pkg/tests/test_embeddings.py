from __future__ import annotations
import os
from pathlib import Path

import numpy as np
import pytest

from skoslate.embeddings import (
    WORD_START,
    EmbeddingModel,
    embed,
    load_embedding_model,
    model_files,
)
from skoslate.errors import ModelMissing


@pytest.fixture
def toy() -> EmbeddingModel:
    return EmbeddingModel.from_mapping("de", {
        f"{WORD_START}ana": [1.0, 0.0, 0.0],
        "lyse": [0.0, 1.0, 0.0],
        f"{WORD_START}an": [0.0, 0.0, 1.0],
        "a": [1.0, 1.0, 1.0],
        f"{WORD_START}000": [2.0, 2.0, 2.0],
    })


def test_greedy_longest_match(toy):
    assert toy.tokenize("Analyse") == [f"{WORD_START}ana", "lyse"]
    assert toy.tokenize("an a") == [f"{WORD_START}an", "a"]


def test_digits_become_zero(toy):
    assert toy.preprocess(" Jahr 1984 ") == "jahr 0000"
    assert toy.tokenize("123") == [f"{WORD_START}000"]


def test_embedding_is_mean_of_pieces(toy):
    np.testing.assert_allclose(embed("Analyse", toy), [0.5, 0.5, 0.0])


def test_unknown_word_gives_zero_vector(toy):
    assert not embed("xyz", toy).any()
    assert embed("", toy).shape == (3,)


def test_external_encoder_is_used():
    model = EmbeddingModel.from_mapping("de", {"x": [1.0, 2.0]}, encoder=lambda s: ["x", "unknown"])
    np.testing.assert_allclose(model.embed("whatever"), [1.0, 2.0])


def test_shape_checks():
    with pytest.raises(ValueError):
        EmbeddingModel("de", {"a": 0, "b": 1}, np.zeros((1, 3)))
    with pytest.raises(ValueError):
        EmbeddingModel("de", {"a": 0}, np.zeros(3))


def test_missing_model_files(tmp_path):
    with pytest.raises(ModelMissing, match="get_bpemb.sh"):
        model_files(tmp_path, "de", 1000, 25)


def test_model_files_found_in_language_subdir(tmp_path):
    sub = tmp_path / "de"
    sub.mkdir()
    (sub / "de.wiki.bpe.vs1000.model").write_bytes(b"")
    (sub / "de.wiki.bpe.vs1000.d25.w2v.bin").write_bytes(b"")
    spm_file, vec_file = model_files(tmp_path, "de", 1000, 25)
    assert spm_file.parent == sub and vec_file.name.endswith(".d25.w2v.bin")


@pytest.mark.live
@pytest.mark.skipif(not os.environ.get("SKOSLATE_BPEMB_DIR"), reason="set SKOSLATE_BPEMB_DIR to BPEmb files")
def test_load_published_model():
    pytest.importorskip("sentencepiece")
    pytest.importorskip("gensim")
    model = load_embedding_model(Path(os.environ["SKOSLATE_BPEMB_DIR"]), "de")
    assert model.dim == 25
    assert embed("Analyse", model).any()
