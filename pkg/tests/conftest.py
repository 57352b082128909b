from __future__ import annotations
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Union

import pytest

from skoslate.mock import DictionaryTranslator, mock_descriptor
from skoslate.providers import BaseTranslator, ProviderRegistry, RetryPolicy
from skoslate.skos_graph import Thesaurus, parse_thesaurus

DATA = Path(__file__).parent / "data"

NO_SLEEP = RetryPolicy(max_retries=3, backoff=0.0, sleep=lambda s: None)

ProviderSpec = Union[BaseTranslator, Mapping[str, str]]


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def tadirah() -> Thesaurus:
    return parse_thesaurus(DATA / "tadirah.ttl")


@pytest.fixture
def three_concepts() -> Thesaurus:
    return parse_thesaurus(DATA / "three_concepts.ttl")


@pytest.fixture
def make_registry() -> Callable[..., ProviderRegistry]:
    """
    Build a registry from {id: translator-or-en->de-mapping}; ranks follow
    insertion order. Retries never sleep.
    """

    def build(providers: Dict[str, ProviderSpec], *, cache=None, max_inflight: int = 8,
              retry: Optional[RetryPolicy] = None, src: str = "en", tgt: str = "de") -> ProviderRegistry:
        registry = ProviderRegistry(cache=cache, retry=retry or NO_SLEEP, max_inflight=max_inflight)
        for rank, (pid, impl) in enumerate(providers.items(), start=1):
            if isinstance(impl, Mapping):
                impl = DictionaryTranslator.from_pairs(src, tgt, impl, provider_id=pid)
            registry.register(mock_descriptor(pid, rank), impl)
        return registry

    return build
