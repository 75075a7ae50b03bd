"""Shared fixtures: the corpus is loaded once per test session."""

import pytest

from hpt import corpus

_cache = None


def load_corpus_cached():
    global _cache
    if _cache is None:
        _cache = corpus.load_corpus()
    return _cache


@pytest.fixture(scope="session")
def corpus_loaded():
    return load_corpus_cached()
