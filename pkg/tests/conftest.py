"""Shared builders for hand-constructed datasets."""

import numpy as np
import pytest

from fairpair.data import Dataset, Item, QueryGroup


def build_query(query_id, labels, groups, features):
    """Build a QueryGroup from parallel per-item lists."""
    items = [
        Item(np.asarray(f, dtype=np.float64), int(l), int(g))
        for l, g, f in zip(labels, groups, features)
    ]
    return QueryGroup(query_id, items)


def build_dataset(queries, d, K):
    """queries: list of (query_id, labels, groups, features)."""
    return Dataset([build_query(*q) for q in queries], d=d, K=K).validate()


def random_dataset(rng, n_queries=4, items_per_query=8, d=3, K=2):
    """A small random dataset with mixed labels in every query."""
    queries = []
    for qi in range(n_queries):
        labels = rng.integers(0, 2, size=items_per_query)
        # Force at least one of each label so every query has pairs.
        labels[0], labels[1] = 0, 1
        groups = rng.integers(0, K, size=items_per_query)
        feats = rng.normal(size=(items_per_query, d))
        queries.append((f"q{qi}", labels, groups, feats))
    return build_dataset(queries, d=d, K=K)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
