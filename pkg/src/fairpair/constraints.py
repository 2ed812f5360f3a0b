"""Group statistics and the pairwise / pointwise constraint functions.

A constraint assigns each labeled pair (or item) a signed value whose
average under the model's predicted label distribution measures group
bias; a fair model has zero average.  Every constraint is identically
zero at label 0, so only the label-1 branch ever contributes.

True order probabilities inside the inter/intra/marginal formulas are
unknown in practice and are proxied by the observed pair labels; tests
built on synthetic data may substitute the generator's ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Item, PairSet
from .errors import ConstraintUndefined, ValidationError


class ConstraintKind(Enum):
    """Selector over the supported constraint families."""

    PAIR_STATISTICAL = "statistical"
    PAIR_INTER_GROUP = "inter"
    PAIR_INTRA_GROUP = "intra"
    PAIR_MARGINAL = "marginal"
    POINT_STATISTICAL = "point_statistical"
    POINT_EQUAL_OPPORTUNITY = "point_equal_opportunity"

    @property
    def is_pairwise(self) -> bool:
        return self in (
            ConstraintKind.PAIR_STATISTICAL,
            ConstraintKind.PAIR_INTER_GROUP,
            ConstraintKind.PAIR_INTRA_GROUP,
            ConstraintKind.PAIR_MARGINAL,
        )

    @property
    def is_pointwise(self) -> bool:
        return not self.is_pairwise


@dataclass(eq=False)
class GroupStats:
    """Empirical group statistics of a pair set and its source items.

    pair_frac[k, l]      fraction of pairs whose items fall in (G_k, G_l)
    pos_pair_frac[k, l]  fraction of pairs in (G_k, G_l) with pair label 1
    pos_frac             fraction of all pairs with pair label 1
    item_frac[k]         fraction of source items in G_k
    pos_item_frac[k]     fraction of source items in G_k with label 1
    """

    pair_frac: np.ndarray
    pos_pair_frac: np.ndarray
    pos_frac: float
    item_frac: np.ndarray
    pos_item_frac: np.ndarray

    @property
    def K(self) -> int:
        return self.pair_frac.shape[0]

    @property
    def pos_item_total(self) -> float:
        return float(self.pos_item_frac.sum())


def _item_stats(ds) -> tuple[np.ndarray, np.ndarray]:
    groups = ds.flat_groups
    labels = ds.flat_labels
    n = groups.size
    item_frac = np.bincount(groups, minlength=ds.K) / n
    pos_item_frac = np.bincount(groups, weights=labels.astype(float), minlength=ds.K) / n
    return item_frac, pos_item_frac


def compute_group_stats(ps: PairSet, per_query: bool = False) -> GroupStats:
    """Count group-pair membership and positive-label proportions.

    With per_query=True the proportions are computed per query and then
    averaged across queries (queries without pairs are skipped for the
    pair statistics); the default pools all pairs.
    """
    if not ps.pairs:
        raise ValidationError("cannot compute group statistics of an empty pair set")
    K = ps.source.K
    arr = ps.arrays

    if not per_query:
        n = len(ps)
        cell = arr.group_i * K + arr.group_j
        pair_frac = (np.bincount(cell, minlength=K * K) / n).reshape(K, K)
        pos_pair_frac = (
            np.bincount(cell, weights=arr.label.astype(float), minlength=K * K) / n
        ).reshape(K, K)
        pos_frac = float(arr.label.mean())
        item_frac, pos_item_frac = _item_stats(ps.source)
        return GroupStats(pair_frac, pos_pair_frac, pos_frac, item_frac, pos_item_frac)

    pair_frac = np.zeros((K, K))
    pos_pair_frac = np.zeros((K, K))
    pos_frac = 0.0
    n_queries_with_pairs = 0
    for qi in range(len(ps.source.queries)):
        sel = arr.query_index == qi
        nq = int(sel.sum())
        if nq == 0:
            continue
        n_queries_with_pairs += 1
        cell = arr.group_i[sel] * K + arr.group_j[sel]
        pair_frac += (np.bincount(cell, minlength=K * K) / nq).reshape(K, K)
        pos_pair_frac += (
            np.bincount(cell, weights=arr.label[sel].astype(float), minlength=K * K) / nq
        ).reshape(K, K)
        pos_frac += float(arr.label[sel].mean())
    pair_frac /= n_queries_with_pairs
    pos_pair_frac /= n_queries_with_pairs
    pos_frac /= n_queries_with_pairs

    item_frac = np.zeros(K)
    pos_item_frac = np.zeros(K)
    for q in ps.source.queries:
        nq = len(q)
        item_frac += np.bincount(q.groups, minlength=K) / nq
        pos_item_frac += np.bincount(q.groups, weights=q.labels.astype(float), minlength=K) / nq
    item_frac /= len(ps.source.queries)
    pos_item_frac /= len(ps.source.queries)
    return GroupStats(pair_frac, pos_pair_frac, pos_frac, item_frac, pos_item_frac)


def compute_point_stats(ds) -> GroupStats:
    """Item-only statistics for pointwise constraints; pair fields are zeroed."""
    if ds.n_items == 0:
        raise ValidationError("cannot compute item statistics of an empty dataset")
    item_frac, pos_item_frac = _item_stats(ds)
    K = ds.K
    return GroupStats(np.zeros((K, K)), np.zeros((K, K)), 0.0, item_frac, pos_item_frac)


def pair_constraint_mask(kind: ConstraintKind, stats: GroupStats) -> np.ndarray:
    """(K, K) boolean mask of group pairs where the constraint has a value.

    An entry is False when the family does not define it (e.g. diagonal
    entries for cross-group families) or when a denominator is zero.
    """
    if not kind.is_pairwise:
        raise ValidationError(f"{kind} is not a pairwise constraint kind")
    K = stats.K
    off_diag = ~np.eye(K, dtype=bool)
    if kind is ConstraintKind.PAIR_STATISTICAL:
        return off_diag & (stats.pair_frac > 0)
    if kind is ConstraintKind.PAIR_INTER_GROUP:
        return off_diag & (stats.pos_pair_frac > 0) & (stats.pos_frac > 0)
    if kind is ConstraintKind.PAIR_INTRA_GROUP:
        return np.eye(K, dtype=bool) & (stats.pos_pair_frac > 0) & (stats.pos_frac > 0)
    # Marginal: one constraint per first-group k, replicated across l.
    row_ok = (stats.pos_pair_frac.sum(axis=1) > 0) & (stats.pos_frac > 0)
    return np.repeat(row_ok[:, None], K, axis=1)


def point_constraint_mask(kind: ConstraintKind, stats: GroupStats) -> np.ndarray:
    """(K,) boolean mask of groups where the pointwise constraint has a value."""
    if not kind.is_pointwise:
        raise ValidationError(f"{kind} is not a pointwise constraint kind")
    if kind is ConstraintKind.POINT_STATISTICAL:
        return stats.item_frac > 0
    return (stats.pos_item_frac > 0) & (stats.pos_item_total > 0)


def _pair_constraint_at_one(
    kind: ConstraintKind,
    stats: GroupStats,
    k: int,
    l: int,
    group_i,
    group_j,
    l_true,
):
    """Vectorized constraint value at pair label 1; inputs may be arrays."""
    group_i = np.asarray(group_i)
    group_j = np.asarray(group_j)
    l_true = np.asarray(l_true, dtype=np.float64)
    if kind is ConstraintKind.PAIR_STATISTICAL:
        member = (group_i == k) & (group_j == l)
        return member / stats.pair_frac[k, l] - 1.0
    if kind is ConstraintKind.PAIR_INTER_GROUP or kind is ConstraintKind.PAIR_INTRA_GROUP:
        member = (group_i == k) & (group_j == l)
        return l_true * (member / stats.pos_pair_frac[k, l] - 1.0 / stats.pos_frac)
    # Marginal: membership of the first item only, against the row total.
    member = group_i == k
    return l_true * (member / stats.pos_pair_frac[k].sum() - 1.0 / stats.pos_frac)


def pair_constraint(
    kind: ConstraintKind,
    stats: GroupStats,
    k: int,
    l: int,
    group_i: int,
    group_j: int,
    label: int,
    l_true: float | None = None,
) -> float:
    """Constraint value for one pair evaluated at the given pair label.

    ``l_true`` is the pair's true order probability; by default the
    evaluation label itself is used, which is the observed-label proxy
    when a pair is evaluated at its own label.  Raises ConstraintUndefined
    when the (k, l) entry has no value for this kind and statistics.
    """
    mask = pair_constraint_mask(kind, stats)
    if not mask[k, l]:
        raise ConstraintUndefined(f"{kind.value} constraint undefined for groups ({k},{l})")
    if label == 0:
        return 0.0
    if l_true is None:
        l_true = float(label)
    return float(_pair_constraint_at_one(kind, stats, k, l, group_i, group_j, l_true))


def point_constraint(
    kind: ConstraintKind,
    stats: GroupStats,
    k: int,
    item: Item,
    label: int,
) -> float:
    """Pointwise constraint value for one item at the given label.

    POINT_STATISTICAL compares group membership against the group's item
    share; POINT_EQUAL_OPPORTUNITY restricts the comparison to positive
    items (the observed label stands in for the unknown ground truth).
    """
    mask = point_constraint_mask(kind, stats)
    if not mask[k]:
        raise ConstraintUndefined(f"{kind.value} constraint undefined for group {k}")
    if label == 0:
        return 0.0
    member = 1.0 if item.group == k else 0.0
    if kind is ConstraintKind.POINT_STATISTICAL:
        return member / stats.item_frac[k] - 1.0
    return float(item.label) * (
        member / stats.pos_item_frac[k] - 1.0 / stats.pos_item_total
    )


def _point_constraint_at_one(
    kind: ConstraintKind, stats: GroupStats, k: int, groups, labels
):
    """Vectorized pointwise constraint at label 1 over item arrays."""
    groups = np.asarray(groups)
    labels = np.asarray(labels, dtype=np.float64)
    member = (groups == k).astype(float)
    if kind is ConstraintKind.POINT_STATISTICAL:
        return member / stats.item_frac[k] - 1.0
    return labels * (member / stats.pos_item_frac[k] - 1.0 / stats.pos_item_total)
