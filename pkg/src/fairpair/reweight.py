"""Closed-form pair weights and the iterative coefficient-learning loop.

Each group pair (k, l) carries a coefficient; a pair's weight is the
normalized exponential of the coefficient-weighted constraint values over
the two possible pair labels.  Because every constraint vanishes at label
0, the label-1 weight reduces to a sigmoid of the constraint sum.  The
outer loop alternates between measuring the model's constraint violation,
nudging the coefficients against it, reweighting the pairs, and retraining
from scratch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation
from .constraints import (
    ConstraintKind,
    GroupStats,
    _pair_constraint_at_one,
    _point_constraint_at_one,
    compute_group_stats,
    compute_point_stats,
    pair_constraint_mask,
    point_constraint_mask,
)
from .data import Dataset, PairSet, make_pairs
from .errors import ValidationError
from .model import LinearRankingModel, clamp_prob, stable_sigmoid
from .training import TrainConfig, train_pointwise, train_weighted


@dataclass(eq=False)
class Coefficients:
    """Per-group-pair multipliers driving the closed-form pair weights."""

    values: np.ndarray  # (K, K)
    kind: ConstraintKind

    @classmethod
    def zeros(cls, K: int, kind: ConstraintKind) -> "Coefficients":
        return cls(np.zeros((K, K)), kind)


@dataclass(eq=False)
class DeltaMatrix:
    """Constraint violations per group pair; undefined entries read 0."""

    values: np.ndarray  # (K, K)
    defined: np.ndarray  # (K, K) bool


@dataclass(frozen=True)
class FairTrainConfig:
    eta_lambda: float = 1.0
    T: int = 20
    inner: TrainConfig = field(default_factory=TrainConfig)
    weight_form: str = "general"  # or "indicator"
    delta_set: str = "train"  # or "validation"
    warm_start: bool = False

    def __post_init__(self):
        if self.eta_lambda <= 0:
            raise ValidationError("eta_lambda must be > 0")
        if self.T < 0:
            raise ValidationError("T must be >= 0")
        if self.weight_form not in ("general", "indicator"):
            raise ValidationError(f"unknown weight_form {self.weight_form!r}")
        if self.delta_set not in ("train", "validation"):
            raise ValidationError(f"unknown delta_set {self.delta_set!r}")


@dataclass(eq=False)
class IterationRecord:
    """Snapshot of one outer-loop iteration."""

    iteration: int
    auc_train: float
    auc_eval: float
    fairness_train: float
    fairness_eval: float
    delta: np.ndarray  # (K, K) violation that drove this iteration's update
    coeffs: np.ndarray  # (K, K) coefficients after the update


def expected_bias(
    model: LinearRankingModel, ps: PairSet, stats: GroupStats, kind: ConstraintKind
) -> DeltaMatrix:
    """Mean predicted-order-probability-weighted constraint per group pair.

    Only the label-1 term contributes because constraints vanish at label
    0.  Entries whose constraint is undefined are masked and read 0.
    """
    if not kind.is_pairwise:
        raise ValidationError(f"{kind} is not a pairwise constraint kind")
    if not ps.pairs:
        raise ValidationError("cannot evaluate expected bias on an empty pair set")
    arr = ps.arrays
    l_hat = clamp_prob(stable_sigmoid(arr.feat_diff @ model.w))
    proxy = arr.label.astype(np.float64)
    mask = pair_constraint_mask(kind, stats)
    K = stats.K
    values = np.zeros((K, K))
    for k in range(K):
        for l in range(K):
            if mask[k, l]:
                c = _pair_constraint_at_one(kind, stats, k, l, arr.group_i, arr.group_j, proxy)
                values[k, l] = float(np.mean(l_hat * c))
    return DeltaMatrix(values, mask)


def _weight_exponent_general(coeffs, stats, mask, group_i, group_j, l_true):
    s = np.zeros_like(np.asarray(group_i, dtype=np.float64))
    for k in range(stats.K):
        for l in range(stats.K):
            if mask[k, l] and coeffs.values[k, l] != 0.0:
                s += coeffs.values[k, l] * _pair_constraint_at_one(
                    coeffs.kind, stats, k, l, group_i, group_j, l_true
                )
    return s


def _normalized_pair(s):
    """Weights (w0, w1) proportional to exp(0) and exp(s), overflow-safe."""
    s = np.asarray(s, dtype=np.float64)
    m = np.maximum(s, 0.0)
    e0 = np.exp(-m)
    e1 = np.exp(s - m)
    denom = e0 + e1
    return e0 / denom, e1 / denom


def pair_weight(
    coeffs: Coefficients,
    stats: GroupStats,
    group_i: int,
    group_j: int,
    pair_label: int,
    l_true: float | None = None,
    weight_form: str = "general",
) -> float:
    """Closed-form weight of one pair at the given label.

    The exponent is the coefficient-weighted constraint sum at label 1
    (the "general" form) or the bare group-pair coefficient (the
    "indicator" form); label 0 always has exponent 0.  Weights for the two
    labels sum to 1.
    """
    if l_true is None:
        l_true = float(pair_label)
    if weight_form == "general":
        mask = pair_constraint_mask(coeffs.kind, stats)
        s = float(
            _weight_exponent_general(
                coeffs, stats, mask, np.asarray([group_i]), np.asarray([group_j]), l_true
            )[0]
        )
    elif weight_form == "indicator":
        mask = pair_constraint_mask(coeffs.kind, stats)
        s = float(coeffs.values[group_i, group_j]) if mask[group_i, group_j] else 0.0
    else:
        raise ValidationError(f"unknown weight_form {weight_form!r}")
    w0, w1 = _normalized_pair(s)
    return float(w1) if pair_label == 1 else float(w0)


def pair_weights(
    coeffs: Coefficients,
    stats: GroupStats,
    ps: PairSet,
    weight_form: str = "general",
) -> np.ndarray:
    """Weight of every pair at its observed label, aligned with ps order."""
    arr = ps.arrays
    if weight_form == "general":
        mask = pair_constraint_mask(coeffs.kind, stats)
        proxy = arr.label.astype(np.float64)
        s = _weight_exponent_general(coeffs, stats, mask, arr.group_i, arr.group_j, proxy)
    elif weight_form == "indicator":
        mask = pair_constraint_mask(coeffs.kind, stats)
        masked = np.where(mask, coeffs.values, 0.0)
        s = masked[arr.group_i, arr.group_j]
    else:
        raise ValidationError(f"unknown weight_form {weight_form!r}")
    w0, w1 = _normalized_pair(s)
    return np.where(arr.label == 1, w1, w0)


def update_coefficients(coeffs: Coefficients, delta: DeltaMatrix, eta: float) -> Coefficients:
    """Step the coefficients against the measured violation; masked entries stay put."""
    step = np.where(delta.defined, delta.values, 0.0)
    return Coefficients(coeffs.values - eta * step, coeffs.kind)


def fair_train(
    train: Dataset,
    eval_set: Dataset,
    kind: ConstraintKind,
    cfg: FairTrainConfig,
) -> tuple[LinearRankingModel, Coefficients, list[IterationRecord]]:
    """Iteratively reweight pairs and retrain until the loop budget is spent.

    Starts from zero coefficients (uniform weights) and an unconstrained
    model, then repeats T times: measure the violation on the configured
    delta set, step the coefficients against it, recompute all pair
    weights, and retrain from scratch (or warm-start when configured).
    History carries one record per iteration with metrics on both sets.
    """
    if not kind.is_pairwise:
        raise ValidationError(f"{kind} is not a pairwise constraint kind")
    if train.K < 2:
        raise ValidationError("fair training requires at least two groups")

    ps_train = make_pairs(train)
    if not ps_train.pairs:
        raise ValidationError("training set has no discordant pairs")
    stats_train = compute_group_stats(ps_train)

    coeffs = Coefficients.zeros(train.K, kind)
    weights = pair_weights(coeffs, stats_train, ps_train, cfg.weight_form)
    model = train_weighted(ps_train, weights, cfg.inner)
    history: list[IterationRecord] = []
    if cfg.T == 0:
        return model, coeffs, history

    if cfg.delta_set == "validation":
        ps_delta = make_pairs(eval_set)
        if not ps_delta.pairs:
            raise ValidationError("validation set has no discordant pairs")
        stats_delta = compute_group_stats(ps_delta)
    else:
        ps_delta, stats_delta = ps_train, stats_train

    ps_eval = make_pairs(eval_set)
    if not ps_eval.pairs:
        raise ValidationError("evaluation set has no discordant pairs")
    stats_eval = compute_group_stats(ps_eval)

    for t in range(1, cfg.T + 1):
        delta = expected_bias(model, ps_delta, stats_delta, kind)
        coeffs = update_coefficients(coeffs, delta, cfg.eta_lambda)
        weights = pair_weights(coeffs, stats_train, ps_train, cfg.weight_form)
        init = model if cfg.warm_start else None
        model = train_weighted(ps_train, weights, cfg.inner, init=init)
        history.append(
            IterationRecord(
                iteration=t,
                auc_train=evaluation.auc(model, train)[0],
                auc_eval=evaluation.auc(model, eval_set)[0],
                fairness_train=evaluation.fairness_score(
                    expected_bias(model, ps_train, stats_train, kind)
                ),
                fairness_eval=evaluation.fairness_score(
                    expected_bias(model, ps_eval, stats_eval, kind)
                ),
                delta=delta.values.copy(),
                coeffs=coeffs.values.copy(),
            )
        )
    return model, coeffs, history


def point_expected_bias(
    model: LinearRankingModel, ds: Dataset, stats: GroupStats, kind: ConstraintKind
) -> tuple[np.ndarray, np.ndarray]:
    """Per-group item-level violation and its defined mask."""
    if not kind.is_pointwise:
        raise ValidationError(f"{kind} is not a pointwise constraint kind")
    p = clamp_prob(stable_sigmoid(ds.flat_features @ model.w + model.b))
    groups = ds.flat_groups
    labels = ds.flat_labels
    mask = point_constraint_mask(kind, stats)
    values = np.zeros(stats.K)
    for k in range(stats.K):
        if mask[k]:
            c = _point_constraint_at_one(kind, stats, k, groups, labels)
            values[k] = float(np.mean(p * c))
    return values, mask


def point_weights(
    coeffs: np.ndarray, stats: GroupStats, ds: Dataset, kind: ConstraintKind
) -> np.ndarray:
    """Per-item weight at the observed label, normalized over both labels."""
    mask = point_constraint_mask(kind, stats)
    groups = ds.flat_groups
    labels = ds.flat_labels
    s = np.zeros(groups.size)
    for k in range(stats.K):
        if mask[k] and coeffs[k] != 0.0:
            s += coeffs[k] * _point_constraint_at_one(kind, stats, k, groups, labels)
    w0, w1 = _normalized_pair(s)
    return np.where(labels == 1, w1, w0)


def pointwise_reweight_train(
    train: Dataset,
    eval_set: Dataset,
    kind: ConstraintKind,
    cfg: FairTrainConfig,
) -> LinearRankingModel:
    """Item-level analog of fair_train: weighted logistic regression.

    Coefficients live per group; weights multiply each item's label loss.
    The returned model is scored exactly like the pairwise one.
    """
    if not kind.is_pointwise:
        raise ValidationError(f"{kind} is not a pointwise constraint kind")
    stats = compute_point_stats(train)
    coeffs = np.zeros(train.K)
    weights = point_weights(coeffs, stats, train, kind)
    model = train_pointwise(train, weights, cfg.inner)

    if cfg.delta_set == "validation":
        ds_delta = eval_set
        stats_delta = compute_point_stats(eval_set)
    else:
        ds_delta, stats_delta = train, stats

    for _ in range(cfg.T):
        values, mask = point_expected_bias(model, ds_delta, stats_delta, kind)
        coeffs = coeffs - cfg.eta_lambda * np.where(mask, values, 0.0)
        weights = point_weights(coeffs, stats, train, kind)
        init = model if cfg.warm_start else None
        model = train_pointwise(train, weights, cfg.inner, init=init)
    return model


@dataclass(eq=False)
class EnumeratedInstance:
    """A finite universe of feature pairs for exact objective checks.

    mass[x] is the sampling probability of pair x, true_pos[x] the true
    order probability, constraint_pos[x, k, l] the constraint value at
    label 1 (label 0 values default to zero), and predicted_pos[x] the
    model's order probability at some arbitrary fixed model.
    """

    mass: np.ndarray  # (n,)
    true_pos: np.ndarray  # (n,)
    constraint_pos: np.ndarray  # (n, K, K)
    predicted_pos: np.ndarray  # (n,)
    constraint_neg: np.ndarray | None = None


def _instance_losses(inst: EnumeratedInstance, loss: str) -> tuple[np.ndarray, np.ndarray]:
    p = clamp_prob(inst.predicted_pos)
    if loss == "cross_entropy":
        return -np.log1p(-p), -np.log(p)
    if loss == "squared":
        return p**2, (p - 1.0) ** 2
    raise ValidationError(f"unknown loss {loss!r}")


def bias_correction_identity(
    inst: EnumeratedInstance, coeffs: Coefficients, loss: str = "cross_entropy"
) -> tuple[float, float]:
    """Evaluate both sides of the reweighting equivalence by enumeration.

    The biased label distribution is constructed so that the true labels
    are its coefficient-tilted exponential family member; the left side is
    the weighted objective under biased labels, the right side the scaled
    objective under true labels on the correspondingly tilted feature
    distribution.  The two agree identically for any loss.
    """
    lam = coeffs.values
    s1 = np.einsum("nkl,kl->n", inst.constraint_pos, lam)
    if inst.constraint_neg is not None:
        s0 = np.einsum("nkl,kl->n", inst.constraint_neg, lam)
    else:
        s0 = np.zeros_like(s1)
    e1 = np.exp(s1)
    e0 = np.exp(s0)
    w1 = e1 / (e0 + e1)
    w0 = e0 / (e0 + e1)

    # Invert the tilt: biased label odds are the true odds divided by exp(s).
    b1 = inst.true_pos / e1
    b0 = (1.0 - inst.true_pos) / e0
    norm = b1 + b0
    b1 /= norm
    b0 /= norm

    phi = w1 * b1 + w0 * b0
    scale = float(np.sum(inst.mass * phi))
    tilted_mass = inst.mass * phi / scale

    loss0, loss1 = _instance_losses(inst, loss)
    lhs = float(np.sum(inst.mass * (b1 * w1 * loss1 + b0 * w0 * loss0)))
    rhs = scale * float(
        np.sum(tilted_mass * (inst.true_pos * loss1 + (1.0 - inst.true_pos) * loss0))
    )
    return lhs, rhs


def write_history_csv(history: list[IterationRecord], K: int, path) -> None:
    """One CSV row per outer iteration, violations and coefficients flattened row-major."""
    delta_cols = [f"delta_{k}{l}" for k in range(K) for l in range(K)]
    lambda_cols = [f"lambda_{k}{l}" for k in range(K) for l in range(K)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iter", "auc_train", "auc_eval", "fairness_train", "fairness_eval"]
            + delta_cols
            + lambda_cols
        )
        for rec in history:
            writer.writerow(
                [rec.iteration]
                + [repr(v) for v in (rec.auc_train, rec.auc_eval, rec.fairness_train, rec.fairness_eval)]
                + [repr(float(v)) for v in rec.delta.ravel()]
                + [repr(float(v)) for v in rec.coeffs.ravel()]
            )
