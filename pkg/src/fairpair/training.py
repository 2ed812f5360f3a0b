"""Weighted pairwise (and pointwise) training with a from-scratch Adam.

The pairwise objective is the mean over pairs of
``weight * cross_entropy(predicted order probability, pair label)``;
the pointwise variant applies the same loss to item labels.  Parameters
are packed as [w..., b]; the bias has zero gradient in the pairwise case
because it cancels in every score difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, PairSet
from .errors import ValidationError
from .model import LinearRankingModel, clamp_prob, stable_sigmoid


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    epochs: int = 30
    batch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValidationError("beta1 and beta2 must lie in [0, 1)")
        if self.eps_adam <= 0:
            raise ValidationError("eps_adam must be > 0")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


@dataclass(eq=False)
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_update(
    state: AdamState, params: np.ndarray, grad: np.ndarray, cfg: TrainConfig
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam step; returns fresh state and parameters."""
    if not (state.m.shape == state.v.shape == params.shape == grad.shape):
        raise ValidationError("adam_update: mismatched shapes")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
    return AdamState(m, v, t), new_params


def pair_loss(l_hat: float, l: int, weight: float) -> float:
    """Weighted cross-entropy of a predicted order probability."""
    if weight <= 0:
        raise ValidationError("pair weight must be > 0")
    p = float(clamp_prob(l_hat))
    return weight * -(l * np.log(p) + (1 - l) * np.log1p(-p))


def loss_gradient(
    model: LinearRankingModel, x_i, x_j, l: int, weight: float
) -> np.ndarray:
    """Gradient of the weighted pair loss, packed as [dw..., db].

    db is identically zero: the bias cancels in the score difference.
    """
    if weight <= 0:
        raise ValidationError("pair weight must be > 0")
    diff = np.asarray(x_i, dtype=np.float64) - np.asarray(x_j, dtype=np.float64)
    l_hat = clamp_prob(stable_sigmoid(model.w @ diff))
    grad = np.empty(model.d + 1)
    grad[:-1] = weight * (l_hat - l) * diff
    grad[-1] = 0.0
    return grad


def weighted_loss(model: LinearRankingModel, ps: PairSet, weights: np.ndarray) -> float:
    """Mean weighted pair loss over a whole pair set."""
    arr = ps.arrays
    p = clamp_prob(stable_sigmoid(arr.feat_diff @ model.w))
    lab = arr.label
    terms = weights * -(lab * np.log(p) + (1 - lab) * np.log1p(-p))
    return float(terms.mean())


def _check_weights(weights, n: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise ValidationError(f"weight table length {weights.shape} != number of pairs {n}")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise ValidationError("weights must be finite and positive")
    return weights


def train_weighted(
    ps: PairSet,
    weights,
    cfg: TrainConfig,
    init: LinearRankingModel | None = None,
) -> LinearRankingModel:
    """Minimize the weighted pairwise loss with minibatch Adam.

    Pairs are reshuffled every epoch from a generator seeded by cfg.seed,
    so the result is deterministic for fixed inputs.  epochs=0 returns the
    initial model unchanged.
    """
    if not ps.pairs:
        raise ValidationError("cannot train on an empty pair set")
    n = len(ps)
    weights = _check_weights(weights, n)
    d = ps.source.d
    if init is None:
        init = LinearRankingModel.zeros(d)
    if init.d != d:
        raise ValidationError("initial model dimension does not match the dataset")

    arr = ps.arrays
    diff = arr.feat_diff
    lab = arr.label.astype(np.float64)
    params = np.concatenate([init.w, [init.b]])
    state = AdamState.zeros(params.size)
    rng = np.random.default_rng(cfg.seed)

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            p = clamp_prob(stable_sigmoid(diff[idx] @ params[:-1]))
            resid = weights[idx] * (p - lab[idx])
            grad = np.concatenate([resid @ diff[idx] / idx.size, [0.0]])
            state, params = adam_update(state, params, grad, cfg)

    return LinearRankingModel(params[:-1].copy(), float(params[-1]))


def pointwise_loss(model: LinearRankingModel, ds: Dataset, weights: np.ndarray) -> float:
    """Mean weighted cross-entropy of item labels under sigmoid(score)."""
    p = clamp_prob(stable_sigmoid(ds.flat_features @ model.w + model.b))
    y = ds.flat_labels
    terms = weights * -(y * np.log(p) + (1 - y) * np.log1p(-p))
    return float(terms.mean())


def train_pointwise(
    ds: Dataset,
    weights,
    cfg: TrainConfig,
    init: LinearRankingModel | None = None,
) -> LinearRankingModel:
    """Weighted logistic regression on items (the pointwise ordering method).

    Unlike the pairwise trainer, the bias receives a nonzero gradient here.
    """
    X = ds.flat_features
    y = ds.flat_labels.astype(np.float64)
    n = y.size
    if n == 0:
        raise ValidationError("cannot train on an empty dataset")
    weights = _check_weights(weights, n)
    if init is None:
        init = LinearRankingModel.zeros(ds.d)
    if init.d != ds.d:
        raise ValidationError("initial model dimension does not match the dataset")

    params = np.concatenate([init.w, [init.b]])
    state = AdamState.zeros(params.size)
    rng = np.random.default_rng(cfg.seed)

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            p = clamp_prob(stable_sigmoid(X[idx] @ params[:-1] + params[-1]))
            resid = weights[idx] * (p - y[idx])
            grad = np.concatenate([resid @ X[idx] / idx.size, [resid.mean()]])
            state, params = adam_update(state, params, grad, cfg)

    return LinearRankingModel(params[:-1].copy(), float(params[-1]))
