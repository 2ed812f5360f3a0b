"""Linear ranking model: scores and pairwise order probabilities."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

# Predicted probabilities are clamped away from {0, 1} so that the
# logistic loss and its gradient stay finite.
PROB_EPS = 1e-12


def stable_sigmoid(z):
    """Numerically stable logistic function, elementwise.

    Never evaluates exp on a positive argument, so it cannot overflow for
    any finite input.  Accepts scalars or arrays; returns the same shape.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def clamp_prob(p):
    """Clamp probabilities into [PROB_EPS, 1 - PROB_EPS]."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


@dataclass(eq=False)
class LinearRankingModel:
    """Affine scorer h(x) = w.x + b shared across queries."""

    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim != 1:
            raise ValidationError("model weights must be a 1-d vector")
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise ValidationError("model parameters must be finite")

    @property
    def d(self) -> int:
        return self.w.size

    @classmethod
    def zeros(cls, d: int) -> "LinearRankingModel":
        return cls(np.zeros(d), 0.0)


def score(model: LinearRankingModel, x) -> float:
    """Score a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise ValidationError(
            f"feature dimension {x.shape} does not match model dimension {model.d}"
        )
    return float(model.w @ x + model.b)


def score_matrix(model: LinearRankingModel, X: np.ndarray) -> np.ndarray:
    """Score a (n, d) feature matrix."""
    if X.shape[1] != model.d:
        raise ValidationError(
            f"feature dimension {X.shape[1]} does not match model dimension {model.d}"
        )
    return X @ model.w + model.b


def pair_prob(model: LinearRankingModel, x_i, x_j) -> float:
    """Model probability that item i outranks item j.

    Computed from the score difference, so the bias term cancels exactly.
    The result is clamped into (0, 1) to keep downstream logs finite.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != (model.d,) or x_j.shape != (model.d,):
        raise ValidationError("pair features must both have the model dimension")
    z = model.w @ (x_i - x_j)
    return float(clamp_prob(stable_sigmoid(z)))


def save_model(model: LinearRankingModel, path) -> None:
    """Write the model as JSON; floats round-trip bit-exactly."""
    doc = {"d": model.d, "w": [float(v) for v in model.w], "b": float(model.b)}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path) -> LinearRankingModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    w = np.asarray(doc["w"], dtype=np.float64)
    if w.size != doc["d"]:
        raise ValidationError(f"model file {path} is inconsistent: d != len(w)")
    return LinearRankingModel(w, float(doc["b"]))
