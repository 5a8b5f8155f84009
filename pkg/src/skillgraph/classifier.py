"""Initiation classifiers: where a skill is allowed to begin.

Binary logistic regression over world-state features, trained by full-batch
gradient ascent on the averaged, L2-regularized log-likelihood.  The stored
positive/negative samples are the complete training provenance, so refitting
from them reproduces the weights bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demos import WorldState
from .errors import InvalidInputError

L2_LAMBDA = 1e-2
GRAD_TOL = 1e-6
MAX_ITER = 500


@dataclass
class InitiationClassifier:
    weights: np.ndarray
    bias: float
    positives: list
    negatives: list
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def to_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "positives": [list(s.features) for s in self.positives],
            "negatives": [list(s.features) for s in self.negatives],
            "degenerate": self.degenerate,
        }

    @staticmethod
    def from_dict(d: dict, layout) -> "InitiationClassifier":
        return InitiationClassifier(
            weights=np.array(d["weights"], dtype=float),
            bias=float(d["bias"]),
            positives=[WorldState.from_array(f, layout) for f in d["positives"]],
            negatives=[WorldState.from_array(f, layout) for f in d["negatives"]],
            degenerate=bool(d["degenerate"]),
        )

    def equals(self, other: "InitiationClassifier") -> bool:
        return (
            np.array_equal(self.weights, other.weights)
            and self.bias == other.bias
            and self.positives == other.positives
            and self.negatives == other.negatives
            and self.degenerate == other.degenerate
        )


def _objective_and_grad(w, b, x, y):
    z = x @ w + b
    p = 1.0 / (1.0 + np.exp(-z))
    # stable log-likelihood: y*log(p) + (1-y)*log(1-p)
    ll = -np.logaddexp(0.0, -z) - (1.0 - y) * z
    obj = float(np.mean(ll)) - 0.5 * L2_LAMBDA * float(w @ w)
    resid = y - p
    grad_w = resid @ x / len(y) - L2_LAMBDA * w
    grad_b = float(np.mean(resid))
    return obj, grad_w, grad_b


def _train(x: np.ndarray, y: np.ndarray):
    w = np.zeros(x.shape[1])
    b = 0.0
    obj, gw, gb = _objective_and_grad(w, b, x, y)
    for _ in range(MAX_ITER):
        gnorm = max(float(np.max(np.abs(gw))), abs(gb))
        if gnorm < GRAD_TOL:
            break
        step = 1.0
        gsq = float(gw @ gw) + gb * gb
        for _ in range(40):
            w2 = w + step * gw
            b2 = b + step * gb
            obj2, gw2, gb2 = _objective_and_grad(w2, b2, x, y)
            if obj2 >= obj + 1e-4 * step * gsq:
                break
            step *= 0.5
        w, b, obj, gw, gb = w2, b2, obj2, gw2, gb2
    return w, b


def fit_classifier(positives, negatives) -> InitiationClassifier:
    """Train from explicit start-state samples.

    With no negatives the classifier is degenerate: it reports probability 1
    everywhere (a skill with no observed alternatives is never suppressed).
    """
    positives = list(positives)
    negatives = list(negatives)
    if not positives:
        raise InvalidInputError("fit requires at least one positive sample")
    dim = positives[0].dim
    for s in positives + negatives:
        if s.dim != dim:
            raise InvalidInputError("sample dimensions disagree")
    if not negatives:
        return InitiationClassifier(
            weights=np.zeros(dim), bias=0.0, positives=positives, negatives=[], degenerate=True
        )
    x = np.array([s.features for s in positives] + [s.features for s in negatives])
    y = np.array([1.0] * len(positives) + [0.0] * len(negatives))
    w, b = _train(x, y)
    return InitiationClassifier(
        weights=w, bias=b, positives=positives, negatives=negatives, degenerate=False
    )


def _sigmoid(z: float) -> float:
    if z >= 0:
        return float(1.0 / (1.0 + np.exp(-z)))
    e = np.exp(z)
    return float(e / (1.0 + e))


def predict_proba(c: InitiationClassifier, s: WorldState) -> float:
    if c.degenerate:
        return 1.0
    if s.dim != c.dim:
        raise InvalidInputError(
            f"state dimension {s.dim} does not match classifier dimension {c.dim}"
        )
    return _sigmoid(float(c.weights @ s.vector() + c.bias))


def is_activated(c: InitiationClassifier, s: WorldState, theta: float = 0.5) -> bool:
    """Hard activation: probability at or above the threshold."""
    if not 0.0 < theta < 1.0:
        raise InvalidInputError("theta must lie strictly between 0 and 1")
    return predict_proba(c, s) >= theta


def _append_unique(stored: list, new: list) -> list:
    out = list(stored)
    for s in new:
        if s not in out:
            out.append(s)
    return out


def update_classifier(
    c: InitiationClassifier, new_pos, new_neg
) -> InitiationClassifier:
    """Extend the provenance with new samples and refit from scratch.

    Exact duplicates are dropped; adding nothing returns an equal classifier.
    """
    positives = _append_unique(c.positives, list(new_pos))
    negatives = _append_unique(c.negatives, list(new_neg))
    if positives == c.positives and negatives == c.negatives:
        return InitiationClassifier(
            weights=c.weights.copy(),
            bias=c.bias,
            positives=list(c.positives),
            negatives=list(c.negatives),
            degenerate=c.degenerate,
        )
    return fit_classifier(positives, negatives)
