"""Evidential losses over Dirichlet concentrations.

Per-instance losses take ``alpha`` of shape ``(..., K)`` with one-hot labels of
the same shape and return one value per instance. ``edl_total`` reduces a batch
to its mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crest.errors import DomainError
from crest.numgraph import Tensor, digamma, lgamma, where
from crest.numgraph.special import lgamma as lgamma_value
from crest.subjective_logic import (
    conflict,
    evidence_from_opinion,
    fuse_many,
    opinion_from_alpha,
)

FUSION_MODES = ("weighted_average", "opinion_fusion", "plain_average")


@dataclass
class AnnealSchedule:
    annealing_steps: int = 10
    current_epoch: int = 0

    def __post_init__(self):
        if self.annealing_steps <= 0:
            raise DomainError("annealing_steps must be positive")
        if self.current_epoch < 0:
            raise DomainError("current_epoch must be nonnegative")

    @property
    def coefficient(self):
        return min(1.0, self.current_epoch / self.annealing_steps)


@dataclass
class EdlWeights:
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.beta) and np.isfinite(self.gamma)) or self.beta < 0 or self.gamma < 0:
            raise DomainError("EDL weights must be finite and nonnegative")


def one_hot(labels, k):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (k,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def _check_one_hot(y):
    y = np.asarray(y, dtype=np.float64)
    if not (np.all((y == 0) | (y == 1)) and np.all(y.sum(axis=-1) == 1)):
        raise DomainError("labels must be one-hot")
    return y


def ace_loss(alpha, y):
    """Expected cross-entropy under Dir(alpha): sum_j y_j (psi(S) - psi(alpha_j))."""
    y = _check_one_hot(y)
    strength = alpha.sum(axis=-1, keepdims=True)
    return (y * (digamma(strength) - digamma(alpha))).sum(axis=-1)


def kl_to_uniform(alpha, y):
    """KL[Dir(alpha_tilde) || Dir(1)] after removing the true-class evidence."""
    y = _check_one_hot(y)
    k = y.shape[-1]
    tilde = y + (1.0 - y) * alpha
    strength = tilde.sum(axis=-1, keepdims=True)
    log_norm = lgamma(strength).sum(axis=-1) - lgamma_value(float(k)) - lgamma(tilde).sum(axis=-1)
    return log_norm + ((tilde - 1.0) * (digamma(tilde) - digamma(strength))).sum(axis=-1)


def acc_loss(alpha, y, schedule):
    return ace_loss(alpha, y) + schedule.coefficient * kl_to_uniform(alpha, y)


def consistency_loss(opinions):
    """Sum of pairwise conflicts over ordered pairs, divided by M - 1."""
    m = len(opinions)
    if m < 2:
        raise DomainError("consistency loss needs at least two opinions")
    total = 0.0
    for p in range(m):
        for q in range(m):
            if q != p:
                total = total + conflict(opinions[p], opinions[q])
    return total / (m - 1)


def _uncertainty(alpha):
    return alpha.shape[-1] / alpha.sum(axis=-1, keepdims=True)


def fuse_alpha(alphas, mode="weighted_average"):
    """Combine per-modality concentrations into one.

    ``weighted_average`` weights each modality by its certainty 1 - u^m (uniform
    if every modality is vacuous); ``opinion_fusion`` converts to opinions,
    fuses them and maps back to concentrations; ``plain_average`` ignores u.
    """
    alphas = list(alphas)
    if not alphas:
        raise DomainError("fuse_alpha needs at least one modality")
    if mode not in FUSION_MODES:
        raise DomainError(f"unknown fusion mode {mode!r}")
    m = len(alphas)
    if m == 1:
        return alphas[0]
    if mode == "plain_average":
        return sum(alphas[1:], alphas[0]) / float(m)
    if mode == "opinion_fusion":
        fused = fuse_many([opinion_from_alpha(a) for a in alphas])
        return evidence_from_opinion(fused) + 1.0

    if not any(isinstance(a, Tensor) for a in alphas):
        return fuse_alpha([Tensor(a) for a in alphas], mode).data

    certainty = [1.0 - _uncertainty(a) for a in alphas]
    denom = sum(certainty[1:], certainty[0])
    raw = denom.data if isinstance(denom, Tensor) else np.asarray(denom)
    vacuous = raw <= 0
    safe = denom + vacuous.astype(np.float64)
    fused = 0.0
    for a, c in zip(alphas, certainty):
        w = where(vacuous, np.full(raw.shape, 1.0 / m), c / safe)
        fused = fused + w * a
    return fused


def edl_total(alphas, y, schedule, weights=None, mode="weighted_average"):
    """Batch mean of L_ACC(fused) + beta sum_m L_ACC(alpha^m) + gamma L_CON."""
    weights = weights or EdlWeights()
    alphas = list(alphas)
    fused = fuse_alpha(alphas, mode)
    per_instance = acc_loss(fused, y, schedule)
    if weights.beta:
        for a in alphas:
            per_instance = per_instance + weights.beta * acc_loss(a, y, schedule)
    if weights.gamma and len(alphas) >= 2:
        opinions = [opinion_from_alpha(a) for a in alphas]
        per_instance = per_instance + weights.gamma * consistency_loss(opinions)
    return per_instance.mean()

