"""Attribute-space scoring: ARISE loss, the total objective, calibrated prediction and metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crest.errors import DomainError, ShapeError
from crest.numgraph import Tensor, as_tensor, log_softmax


@dataclass
class ClassSemanticMatrix:
    z: np.ndarray  # |C| x |A|
    seen_ids: np.ndarray
    unseen_ids: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        self.seen_ids = np.sort(np.asarray(self.seen_ids, dtype=np.int64))
        self.unseen_ids = np.sort(np.asarray(self.unseen_ids, dtype=np.int64))
        n = self.z.shape[0]
        if np.intersect1d(self.seen_ids, self.unseen_ids).size:
            raise DomainError("seen and unseen classes overlap")
        if not np.array_equal(np.union1d(self.seen_ids, self.unseen_ids), np.arange(n)):
            raise DomainError("seen and unseen classes must cover every class exactly once")

    @property
    def n_classes(self):
        return self.z.shape[0]

    @property
    def unseen_mask(self):
        mask = np.zeros(self.n_classes)
        mask[self.unseen_ids] = 1.0
        return mask


@dataclass
class FusionCoefficients:
    mu: float = 0.5
    lambda_cal: float = 0.2
    lambda_edl: float = 0.001
    indicator: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise DomainError("mu must lie in [0, 1]")
        if self.lambda_cal < 0 or self.lambda_edl < 0 or self.indicator < 0:
            raise DomainError("coefficients must be nonnegative")


def fused_embedding(f_attribute, f_visual, mu):
    if f_attribute.shape != f_visual.shape:
        raise ShapeError(f"cannot fuse embeddings {f_attribute.shape} and {f_visual.shape}")
    return mu * f_attribute + (1.0 - mu) * f_visual


def arise_loss(fused, labels, semantics, coeffs):
    """Seen-class cross-entropy minus lambda_cal times the log-mass on unseen classes.

    The second term scores against all classes with the indicator added to
    unseen logits, pushing probability toward unseen classes.
    """
    fused = as_tensor(fused)
    labels = np.asarray(labels, dtype=np.int64)
    if np.isin(labels, semantics.unseen_ids).any():
        raise DomainError("training labels must be seen classes")
    scores = fused @ semantics.z.T
    position = np.searchsorted(semantics.seen_ids, labels)
    seen_log_probs = log_softmax(scores[:, semantics.seen_ids], axis=-1)
    ce = -seen_log_probs[np.arange(len(labels)), position]
    if coeffs.lambda_cal == 0:
        return ce.mean()
    calibrated = log_softmax(scores + coeffs.indicator * semantics.unseen_mask, axis=-1)
    unseen_mass = calibrated[:, semantics.unseen_ids].sum(axis=-1)
    return (ce - coeffs.lambda_cal * unseen_mass).mean()


def total_loss(arise, vicl, digs, edl, lambda_edl, vicl_weight=1.0, digs_weight=1.0):
    """L_ARISE + L_VICL + L_DIGS + lambda_edl L_EDL; the extra weights exist for ablations."""
    return arise + vicl_weight * vicl + digs_weight * digs + lambda_edl * edl


def class_scores(f_attribute, f_visual, semantics, coeffs):
    fused = fused_embedding(np.asarray(f_attribute, dtype=np.float64),
                            np.asarray(f_visual, dtype=np.float64), coeffs.mu)
    return fused @ semantics.z.T + coeffs.indicator * semantics.unseen_mask


def predict(f_attribute, f_visual, semantics, coeffs, mode="gzsl"):
    """Calibrated argmax over unseen classes (CZSL) or all classes (GZSL)."""
    scores = class_scores(f_attribute, f_visual, semantics, coeffs)
    mode = mode.lower()
    if mode == "czsl":
        candidates = semantics.unseen_ids
    elif mode == "gzsl":
        candidates = np.arange(semantics.n_classes)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    # candidates are sorted, so argmax's first-hit rule breaks ties by lowest id
    return candidates[np.argmax(scores[..., candidates], axis=-1)]


def harmonic_mean(seen, unseen):
    if seen + unseen == 0:
        return 0.0
    return 2.0 * seen * unseen / (seen + unseen)


def per_class_accuracy(predictions, labels, classes):
    """Top-1 accuracy averaged over the classes present among ``classes``."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    accs = []
    for c in classes:
        hit = labels == c
        if hit.any():
            accs.append(float(np.mean(predictions[hit] == c)))
    if not accs:
        raise DomainError("no test instances for the requested classes")
    return float(np.mean(accs))


def gzsl_metrics(predictions, labels, semantics):
    """(S, U, H) with per-class macro-averaged accuracies."""
    labels = np.asarray(labels)
    seen = per_class_accuracy(predictions, labels, semantics.seen_ids)
    unseen = per_class_accuracy(predictions, labels, semantics.unseen_ids)
    return seen, unseen, harmonic_mean(seen, unseen)


def czsl_metrics(predictions, labels, semantics):
    return per_class_accuracy(predictions, labels, semantics.unseen_ids)
