"""Visual instance-level contrastive loss with similarity-based positives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crest.errors import DomainError
from crest.numgraph import Tensor, as_tensor, l2_normalize, log_softmax

_MASK = -1e30


@dataclass
class ContrastiveBatch:
    embeddings: object  # N x width, Tensor or array
    labels: object
    temperature: float = 0.1
    similarity_threshold: float = 0.5

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if len(self.labels) < 2:
            raise DomainError("contrastive batch needs at least two elements")
        if self.temperature <= 0:
            raise DomainError("temperature must be positive")


def cosine_matrix(embeddings):
    normed = l2_normalize(as_tensor(embeddings))
    return normed @ normed.T


def select_positives(batch, similarities=None):
    """Positive index for every anchor.

    The most similar same-category element wins if its cosine reaches the
    threshold; otherwise the most similar element of any category. Ties go to
    the lowest index.
    """
    if similarities is None:
        similarities = cosine_matrix(batch.embeddings).data
    sims = np.asarray(similarities, dtype=np.float64)
    labels = batch.labels
    n = len(labels)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        others = np.arange(n) != i
        same = others & (labels == labels[i])
        if same.any():
            j = int(np.argmax(np.where(same, sims[i], -np.inf)))
            if sims[i, j] >= batch.similarity_threshold:
                out[i] = j
                continue
        out[i] = int(np.argmax(np.where(others, sims[i], -np.inf)))
    return out


def select_positive(batch, anchor_index):
    return int(select_positives(batch)[anchor_index])


def vicl_loss(batch, positives=None):
    """Mean over anchors of -log softmax at the positive.

    The denominator covers the positive and every other non-anchor element.
    """
    sims = cosine_matrix(batch.embeddings)
    if positives is None:
        positives = select_positives(batch, sims.data)
    n = len(batch.labels)
    logits = sims / batch.temperature + np.eye(n) * _MASK
    log_probs = log_softmax(logits, axis=-1)
    return -log_probs[np.arange(n), positives].mean()
