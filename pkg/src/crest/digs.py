"""Meta-pattern bank readout and the DIGS triplet + compactness loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crest.errors import DomainError, ShapeError
from crest.grounding import uniform_init
from crest.numgraph import Tensor, as_tensor, softmax_rows


@dataclass
class MetaPatternBank:
    patterns: Tensor  # phi x d
    w_query: Tensor  # width x d
    b_query: Tensor  # d
    w_remap: Tensor  # d x width
    margin: float = 1.0

    def __post_init__(self):
        n_patterns, d = self.patterns.shape
        if n_patterns < 2:
            raise DomainError("the bank needs at least two patterns")
        if self.w_query.shape[1] != d or self.w_remap.shape[0] != d:
            raise ShapeError("bank projections do not match the pattern width")
        if not d < self.w_query.shape[0]:
            raise DomainError(f"pattern width {d} must be below the feature width {self.w_query.shape[0]}")
        if self.margin <= 0:
            raise DomainError("margin must be positive")

    def named_tensors(self, prefix="bank"):
        return {f"{prefix}.patterns": self.patterns, f"{prefix}.w_query": self.w_query,
                f"{prefix}.b_query": self.b_query, f"{prefix}.w_remap": self.w_remap}


@dataclass
class BankReadout:
    queries: Tensor
    attention: Tensor
    pattern_mix: Tensor
    enriched: Tensor


def init_bank(rng, width, n_patterns=64, pattern_width=16, margin=1.0):
    patterns = rng.standard_normal((n_patterns, pattern_width)) / np.sqrt(pattern_width)
    return MetaPatternBank(
        patterns=Tensor(patterns, requires_grad=True),
        w_query=uniform_init(rng, width, (width, pattern_width)),
        b_query=uniform_init(rng, width, (pattern_width,)),
        w_remap=uniform_init(rng, pattern_width, (pattern_width, width)),
        margin=margin,
    )


def bank_attend(f_attribute, bank):
    """Project features to queries, attend over the patterns, add the remapped mix back."""
    f_attribute = as_tensor(f_attribute)
    if f_attribute.shape[-1] != bank.w_query.shape[0]:
        raise ShapeError(f"feature width {f_attribute.shape[-1]} does not match bank {bank.w_query.shape}")
    queries = f_attribute @ bank.w_query + bank.b_query
    attention = softmax_rows(queries @ bank.patterns.T)
    mix = attention @ bank.patterns
    enriched = f_attribute + mix @ bank.w_remap
    return BankReadout(queries, attention, mix, enriched)


def _rank_patterns(queries, patterns):
    sims = np.asarray(queries, dtype=np.float64) @ np.asarray(patterns, dtype=np.float64).T
    # stable sort keeps the lowest index first among equal similarities
    order = np.argsort(-sims, axis=-1, kind="stable")
    return order[..., 0], order[..., 1]


def nearest_patterns(query, patterns):
    """Indices of the most and second most similar pattern by dot product."""
    patterns = np.asarray(getattr(patterns, "data", patterns))
    if patterns.shape[0] < 2:
        raise DomainError("need at least two patterns")
    p, n = _rank_patterns(np.asarray(getattr(query, "data", query))[None, :], patterns)
    return int(p[0]), int(n[0])


def digs_components(queries, patterns, margin):
    """(triplet, compactness) terms, each summed over the batch.

    Positive/negative patterns are chosen on the current values and treated as
    constants for the gradient.
    """
    queries, patterns = as_tensor(queries), as_tensor(patterns)
    if patterns.shape[0] < 2:
        raise DomainError("need at least two patterns")
    p, n = _rank_patterns(queries.data, patterns.data)
    diff_p = queries - patterns[p]
    diff_n = queries - patterns[n]
    d_pos = (diff_p * diff_p).sum(axis=-1)
    d_neg = (diff_n * diff_n).sum(axis=-1)
    triplet = (d_pos - d_neg + margin).relu().sum()
    compact = d_pos.sum()
    return triplet, compact


def digs_loss(queries, patterns, margin=1.0):
    triplet, compact = digs_components(queries, patterns, margin)
    return triplet + compact
