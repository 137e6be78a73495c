"""Subjective-logic opinions over K classes.

Every function accepts either numpy arrays or ``Tensor`` objects, and batched
inputs: ``belief`` has shape ``(..., K)`` and ``uncertainty`` has shape ``(...)``.
The arithmetic is written once so the same formulas serve plain evaluation and
differentiable losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crest.errors import DegenerateFusionError, DomainError, ShapeError
from crest.numgraph import Tensor


def _raw(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _col(u):
    """View an uncertainty of shape (...) as (..., 1) for broadcasting against beliefs."""
    if isinstance(u, Tensor):
        return u.reshape(u.shape + (1,))
    return np.asarray(u, dtype=np.float64)[..., None]


def uniform_base_rate(k):
    return np.full(k, 1.0 / k)


@dataclass(frozen=True, eq=False)
class Opinion:
    belief: object
    uncertainty: object
    base_rate: object

    @property
    def k(self):
        return _raw(self.belief).shape[-1]

    def validate(self, atol=1e-9):
        b, u, a = _raw(self.belief), _raw(self.uncertainty), _raw(self.base_rate)
        if np.any(b < -atol) or np.any(b > 1 + atol) or np.any(u < -atol) or np.any(u > 1 + atol):
            raise DomainError("opinion components must lie in [0, 1]")
        if np.max(np.abs(b.sum(axis=-1) + u - 1.0)) > atol:
            raise DomainError("belief masses and uncertainty must sum to 1")
        if np.max(np.abs(a.sum(axis=-1) - 1.0)) > atol:
            raise DomainError("base rate must sum to 1")
        return self


def opinion_from_evidence(evidence, base_rate=None):
    """alpha = e + 1, S = sum(alpha), b = e / S, u = K / S."""
    e_raw = _raw(evidence)
    if not isinstance(evidence, Tensor):
        evidence = e_raw
    if np.any(e_raw < 0) or np.any(np.isnan(e_raw)):
        raise DomainError("evidence must be nonnegative")
    k = e_raw.shape[-1]
    if base_rate is None:
        base_rate = uniform_base_rate(k)
    elif abs(float(np.sum(_raw(base_rate), axis=-1).max()) - 1.0) > 1e-9:
        raise DomainError("base rate must sum to 1")
    strength = (evidence + 1.0).sum(axis=-1)
    belief = evidence / _col(strength)
    uncertainty = k / strength
    return Opinion(belief, uncertainty, base_rate)


def opinion_from_alpha(alpha, base_rate=None):
    return opinion_from_evidence(alpha - 1.0, base_rate)


def evidence_from_opinion(opinion):
    """Inverse of ``opinion_from_evidence``: e_k = K b_k / u."""
    if np.any(_raw(opinion.uncertainty) <= 0):
        raise DomainError("dogmatic opinion (u = 0) has unbounded evidence")
    return opinion.k * opinion.belief / _col(opinion.uncertainty)


def project(opinion):
    """Projected probability p_k = b_k + a_k u."""
    return opinion.belief + opinion.base_rate * _col(opinion.uncertainty)


def fuse(a, b):
    """Combine two opinions on the same instance.

    Beliefs are cross-weighted by the other opinion's uncertainty, the fused
    uncertainty is the harmonic mean of both, and base rates are averaged.
    """
    if a.k != b.k:
        raise ShapeError(f"cannot fuse opinions over {a.k} and {b.k} classes")
    ua, ub = a.uncertainty, b.uncertainty
    total = ua + ub
    if np.any(_raw(total) <= 0):
        raise DegenerateFusionError("both opinions have zero uncertainty")
    belief = (a.belief * _col(ub) + b.belief * _col(ua)) / _col(total)
    uncertainty = 2.0 * ua * ub / total
    base_rate = (a.base_rate + b.base_rate) / 2.0
    return Opinion(belief, uncertainty, base_rate)


def fuse_many(opinions):
    """Left fold of ``fuse`` in input order."""
    opinions = list(opinions)
    if not opinions:
        raise DomainError("fuse_many needs at least one opinion")
    out = opinions[0]
    for o in opinions[1:]:
        out = fuse(out, o)
    return out


def conflict(a, b):
    """Conflict degree: half the L1 gap of projections times joint certainty."""
    if a.k != b.k:
        raise ShapeError(f"cannot compare opinions over {a.k} and {b.k} classes")
    gap = abs(project(a) - project(b)).sum(axis=-1) / 2.0
    certainty = (1.0 - a.uncertainty) * (1.0 - b.uncertainty)
    return gap * certainty
