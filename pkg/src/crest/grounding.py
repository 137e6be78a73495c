"""Bidirectional grounding transformers and the evidence head.

VGT uses attribute embeddings as queries over region features; AGT uses region
features as queries over attribute embeddings. Both are a stack of single-head
cross-attention blocks followed by a feed-forward layer, pooled over queries to
one attribute-width vector per instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from crest.errors import DomainError, ShapeError
from crest.numgraph import Tensor, as_tensor, softmax_rows


@dataclass
class AttentionLayer:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor


@dataclass
class GroundingParams:
    layers: list
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    pooling: str = "mean"

    @property
    def d_k(self):
        return self.layers[0].w_q.shape[1]

    def tensors(self):
        out = []
        for layer in self.layers:
            out += [layer.w_q, layer.w_k, layer.w_v]
        return out + [self.w1, self.b1, self.w2, self.b2]

    def named_tensors(self, prefix):
        named = {}
        for i, layer in enumerate(self.layers):
            named[f"{prefix}.layer{i}.w_q"] = layer.w_q
            named[f"{prefix}.layer{i}.w_k"] = layer.w_k
            named[f"{prefix}.layer{i}.w_v"] = layer.w_v
        named.update({f"{prefix}.w1": self.w1, f"{prefix}.b1": self.b1,
                      f"{prefix}.w2": self.w2, f"{prefix}.b2": self.b2})
        return named


@dataclass
class GroundedFeatureSet:
    f_attribute: Tensor
    f_visual: Tensor
    regions: Tensor
    attention: dict = field(default_factory=dict)


def uniform_init(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_grounding_params(rng, query_width, context_width, out_width,
                          d_k=32, d_v=None, hidden=64, layers=1, pooling="mean"):
    """Seeded uniform(+-1/sqrt(fan_in)) initialisation of one grounding stack."""
    if layers < 1:
        raise DomainError("need at least one attention layer")
    if pooling not in ("mean", "max"):
        raise DomainError(f"unknown pooling {pooling!r}")
    d_v = d_v or d_k
    stack = []
    q_in = query_width
    for _ in range(layers):
        stack.append(AttentionLayer(
            w_q=uniform_init(rng, q_in, (q_in, d_k)),
            w_k=uniform_init(rng, context_width, (context_width, d_k)),
            w_v=uniform_init(rng, context_width, (context_width, d_v)),
        ))
        q_in = d_v
    return GroundingParams(
        layers=stack,
        w1=uniform_init(rng, d_v, (d_v, hidden)),
        b1=uniform_init(rng, d_v, (hidden,)),
        w2=uniform_init(rng, hidden, (hidden, out_width)),
        b2=uniform_init(rng, hidden, (out_width,)),
        pooling=pooling,
    )


def cross_attention_block(queries, context, layer, return_weights=False):
    """softmax(Q K^T / sqrt(d_k)) V with Q = queries W_q, K = context W_k, V = context W_v."""
    queries, context = as_tensor(queries), as_tensor(context)
    if queries.shape[-1] != layer.w_q.shape[0] or context.shape[-1] != layer.w_k.shape[0]:
        raise ShapeError(
            f"attention shape mismatch: queries {queries.shape}, context {context.shape}, "
            f"w_q {layer.w_q.shape}, w_k {layer.w_k.shape}"
        )
    q = queries @ layer.w_q
    k = context @ layer.w_k
    v = context @ layer.w_v
    d_k = layer.w_k.shape[1]
    weights = softmax_rows(q @ k.swapaxes(-1, -2), scale=1.0 / np.sqrt(d_k))
    out = weights @ v
    return (out, weights) if return_weights else out


def ffn(x, w1, b1, w2, b2):
    """ReLU((x W1 + b1) W2 + b2); the ReLU wraps the whole affine composition."""
    x = as_tensor(x)
    if x.shape[-1] != w1.shape[0]:
        raise ShapeError(f"ffn input width {x.shape[-1]} does not match w1 {w1.shape}")
    return ((x @ w1 + b1) @ w2 + b2).relu()


def _ground(queries, context, params, pool_axis):
    weights = None
    x = queries
    for layer in params.layers:
        x, weights = cross_attention_block(x, context, layer, return_weights=True)
    out = ffn(x, params.w1, params.b1, params.w2, params.b2)
    pooled = out.mean(axis=pool_axis) if params.pooling == "mean" else out.max(axis=pool_axis)
    return pooled, weights


def vgt_forward(regions, attribute_embeddings, params, return_weights=False):
    """Attribute embeddings (|A| x g) attend over regions (N x R x h) -> F^V (N x |A|)."""
    regions = as_tensor(regions)
    if regions.ndim != 3:
        raise ShapeError(f"regions must be N x R x h, got {regions.shape}")
    pooled, weights = _ground(as_tensor(attribute_embeddings), regions, params, pool_axis=-2)
    return (pooled, weights) if return_weights else pooled


def agt_forward(regions, attribute_embeddings, params, return_weights=False):
    """Regions (N x R x h) attend over attribute embeddings (|A| x g) -> F^A (N x |A|)."""
    regions = as_tensor(regions)
    if regions.ndim != 3:
        raise ShapeError(f"regions must be N x R x h, got {regions.shape}")
    pooled, weights = _ground(regions, as_tensor(attribute_embeddings), params, pool_axis=-2)
    return (pooled, weights) if return_weights else pooled


EVIDENCE_ACTIVATIONS = ("softplus", "relu", "exp")


def evidence_head(f, class_semantics, activation="softplus"):
    """Dirichlet concentrations alpha = act(f . z^c) + 1 over the rows of ``class_semantics``."""
    f = as_tensor(f)
    z = np.asarray(class_semantics, dtype=np.float64)
    if f.shape[-1] != z.shape[-1]:
        raise ShapeError(f"embedding width {f.shape[-1]} does not match semantics {z.shape}")
    scores = f @ z.T
    if activation == "softplus":
        evidence = scores.softplus()
    elif activation == "relu":
        evidence = scores.relu()
    elif activation == "exp":
        evidence = scores.exp()
    else:
        raise DomainError(f"unknown evidence activation {activation!r}")
    return evidence + 1.0
