"""The full network: both grounding stacks, the meta-pattern bank and parameter I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crest.digs import BankReadout, bank_attend, init_bank
from crest.errors import FormatError
from crest.grounding import (
    GroundedFeatureSet,
    agt_forward,
    init_grounding_params,
    uniform_init,
    vgt_forward,
)
from crest.numgraph import Tensor


@dataclass
class ModelOutputs:
    features: GroundedFeatureSet  # f_attribute here is the bank-enriched F^A
    f_attribute_raw: Tensor
    bank: BankReadout


class CrestModel:
    """Parameters plus the forward pass from region features to grounded embeddings.

    The visual stream (first half of the regions) feeds VGT and the attribute
    stream (second half) feeds AGT. Attribute word embeddings are fixed.
    """

    def __init__(self, n_attributes, n_regions, feature_width, config):
        self.config = config
        self.n_attributes = n_attributes
        self.n_regions = n_regions
        self.feature_width = feature_width
        rng = np.random.default_rng(config.seed)
        self.attribute_embeddings = rng.standard_normal((n_attributes, config.embed_width))
        context = feature_width
        self.input_projection = None
        if config.input_projection:
            self.input_projection = uniform_init(rng, feature_width, (feature_width, feature_width))
        self.vgt = init_grounding_params(
            rng, config.embed_width, context, n_attributes,
            d_k=config.d_k, hidden=config.hidden, layers=config.layers, pooling=config.pooling,
        )
        self.agt = init_grounding_params(
            rng, context, config.embed_width, n_attributes,
            d_k=config.d_k, hidden=config.hidden, layers=config.layers, pooling=config.pooling,
        )
        self.bank = init_bank(rng, n_attributes, config.n_patterns, config.pattern_width, config.margin)

    def named_parameters(self):
        named = {}
        if self.input_projection is not None:
            named["input_projection"] = self.input_projection
        named.update(self.vgt.named_tensors("vgt"))
        named.update(self.agt.named_tensors("agt"))
        named.update(self.bank.named_tensors("bank"))
        return named

    def parameters(self):
        return list(self.named_parameters().values())

    def streams(self, features):
        x = Tensor(np.asarray(features, dtype=np.float64))
        if self.input_projection is not None:
            x = x @ self.input_projection
        half = self.n_regions // 2
        return x, x[:, :half], x[:, half:]

    def forward(self, features, return_attention=False):
        regions, visual, attribute = self.streams(features)
        f_visual, w_v = vgt_forward(visual, self.attribute_embeddings, self.vgt, return_weights=True)
        f_attr, w_a = agt_forward(attribute, self.attribute_embeddings, self.agt, return_weights=True)
        readout = bank_attend(f_attr, self.bank)
        attention = {"vgt": w_v.data, "agt": w_a.data, "bank": readout.attention.data} if return_attention else {}
        grounded = GroundedFeatureSet(readout.enriched, f_visual, regions, attention)
        return ModelOutputs(grounded, f_attr, readout)

    def embed(self, features, batch_size=256):
        """(F^A, F^V) as arrays, evaluated in chunks without building a graph to keep."""
        fa, fv = [], []
        for start in range(0, len(features), batch_size):
            out = self.forward(features[start:start + batch_size])
            fa.append(out.features.f_attribute.data)
            fv.append(out.features.f_visual.data)
        return np.concatenate(fa), np.concatenate(fv)

    # -- persistence ------------------------------------------------------
    def state_arrays(self):
        arrays = {name: t.data for name, t in self.named_parameters().items()}
        arrays["attribute_embeddings"] = self.attribute_embeddings
        return arrays

    def load_state_arrays(self, arrays):
        named = self.named_parameters()
        expected = set(named) | {"attribute_embeddings"}
        if set(arrays) != expected:
            missing = sorted(expected - set(arrays))
            extra = sorted(set(arrays) - expected)
            raise FormatError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
        for name, t in named.items():
            if arrays[name].shape != t.shape:
                raise FormatError(f"parameter {name}: shape {arrays[name].shape}, expected {t.shape}")
            t.data = np.array(arrays[name], dtype=np.float64)
        self.attribute_embeddings = np.array(arrays["attribute_embeddings"], dtype=np.float64)
