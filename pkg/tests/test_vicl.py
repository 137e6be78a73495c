import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from crest.errors import DomainError
from crest.numgraph import Tensor, check_gradients
from crest.vicl import ContrastiveBatch, cosine_matrix, select_positive, select_positives, vicl_loss

import oracles


def test_identical_same_category_partner_wins():
    emb = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert select_positive(ContrastiveBatch(emb, [0, 0, 1]), 0) == 1


def test_fallback_without_same_category():
    emb = np.array([[1.0, 0.0], [0.2, 1.0], [0.9, 0.1]])
    assert select_positive(ContrastiveBatch(emb, [0, 1, 2]), 0) == 2


def test_low_similarity_partner_loses_to_cross_category():
    # same-category cosine 0.1, cross-category cosine 0.9, threshold 0.5
    anchor = np.array([1.0, 0.0, 0.0])
    same = np.array([0.1, math.sqrt(1 - 0.01), 0.0])
    cross = np.array([0.9, 0.0, math.sqrt(1 - 0.81)])
    batch = ContrastiveBatch(np.stack([anchor, same, cross]), [0, 0, 1], similarity_threshold=0.5)
    sims = cosine_matrix(batch.embeddings).data
    assert sims[0, 1] == pytest.approx(0.1) and sims[0, 2] == pytest.approx(0.9)
    assert select_positive(batch, 0) == 2


def test_tie_breaks_by_lowest_index():
    emb = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    assert select_positive(ContrastiveBatch(emb, [0, 1, 1]), 0) == 1


def test_batch_of_one_rejected():
    with pytest.raises(DomainError):
        ContrastiveBatch(np.ones((1, 3)), [0])


def test_two_element_batch_loss_zero():
    emb = np.random.default_rng(0).standard_normal((2, 4))
    assert vicl_loss(ContrastiveBatch(emb, [0, 1])).item() == pytest.approx(0.0, abs=1e-15)


def test_equal_similarities_give_log_two():
    # an equilateral triangle in the plane: every pair has cosine -1/2
    angles = np.array([0, 2 * np.pi / 3, 4 * np.pi / 3])
    emb = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    assert vicl_loss(ContrastiveBatch(emb, [0, 0, 1])).item() == pytest.approx(math.log(2), abs=1e-12)


def test_four_element_batch_matches_loop():
    rng = np.random.default_rng(1)
    emb, labels = rng.standard_normal((4, 5)), [0, 1, 0, 1]
    ours = vicl_loss(ContrastiveBatch(emb, labels, 0.1, 0.5)).item()
    assert ours == pytest.approx(oracles.vicl(emb, labels, 0.1, 0.5), abs=1e-10)


@settings(max_examples=60)
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 7), st.integers(2, 5)),
                  elements=st.floats(-5, 5, allow_nan=False)),
       st.integers(0, 2**31 - 1), st.floats(0.05, 2.0), st.floats(-1, 1))
def test_matches_oracle_and_is_nonnegative(emb, seed, tau, threshold):
    if np.any(np.linalg.norm(emb, axis=1) < 1e-3):
        return
    labels = list(np.random.default_rng(seed).integers(0, 3, len(emb)))
    ours = vicl_loss(ContrastiveBatch(emb, labels, tau, threshold)).item()
    assert ours >= 0
    assert ours == pytest.approx(oracles.vicl(emb, labels, tau, threshold), rel=1e-9, abs=1e-9)


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_lower_temperature_sharpens_when_positive_is_most_similar(seed):
    rng = np.random.default_rng(seed)
    emb = rng.standard_normal((5, 4))
    # with distinct labels every anchor falls back to its most similar element
    batch_hi = ContrastiveBatch(emb, [0, 1, 2, 3, 4], temperature=0.5)
    batch_lo = ContrastiveBatch(emb, [0, 1, 2, 3, 4], temperature=0.25)
    sims = cosine_matrix(emb).data
    np.fill_diagonal(sims, -np.inf)
    if np.any(np.sort(sims, axis=1)[:, -1] - np.sort(sims, axis=1)[:, -2] < 1e-9):
        return
    assert vicl_loss(batch_lo).item() < vicl_loss(batch_hi).item()


def test_permutation_consistency():
    rng = np.random.default_rng(3)
    emb, labels = rng.standard_normal((6, 4)), np.array([0, 1, 0, 2, 1, 0])
    base = select_positives(ContrastiveBatch(emb, labels))
    perm = rng.permutation(6)
    permuted = select_positives(ContrastiveBatch(emb[perm], labels[perm]))
    np.testing.assert_array_equal(perm[permuted], base[perm])
    assert np.array_equal(select_positives(ContrastiveBatch(emb, labels)), base)


@pytest.mark.parametrize("seed", range(4))
def test_gradient(seed):
    rng = np.random.default_rng(seed)
    emb = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    labels = rng.integers(0, 2, 5)
    report = check_gradients(lambda: vicl_loss(ContrastiveBatch(emb, labels)), [emb])
    assert report.passed, report
