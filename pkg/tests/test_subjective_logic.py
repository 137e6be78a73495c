import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crest.errors import DegenerateFusionError, DomainError, ShapeError
from crest.subjective_logic import (
    Opinion,
    conflict,
    evidence_from_opinion,
    fuse,
    fuse_many,
    opinion_from_alpha,
    opinion_from_evidence,
    project,
    uniform_base_rate,
)

from oracles import conflict as oracle_conflict
from oracles import fuse as oracle_fuse
from oracles import opinion as oracle_opinion


def test_vacuous_opinion():
    op = opinion_from_evidence(np.zeros(3))
    np.testing.assert_array_equal(op.belief, [0, 0, 0])
    assert op.uncertainty == 1.0


def test_opinion_from_evidence_hand_values():
    op = opinion_from_evidence(np.array([3.0, 0.0, 0.0]))
    np.testing.assert_allclose(op.belief, [0.5, 0, 0])
    assert op.uncertainty == pytest.approx(0.5)
    op2 = opinion_from_evidence(np.array([8.0, 0.0]))
    np.testing.assert_allclose(op2.belief, [0.8, 0])
    assert op2.uncertainty == pytest.approx(0.2)
    np.testing.assert_allclose(opinion_from_alpha(np.array([4.0, 1.0, 1.0])).belief, [0.5, 0, 0])


def test_negative_evidence_rejected():
    with pytest.raises(DomainError):
        opinion_from_evidence(np.array([1.0, -0.1]))


def test_projection_examples():
    np.testing.assert_allclose(project(opinion_from_evidence(np.zeros(4))), [0.25] * 4)
    p = project(opinion_from_evidence(np.array([3.0, 0.0, 0.0])))
    np.testing.assert_allclose(p, [0.5 + 1 / 6, 1 / 6, 1 / 6])


def test_fusion_hand_example():
    a = Opinion(np.array([0.8, 0.0]), 0.2, uniform_base_rate(2))
    b = Opinion(np.array([0.0, 0.2]), 0.8, uniform_base_rate(2))
    out = fuse(a, b)
    assert out.uncertainty == pytest.approx(0.32, abs=1e-15)
    np.testing.assert_allclose(out.belief, [0.64, 0.04], atol=1e-15)
    assert out.belief.sum() + out.uncertainty == pytest.approx(1.0, abs=1e-15)


def test_fusion_idempotent_and_many():
    op = opinion_from_evidence(np.array([2.0, 5.0, 1.0]))
    same = fuse(op, op)
    np.testing.assert_allclose(same.belief, op.belief, atol=1e-15)
    assert same.uncertainty == pytest.approx(op.uncertainty)
    triple = fuse_many([op, op, op])
    np.testing.assert_allclose(triple.belief, op.belief, atol=1e-15)
    assert fuse_many([op]) is op
    other = opinion_from_evidence(np.array([0.0, 1.0, 4.0]))
    np.testing.assert_array_equal(fuse_many([op, other]).belief, fuse(op, other).belief)
    with pytest.raises(DomainError):
        fuse_many([])


def test_fusion_degenerate_and_mismatched():
    dogmatic = Opinion(np.array([1.0, 0.0]), 0.0, uniform_base_rate(2))
    with pytest.raises(DegenerateFusionError):
        fuse(dogmatic, dogmatic)
    with pytest.raises(ShapeError):
        fuse(opinion_from_evidence(np.zeros(2)), opinion_from_evidence(np.zeros(3)))


def test_conflict_examples():
    op = opinion_from_evidence(np.array([4.0, 1.0]))
    assert conflict(op, op) == 0.0
    assert conflict(opinion_from_evidence(np.zeros(2)), op) == 0.0
    a = Opinion(np.array([1.0, 0.0]), 0.0, uniform_base_rate(2))
    b = Opinion(np.array([0.0, 1.0]), 0.0, uniform_base_rate(2))
    assert conflict(a, b) == pytest.approx(1.0)


def test_evidence_round_trip():
    e = np.array([0.5, 3.0, 0.0, 7.25])
    np.testing.assert_allclose(evidence_from_opinion(opinion_from_evidence(e)), e, rtol=1e-13)


def test_batched_opinions_match_rowwise():
    rng = np.random.default_rng(0)
    ea, eb = rng.exponential(2.0, (6, 4)), rng.exponential(2.0, (6, 4))
    fused = fuse(opinion_from_evidence(ea), opinion_from_evidence(eb))
    c = conflict(opinion_from_evidence(ea), opinion_from_evidence(eb))
    for i in range(6):
        ref = oracle_fuse(oracle_opinion(list(ea[i])), oracle_opinion(list(eb[i])))
        np.testing.assert_allclose(fused.belief[i], ref[0], rtol=1e-13)
        assert fused.uncertainty[i] == pytest.approx(ref[1], rel=1e-13)
        assert c[i] == pytest.approx(oracle_conflict(oracle_opinion(list(ea[i])), oracle_opinion(list(eb[i]))),
                                     rel=1e-12, abs=1e-15)


evidence = st.lists(st.floats(0, 1e3, allow_nan=False), min_size=2, max_size=6)


@settings(max_examples=200)
@given(st.data())
def test_fusion_properties(data):
    ea = data.draw(evidence)
    eb = data.draw(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=len(ea), max_size=len(ea)))
    a, b = opinion_from_evidence(np.array(ea)), opinion_from_evidence(np.array(eb))
    ab, ba = fuse(a, b), fuse(b, a)
    assert abs(ab.belief.sum() + ab.uncertainty - 1) <= 1e-9
    harmonic = 2 * a.uncertainty * b.uncertainty / (a.uncertainty + b.uncertainty)
    assert abs(ab.uncertainty - harmonic) <= 1e-12
    assert min(a.uncertainty, b.uncertainty) - 1e-15 <= ab.uncertainty <= max(a.uncertainty, b.uncertainty) + 1e-15
    np.testing.assert_allclose(ab.belief, ba.belief, atol=1e-12)
    c = conflict(a, b)
    assert 0.0 <= c <= 1.0
    assert c == conflict(b, a)
    p = project(ab)
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9
    ab.validate()
