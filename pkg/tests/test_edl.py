import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crest.edl import (
    AnnealSchedule,
    EdlWeights,
    ace_loss,
    acc_loss,
    consistency_loss,
    edl_total,
    fuse_alpha,
    kl_to_uniform,
    one_hot,
)
from crest.errors import DomainError
from crest.numgraph import Tensor, check_gradients
from crest.subjective_logic import conflict, opinion_from_alpha, opinion_from_evidence

import oracles


def test_ace_examples():
    assert float(ace_loss(np.array([2.0, 1.0]), np.array([1.0, 0.0]))) == pytest.approx(0.5, abs=1e-12)
    for y in np.eye(3):
        assert float(ace_loss(np.ones(3), y)) == pytest.approx(1.5, abs=1e-12)


def test_ace_decreases_toward_zero_as_true_evidence_grows():
    values = [float(ace_loss(np.array([a, 2.0, 3.0]), np.array([1.0, 0, 0]))) for a in (1, 10, 100, 1e4)]
    assert all(x > y for x, y in zip(values, values[1:]))
    assert 0 < values[-1] < 1e-3


def test_ace_rejects_soft_labels():
    with pytest.raises(DomainError):
        ace_loss(np.ones(2), np.array([0.5, 0.5]))


def test_kl_examples():
    assert float(kl_to_uniform(np.array([5.0, 1.0, 1.0]), np.array([1.0, 0, 0]))) == pytest.approx(0, abs=1e-12)
    assert float(kl_to_uniform(np.ones(3), np.array([0, 1.0, 0]))) == pytest.approx(0, abs=1e-12)
    ours = float(kl_to_uniform(np.array([1.0, 3.0, 1.0]), np.array([1.0, 0, 0])))
    assert ours == pytest.approx(oracles.dirichlet_kl([1, 3, 1], [1, 1, 1]), abs=1e-8)


def test_annealing_schedule():
    assert AnnealSchedule(10, 0).coefficient == 0.0
    assert AnnealSchedule(10, 5).coefficient == 0.5
    assert AnnealSchedule(10, 10).coefficient == 1.0
    assert AnnealSchedule(10, 100).coefficient == 1.0
    coeffs = [AnnealSchedule(7, t).coefficient for t in range(30)]
    assert coeffs == sorted(coeffs) and all(0 <= c <= 1 for c in coeffs)
    with pytest.raises(DomainError):
        AnnealSchedule(0, 1)


def test_acc_loss_annealing_points():
    alpha, y = np.array([2.0, 4.0, 1.5]), np.array([1.0, 0, 0])
    ace, kl = float(ace_loss(alpha, y)), float(kl_to_uniform(alpha, y))
    assert float(acc_loss(alpha, y, AnnealSchedule(10, 0))) == pytest.approx(ace)
    assert float(acc_loss(alpha, y, AnnealSchedule(10, 5))) == pytest.approx(ace + 0.5 * kl)
    assert float(acc_loss(alpha, y, AnnealSchedule(10, 100))) == pytest.approx(ace + kl)


def test_consistency_examples():
    op = opinion_from_evidence(np.array([3.0, 1.0]))
    assert float(consistency_loss([op, op])) == 0.0
    vac = opinion_from_evidence(np.zeros(2))
    assert float(consistency_loss([vac, vac])) == 0.0
    other = opinion_from_evidence(np.array([0.0, 5.0]))
    assert float(consistency_loss([op, other])) == pytest.approx(2 * float(conflict(op, other)))
    with pytest.raises(DomainError):
        consistency_loss([op])


def test_consistency_three_modalities_oracle():
    ev = [np.array([3.0, 0.0, 1.0]), np.array([0.0, 2.0, 2.0]), np.array([1.0, 1.0, 6.0])]
    ours = float(consistency_loss([opinion_from_evidence(e) for e in ev]))
    ops = [oracles.opinion(list(e)) for e in ev]
    ref = sum(oracles.conflict(ops[p], ops[q]) for p in range(3) for q in range(3) if p != q) / 2
    assert ours == pytest.approx(ref, rel=1e-13)


def test_fuse_alpha_examples():
    a = np.array([4.0, 1.0, 1.0])
    for mode in ("weighted_average", "opinion_fusion", "plain_average"):
        np.testing.assert_allclose(fuse_alpha([a, a], mode), a, rtol=1e-13)
    np.testing.assert_allclose(fuse_alpha([a, np.ones(3)]), a)
    b = np.array([1.0, 4.0, 1.0])  # same uncertainty as a
    np.testing.assert_allclose(fuse_alpha([a, b]), (a + b) / 2)
    np.testing.assert_allclose(fuse_alpha([np.ones(3), np.ones(3)]), np.ones(3))
    with pytest.raises(DomainError):
        fuse_alpha([])
    with pytest.raises(DomainError):
        fuse_alpha([a, b], "median")


def test_fuse_alpha_opinion_mode_matches_fusion_rule():
    a, b = np.array([4.0, 2.0, 1.0]), np.array([1.0, 1.0, 9.0])
    ref_b, ref_u, _ = oracles.fuse(oracles.opinion(list(a - 1)), oracles.opinion(list(b - 1)))
    expected = 3 * np.array(ref_b) / ref_u + 1
    np.testing.assert_allclose(fuse_alpha([a, b], "opinion_fusion"), expected, rtol=1e-13)


def test_edl_total_reductions():
    rng = np.random.default_rng(0)
    a1, a2 = rng.uniform(1, 5, (4, 3)), rng.uniform(1, 5, (4, 3))
    y = one_hot([0, 2, 1, 1], 3)
    sched = AnnealSchedule(10, 3)
    only_fused = float(edl_total([a1, a2], y, sched, EdlWeights(0, 0)))
    assert only_fused == pytest.approx(float(acc_loss(fuse_alpha([a1, a2]), y, sched).mean()))
    same = float(edl_total([a1, a1], y, sched, EdlWeights(0, 1))) - float(edl_total([a1, a1], y, sched, EdlWeights(0, 0)))
    assert same == pytest.approx(0.0, abs=1e-14)


def test_edl_total_matches_loop_oracle():
    rng = np.random.default_rng(5)
    a1, a2 = rng.uniform(1, 6, (3, 4)), rng.uniform(1, 6, (3, 4))
    labels = [3, 0, 1]
    y = one_hot(labels, 4)
    t, e, beta, gamma = 4, 10, 0.7, 1.3
    lam = min(1, t / e)
    total = 0.0
    for i in range(3):
        u1, u2 = 4 / a1[i].sum(), 4 / a2[i].sum()
        w1, w2 = (1 - u1) / (2 - u1 - u2), (1 - u2) / (2 - u1 - u2)
        fused = w1 * a1[i] + w2 * a2[i]
        acc = lambda a: oracles.ace(a, y[i]) + lam * oracles.kl_uniform(a, y[i])
        o1, o2 = oracles.opinion(list(a1[i] - 1)), oracles.opinion(list(a2[i] - 1))
        total += acc(fused) + beta * (acc(a1[i]) + acc(a2[i])) + gamma * 2 * oracles.conflict(o1, o2)
    ours = float(edl_total([a1, a2], y, AnnealSchedule(e, t), EdlWeights(beta, gamma)))
    assert ours == pytest.approx(total / 3, rel=1e-11)


@settings(max_examples=100)
@given(st.lists(st.floats(1.0, 50.0), min_size=2, max_size=6), st.data())
def test_ace_kl_nonnegative_and_signed_gradients(alpha, data):
    k = len(alpha)
    label = data.draw(st.integers(0, k - 1))
    y = np.eye(k)[label]
    assert float(ace_loss(np.array(alpha), y)) >= 0
    assert float(kl_to_uniform(np.array(alpha), y)) >= -1e-12
    a = Tensor(np.array(alpha), requires_grad=True)
    ace_loss(a, y).backward()
    assert a.grad[label] < 0
    assert all(a.grad[j] > 0 for j in range(k) if j != label)


def test_edl_total_gradient_all_modes():
    rng = np.random.default_rng(11)
    y = one_hot([1, 0, 2, 2], 3)
    for mode in ("weighted_average", "opinion_fusion", "plain_average"):
        a1 = Tensor(rng.uniform(1.2, 4, (4, 3)), requires_grad=True)
        a2 = Tensor(rng.uniform(1.2, 4, (4, 3)), requires_grad=True)
        report = check_gradients(lambda: edl_total([a1, a2], y, AnnealSchedule(10, 6), mode=mode), [a1, a2])
        assert report.passed, (mode, report)


def test_alpha_round_trip_through_opinion():
    alpha = np.array([1.5, 2.0, 7.0])
    op = opinion_from_alpha(alpha)
    assert float(op.uncertainty) == pytest.approx(3 / alpha.sum())
