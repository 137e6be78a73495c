"""Independent reference implementations used as test oracles.

Nothing here imports the package's numeric code: special functions come from
scipy and every loss is written as a plain per-element loop.
"""

import math

import numpy as np
from scipy.special import digamma, gammaln


def ace(alpha, y):
    s = sum(alpha)
    return sum(yj * (digamma(s) - digamma(aj)) for aj, yj in zip(alpha, y))


def dirichlet_kl(alpha, beta):
    """KL[Dir(alpha) || Dir(beta)], closed form."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    a0, b0 = alpha.sum(), beta.sum()
    return float(gammaln(a0) - gammaln(alpha).sum() - gammaln(b0) + gammaln(beta).sum()
                 + ((alpha - beta) * (digamma(alpha) - digamma(a0))).sum())


def kl_uniform(alpha, y):
    tilde = [yj + (1 - yj) * aj for aj, yj in zip(alpha, y)]
    return dirichlet_kl(tilde, np.ones(len(alpha)))


def opinion(evidence):
    k = len(evidence)
    s = sum(evidence) + k
    return [e / s for e in evidence], k / s, [1.0 / k] * k


def fuse(op_a, op_b):
    (ba, ua, aa), (bb, ub, ab) = op_a, op_b
    b = [(x * ub + y * ua) / (ua + ub) for x, y in zip(ba, bb)]
    return b, 2 * ua * ub / (ua + ub), [(x + y) / 2 for x, y in zip(aa, ab)]


def projected(op):
    b, u, a = op
    return [bk + ak * u for bk, ak in zip(b, a)]


def conflict(op_a, op_b):
    pa, pb = projected(op_a), projected(op_b)
    gap = sum(abs(x - y) for x, y in zip(pa, pb)) / 2
    return gap * (1 - op_a[1]) * (1 - op_b[1])


def cosine(u, v):
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def vicl(embeddings, labels, tau, threshold):
    """Loop form of the contrastive loss, positives chosen by enumeration."""
    n = len(labels)
    total = 0.0
    for i in range(n):
        sims = {j: cosine(embeddings[i], embeddings[j]) for j in range(n) if j != i}
        same = [j for j in sims if labels[j] == labels[i]]
        best_same = min(same, key=lambda j: (-sims[j], j)) if same else None
        if best_same is not None and sims[best_same] >= threshold:
            pos = best_same
        else:
            pos = min(sims, key=lambda j: (-sims[j], j))
        denom = sum(math.exp(s / tau) for s in sims.values())
        total += -(sims[pos] / tau - math.log(denom))
    return total / n


def digs(queries, patterns, margin):
    total = 0.0
    for q in queries:
        sims = [float(np.dot(q, phi)) for phi in patterns]
        order = sorted(range(len(patterns)), key=lambda j: (-sims[j], j))
        p, n = order[0], order[1]
        dp = float(np.sum((q - patterns[p]) ** 2))
        dn = float(np.sum((q - patterns[n]) ** 2))
        total += max(dp - dn + margin, 0.0) + dp
    return total


def arise(scores, label, seen, unseen, lambda_cal, delta):
    """Per-instance loss for one row of class scores."""
    seen_scores = [scores[c] for c in seen]
    log_z_seen = math.log(sum(math.exp(s) for s in seen_scores))
    ce = -(scores[label] - log_z_seen)
    shifted = [scores[c] + (delta if c in unseen else 0.0) for c in range(len(scores))]
    log_z_all = math.log(sum(math.exp(s) for s in shifted))
    return ce - lambda_cal * sum(shifted[u] - log_z_all for u in unseen)


def harmonic(s, u):
    return 0.0 if s + u == 0 else 2 * s * u / (s + u)
