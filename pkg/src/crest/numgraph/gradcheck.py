"""Central finite-difference verification of backward-pass gradients."""

from dataclasses import dataclass, field

import numpy as np

from crest.errors import NumericError


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    tol: float
    per_param: list = field(default_factory=list)

    def __str__(self):
        verdict = "pass" if self.passed else "FAIL"
        return f"gradcheck {verdict}: max rel err {self.max_rel_error:.3e} (tol {self.tol:.0e})"


def _evaluate(f):
    value = f()
    value = float(np.asarray(getattr(value, "data", value)))
    if not np.isfinite(value):
        raise NumericError(f"objective is not finite: {value}")
    return value


def check_gradients(f, params, h=1e-5, tol=1e-4, floor=1e-6):
    """Compare ``backward`` against (f(x+h) - f(x-h)) / 2h entry by entry.

    ``f`` takes no arguments and returns a scalar Tensor built from ``params``.
    The error of one entry is |analytic - numeric| / max(|analytic|, |numeric|, floor),
    so entries whose true gradient is below ``floor`` are judged on absolute error.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    for p in params:
        p.zero_grad()
    out = f()
    _evaluate(lambda: out)
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    per_param = []
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = _evaluate(f)
            flat[i] = orig - h
            down = _evaluate(f)
            flat[i] = orig
            numeric[i] = (up - down) / (2.0 * h)
        a = grad.reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), floor)
        err = float(np.max(np.abs(a - numeric) / denom)) if a.size else 0.0
        per_param.append(err)
        worst = max(worst, err)
    for p in params:
        p.zero_grad()
    return GradCheckReport(max_rel_error=worst, passed=worst < tol, tol=tol, per_param=per_param)
