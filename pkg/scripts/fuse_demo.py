"""Fuse a handful of evidence pairs and print opinions, projections and conflict."""

import numpy as np

from crest.subjective_logic import conflict, fuse, opinion_from_evidence, project

PAIRS = [
    ("agree", [8.0, 0.0, 0.0], [8.0, 0.0, 0.0]),
    ("oppose", [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]),
    ("one vacuous", [6.0, 1.0, 0.0], [0.0, 0.0, 0.0]),
    ("strong vs weak", [20.0, 0.0, 1.0], [0.0, 2.0, 0.0]),
]


def _fmt(values):
    return "(" + ", ".join(f"{v:.3f}" for v in np.atleast_1d(values)) + ")"


for name, ea, eb in PAIRS:
    a, b = opinion_from_evidence(np.array(ea)), opinion_from_evidence(np.array(eb))
    f = fuse(a, b)
    print(f"{name}: c={float(conflict(a, b)):.4f}")
    for label, op in (("A", a), ("B", b), ("fused", f)):
        print(f"  {label:5s} b={_fmt(op.belief)} u={float(op.uncertainty):.3f} p={_fmt(project(op))}")
