"""Adam with coupled (L2-in-gradient) weight decay."""

from dataclasses import dataclass, field

import numpy as np

from crest.errors import ShapeError


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params, **hyper):
        state = cls(**hyper)
        state.first_moment = [np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params]
        state.second_moment = [np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params]
        return state


def adam_step(params, grads, state):
    """Return (new parameter arrays, state) after one bias-corrected Adam update.

    The input arrays are not modified; the state's moment buffers are replaced.
    """
    if not (len(params) == len(grads) == len(state.first_moment) == len(state.second_moment)):
        raise ShapeError("params, grads and moment buffers differ in count")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"adam shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        g = g + state.weight_decay * p
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        step = state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    state.first_moment = new_m
    state.second_moment = new_v
    state.step_count = t
    return new_params, state


class Adam:
    """Applies ``adam_step`` to a list of leaf Tensors in place."""

    def __init__(self, params, lr=1e-4, weight_decay=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.state = AdamState.zeros_like(
            [p.data for p in self.params],
            learning_rate=lr, weight_decay=weight_decay,
            beta1=betas[0], beta2=betas[1], epsilon=eps,
        )

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        updated, self.state = adam_step([p.data for p in self.params], grads, self.state)
        for p, new in zip(self.params, updated):
            p.data = new
