"""Adaptive-moment gradient descent (Adam-style) over Tensor parameters."""

from __future__ import annotations

import numpy as np

from ..errors import MissingGradient


class OptimizerState:
    """First/second moment accumulators plus the step counter.

    Moments are keyed by parameter identity and shaped like their parameter.
    """

    def __init__(self, params, learning_rate=1e-3, betas=(0.9, 0.999), epsilon=1e-8):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.epsilon = epsilon
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]


def ensure_grads(params):
    """Zero-fill gradients of parameters a loss did not touch.

    A length-1 CRF chain, say, has no transition term; its gradient for the
    transition table is exactly zero, which optimizer_step requires spelled
    out.
    """
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


def optimizer_step(state):
    """Apply one update to every parameter, then clear gradients.

    p -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
    """
    for p in state.params:
        if p.grad is None:
            raise MissingGradient(
                f"parameter {p.name or '<unnamed>'} has no gradient before optimizer_step"
            )
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    lr = state.learning_rate
    for i, p in enumerate(state.params):
        g = p.grad
        state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g
        state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * (g * g)
        m_hat = state.first_moment[i] / (1.0 - b1 ** t)
        v_hat = state.second_moment[i] / (1.0 - b2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        p.grad = None
    return state
