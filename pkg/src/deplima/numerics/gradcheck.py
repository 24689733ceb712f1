"""Finite-difference validation of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteValue


def grad_check(f, params, step=1e-4, max_coords_per_param=50, seed=0):
    """Compare reverse-mode gradients of ``f()`` against central differences.

    ``f`` must be a pure scalar computation over ``params`` (trainable
    tensors); it is re-evaluated with coordinates of each parameter nudged by
    +/- ``step``. For large parameters a seeded sample of coordinates is
    checked. Returns the maximum relative error

        |analytic - numeric| / max(|analytic| + |numeric|, 1e-6)

    over all checked coordinates.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    for p in params:
        p.grad = None
    out = f()
    if not np.all(np.isfinite(out.data)):
        raise NonFiniteValue("objective is non-finite")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        size = flat.size
        if size <= max_coords_per_param:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords_per_param, replace=False)
        for c in coords:
            original = flat[c]
            flat[c] = original + step
            plus = float(f().data)
            flat[c] = original - step
            minus = float(f().data)
            flat[c] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NonFiniteValue("objective became non-finite during probing")
            numeric = (plus - minus) / (2.0 * step)
            a = grad.reshape(-1)[c]
            err = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6)
            if err > worst:
                worst = err
    for p in params:
        p.grad = None
    return worst
