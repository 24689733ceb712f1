"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a row-major numpy array of 64-bit floats. Operations record
their parents on a tape (unless recording is disabled with no_grad), and
``backward()`` on a scalar result accumulates gradients into every reachable
tensor created with ``requires_grad=True``.

The op set is deliberately small: what the recurrent encoders, CRF layers,
and scorers in this package actually need. Elementwise ops broadcast with
numpy semantics; gradients are summed back to parent shapes.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager

import numpy as np

from ..errors import DimMismatch, MissingGradient

# recording state is thread-local: concurrent inference over shared frozen
# parameters must not flip a global flag under other threads
_RECORDING = threading.local()


def grad_enabled():
    return getattr(_RECORDING, "enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference mode)."""
    prev = grad_enabled()
    _RECORDING.enabled = False
    try:
        yield
    finally:
        _RECORDING.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    # ---- spec'd surface -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def values(self):
        """Flat row-major view of the payload."""
        return self.data.reshape(-1)

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # ---- autodiff -------------------------------------------------------

    def backward(self, seed=None):
        """Accumulate gradients of this (scalar) tensor w.r.t. all leaves."""
        if seed is None:
            if self.data.size != 1:
                raise DimMismatch("backward() without seed needs a scalar tensor")
            seed = np.ones_like(self.data)
        # Iterative topological order: RNN tapes are deep enough to blow the
        # recursion limit.
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(seed, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    # ---- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    """Wrap an op result, recording the tape edge when grad is enabled."""
    requires = grad_enabled() and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    if requires:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to a parent's ``shape`` after broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ---- elementwise ---------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward)


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        a._accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out_data)

    return _make(out_data, (a,), backward)


def log(a):
    a = as_tensor(a)
    out_data = np.log(a.data)

    def backward(g):
        a._accumulate(g / a.data)

    return _make(out_data, (a,), backward)


# ---- reductions ----------------------------------------------------------


def tsum(a, axis=None):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            a._accumulate(np.full_like(a.data, float(g)))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _make(out_data, (a,), backward)


def mean(a):
    a = as_tensor(a)
    return mul(tsum(a), 1.0 / a.data.size)


def logsumexp(a, axis=None):
    """log(sum(exp(a))) along ``axis`` (all elements when None), stable."""
    a = as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    shifted = np.exp(a.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out_keep = m + np.log(total)
    soft = shifted / total
    out_data = out_keep if axis is None else np.squeeze(out_keep, axis=axis)
    if axis is None:
        out_data = out_data.reshape(())

    def backward(g):
        if axis is None:
            a._accumulate(soft * float(g))
        else:
            a._accumulate(soft * np.expand_dims(g, axis))

    return _make(out_data, (a,), backward)


# ---- linear algebra ------------------------------------------------------


def matmul(a, b):
    """Matrix product for the 1D/2D combinations the encoders use."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise DimMismatch(f"matmul supports 1D/2D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimMismatch(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 2 and bd.ndim == 1:
            a._accumulate(np.outer(g, bd))
            b._accumulate(ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 2:
            a._accumulate(bd @ g)
            b._accumulate(np.outer(ad, g))
        elif ad.ndim == 2 and bd.ndim == 2:
            a._accumulate(g @ bd.T)
            b._accumulate(ad.T @ g)
        else:  # 1D @ 1D -> scalar
            a._accumulate(g * bd)
            b._accumulate(g * ad)

    return _make(out_data, (a, b), backward)


def transpose(a):
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise DimMismatch("transpose expects a matrix")

    def backward(g):
        a._accumulate(g.T)

    return _make(a.data.T, (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)
    orig = a.data.shape

    def backward(g):
        a._accumulate(g.reshape(orig))

    return _make(a.data.reshape(shape), (a,), backward)


# ---- structural ----------------------------------------------------------


def concat(parts, axis=0):
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def backward(g):
        offset = 0
        for p, size in zip(parts, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + size)
            p._accumulate(g[tuple(index)])
            offset += size

    return _make(out_data, tuple(parts), backward)


def stack(rows):
    """Stack equal-length vectors into a matrix (sequence -> emissions)."""
    rows = [as_tensor(r) for r in rows]
    out_data = np.stack([r.data for r in rows])

    def backward(g):
        for i, r in enumerate(rows):
            r._accumulate(g[i])

    return _make(out_data, tuple(rows), backward)


def row(a, i):
    """Select row ``i`` of a matrix as a vector (embedding lookup)."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise DimMismatch("row() expects a matrix")
    i = int(i)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[i] = g
            a._accumulate(full)

    return _make(a.data[i].copy(), (a,), backward)


def rows(a, indices):
    """Gather several rows of a matrix into a new matrix."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            a._accumulate(full)

    return _make(a.data[idx].copy(), (a,), backward)


def pick(a, index):
    """Single element of a 1D/2D tensor as a scalar tensor."""
    a = as_tensor(a)
    index = tuple(int(i) for i in np.atleast_1d(index)) if not np.isscalar(index) else (int(index),)
    if len(index) != a.data.ndim:
        raise DimMismatch(f"pick index {index} does not address shape {a.shape}")

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = float(g)
            a._accumulate(full)

    return _make(np.asarray(a.data[index]), (a,), backward)


def pick_sum(a, row_idx, col_idx):
    """Sum of matrix entries a[row_idx[k], col_idx[k]] as a scalar tensor."""
    a = as_tensor(a)
    ri = np.asarray(row_idx, dtype=np.intp)
    ci = np.asarray(col_idx, dtype=np.intp)
    out_data = np.asarray(a.data[ri, ci].sum())

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, (ri, ci), float(g))
            a._accumulate(full)

    return _make(out_data, (a,), backward)


# ---- parameter initialization --------------------------------------------


def xavier_limit(fan_in, fan_out):
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_matrix(rng, n_out, n_in, name=None):
    """Trainable matrix with uniform(-sqrt(6/(fan_in+fan_out)), +...) init."""
    lim = xavier_limit(n_in, n_out)
    return Tensor(rng.uniform(-lim, lim, size=(n_out, n_in)), requires_grad=True, name=name)


def init_table(rng, n_rows, dim, name=None):
    """Trainable embedding table, same uniform fan-based init."""
    lim = xavier_limit(n_rows, dim)
    return Tensor(rng.uniform(-lim, lim, size=(n_rows, dim)), requires_grad=True, name=name)


def init_vector(n, name=None):
    """Trainable bias vector, zero-initialized."""
    return Tensor(np.zeros(n), requires_grad=True, name=name)


def check_finite(t, what="tensor"):
    if not np.all(np.isfinite(t.data if isinstance(t, Tensor) else t)):
        from ..errors import NonFiniteValue

        raise NonFiniteValue(f"{what} contains non-finite values")


def require_grads(params):
    for p in params:
        if p.grad is None:
            raise MissingGradient(f"parameter {p.name or '<unnamed>'} has no gradient")
