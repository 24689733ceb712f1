"""Gated recurrent encoders.

The cell is a two-gate gated recurrent unit:

    z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)        update gate
    r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)        reset gate
    c_t = tanh(Wc x_t + Uc (r_t * h_{t-1}) + bc)   candidate state
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t

With all-zero parameters and a zero initial state every h_t is zero.
A bidirectional encoder runs one cell left-to-right and an independent cell
right-to-left and concatenates the two states at each position.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimMismatch
from . import tensor as T


class GruCell:
    """One direction's parameters. ``prefix`` namespaces the tensor names."""

    def __init__(self, input_dim, hidden_dim, rng=None, prefix="gru"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        if rng is None:
            make = lambda n_out, n_in, name: T.Tensor(
                np.zeros((n_out, n_in)), requires_grad=True, name=name
            )
        else:
            make = lambda n_out, n_in, name: T.init_matrix(rng, n_out, n_in, name=name)
        self.wz = make(hidden_dim, input_dim, f"{prefix}.wz")
        self.uz = make(hidden_dim, hidden_dim, f"{prefix}.uz")
        self.bz = T.init_vector(hidden_dim, f"{prefix}.bz")
        self.wr = make(hidden_dim, input_dim, f"{prefix}.wr")
        self.ur = make(hidden_dim, hidden_dim, f"{prefix}.ur")
        self.br = T.init_vector(hidden_dim, f"{prefix}.br")
        self.wc = make(hidden_dim, input_dim, f"{prefix}.wc")
        self.uc = make(hidden_dim, hidden_dim, f"{prefix}.uc")
        self.bc = T.init_vector(hidden_dim, f"{prefix}.bc")

    def parameters(self):
        return [self.wz, self.uz, self.bz, self.wr, self.ur, self.br,
                self.wc, self.uc, self.bc]

    def initial_state(self):
        return T.Tensor(np.zeros(self.hidden_dim))

    def step(self, x, h):
        z = T.sigmoid(self.wz @ x + self.uz @ h + self.bz)
        r = T.sigmoid(self.wr @ x + self.ur @ h + self.br)
        c = T.tanh(self.wc @ x + self.uc @ T.mul(r, h) + self.bc)
        return T.add(T.mul(T.sub(1.0, z), h), T.mul(z, c))

    def run(self, inputs, h0=None):
        """States after each input, in input order."""
        h = self.initial_state() if h0 is None else h0
        states = []
        for x in inputs:
            h = self.step(x, h)
            states.append(h)
        return states


class BiRnnParams:
    """Forward + backward cells over a shared input dimension."""

    def __init__(self, input_dim, hidden_dim, rng=None, prefix="birnn"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.forward = GruCell(input_dim, hidden_dim, rng, prefix=f"{prefix}.fw")
        self.backward = GruCell(input_dim, hidden_dim, rng, prefix=f"{prefix}.bw")

    @property
    def output_dim(self):
        return 2 * self.hidden_dim

    def parameters(self):
        return self.forward.parameters() + self.backward.parameters()


def birnn_forward(params, inputs):
    """Per-position concat(left-to-right state, right-to-left state).

    inputs: non-empty list of vectors of params.input_dim.
    Returns a list of vectors of 2 * params.hidden_dim.
    """
    if not inputs:
        raise DimMismatch("birnn_forward needs a non-empty input sequence")
    for x in inputs:
        if x.data.shape != (params.input_dim,):
            raise DimMismatch(
                f"birnn input has shape {x.data.shape}, expected ({params.input_dim},)"
            )
    fw = params.forward.run(inputs)
    bw_rev = params.backward.run(list(reversed(inputs)))
    bw = list(reversed(bw_rev))
    return [T.concat([f, b]) for f, b in zip(fw, bw)]
