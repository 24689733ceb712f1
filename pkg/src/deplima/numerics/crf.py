"""Linear-chain CRF machinery: partition, Viterbi, marginals, NLL.

A path y_1..y_n over L labels scores

    score(y) = sum_t emissions[t, y_t] + sum_{t>=1} transitions[y_{t-1}, y_t]

with no dedicated start/stop scores. The partition and marginals are built
from differentiable ops so gradients reach both emissions and transitions;
Viterbi works on plain arrays since decoding needs no gradient.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimMismatch
from . import tensor as T


def _check_dims(emissions, transitions):
    if emissions.data.ndim != 2:
        raise DimMismatch("emissions must be [n, L]")
    n, labels = emissions.data.shape
    if n < 1:
        raise DimMismatch("need at least one position")
    if transitions.data.shape != (labels, labels):
        raise DimMismatch(
            f"transitions shape {transitions.data.shape} does not match L={labels}"
        )
    return n, labels


def crf_log_partition(emissions, transitions):
    """log sum over all L^n paths of exp(path score), as a scalar tensor."""
    emissions = T.as_tensor(emissions)
    transitions = T.as_tensor(transitions)
    n, labels = _check_dims(emissions, transitions)
    alpha = T.row(emissions, 0)
    for t in range(1, n):
        lattice = T.add(T.reshape(alpha, (labels, 1)), transitions)
        alpha = T.add(T.logsumexp(lattice, axis=0), T.row(emissions, t))
    return T.logsumexp(alpha)


def crf_forward_backward(emissions, transitions):
    """Per-position label marginals as an [n, L] tensor (differentiable).

    Rows sum to one. Also returns the log partition computed on the way.
    """
    emissions = T.as_tensor(emissions)
    transitions = T.as_tensor(transitions)
    n, labels = _check_dims(emissions, transitions)
    alphas = [T.row(emissions, 0)]
    for t in range(1, n):
        lattice = T.add(T.reshape(alphas[-1], (labels, 1)), transitions)
        alphas.append(T.add(T.logsumexp(lattice, axis=0), T.row(emissions, t)))
    log_z = T.logsumexp(alphas[-1])

    betas = [None] * n
    betas[n - 1] = T.Tensor(np.zeros(labels))
    for t in range(n - 2, -1, -1):
        nxt = T.add(T.row(emissions, t + 1), betas[t + 1])
        lattice = T.add(transitions, T.reshape(nxt, (1, labels)))
        betas[t] = T.logsumexp(lattice, axis=1)

    marg_rows = [
        T.exp(T.sub(T.add(alphas[t], betas[t]), log_z)) for t in range(n)
    ]
    return T.stack(marg_rows), log_z


def crf_gold_score(emissions, transitions, labels):
    """Score of one label path as a scalar tensor."""
    emissions = T.as_tensor(emissions)
    transitions = T.as_tensor(transitions)
    n, _ = _check_dims(emissions, transitions)
    y = np.asarray(labels, dtype=np.intp)
    if y.shape != (n,):
        raise DimMismatch(f"label path length {y.shape} does not match n={n}")
    score = T.pick_sum(emissions, np.arange(n), y)
    if n > 1:
        score = T.add(score, T.pick_sum(transitions, y[:-1], y[1:]))
    return score


def crf_negative_log_likelihood(emissions, transitions, labels):
    return T.sub(crf_log_partition(emissions, transitions),
                 crf_gold_score(emissions, transitions, labels))


def viterbi_decode(emissions, transitions):
    """Highest-scoring label path.

    Ties break toward the lowest label index at each backtrack step, which
    selects the path whose reversed label sequence is lexicographically
    smallest among the optima.
    """
    e = emissions.data if isinstance(emissions, T.Tensor) else np.asarray(emissions, float)
    t = transitions.data if isinstance(transitions, T.Tensor) else np.asarray(transitions, float)
    if e.ndim != 2:
        raise DimMismatch("emissions must be [n, L]")
    n, labels = e.shape
    if t.shape != (labels, labels):
        raise DimMismatch(f"transitions shape {t.shape} does not match L={labels}")
    delta = e[0].copy()
    back = np.zeros((n, labels), dtype=np.intp)
    for step in range(1, n):
        # candidate[i, j] = delta[i] + t[i, j]; argmax picks lowest i on ties
        candidate = delta[:, None] + t
        back[step] = np.argmax(candidate, axis=0)
        delta = candidate[back[step], np.arange(labels)] + e[step]
    best = int(np.argmax(delta))
    path = [best]
    for step in range(n - 1, 0, -1):
        best = int(back[step][best])
        path.append(best)
    path.reverse()
    return path


def viterbi_score(emissions, transitions, path):
    e = emissions.data if isinstance(emissions, T.Tensor) else np.asarray(emissions, float)
    t = transitions.data if isinstance(transitions, T.Tensor) else np.asarray(transitions, float)
    y = list(path)
    total = sum(e[i, y[i]] for i in range(len(y)))
    total += sum(t[y[i - 1], y[i]] for i in range(1, len(y)))
    return float(total)


class CrfParams:
    """Label-pair transition scores for one tagging head."""

    def __init__(self, label_count, rng=None, name="crf"):
        self.label_count = label_count
        if rng is None:
            data = np.zeros((label_count, label_count))
        else:
            lim = T.xavier_limit(label_count, label_count)
            data = rng.uniform(-lim, lim, size=(label_count, label_count))
        self.transitions = T.Tensor(data, requires_grad=True, name=f"{name}.transitions")

    def parameters(self):
        return [self.transitions]
