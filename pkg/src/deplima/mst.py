"""Maximum spanning arborescence decoding for dependency parsing.

Heads are decoded with the Chu-Liu/Edmonds contraction algorithm over a
dense score matrix. Universal Dependencies trees need exactly one child of
the artificial root, so when the unconstrained optimum attaches several
tokens to the root, every candidate root is tried with the other root arcs
disabled and the best-scoring tree wins (lowest candidate index on ties).
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatch

_NEG = -1e18


def _find_cycle(head, n_nodes):
    """A cycle in the head-pointer graph (node 0 has no pointer), or None."""
    color = [0] * n_nodes
    for start in range(1, n_nodes):
        if color[start]:
            continue
        path = []
        v = start
        while v != 0 and color[v] == 0:
            color[v] = 1
            path.append(v)
            v = head[v]
        if v != 0 and color[v] == 1:
            cycle = path[path.index(v):]
            for p in path:
                color[p] = 2
            return cycle
        for p in path:
            color[p] = 2
    return None


def _cle(scores):
    """Best arborescence over square matrix scores[h][d], rooted at node 0.

    Greedy per-column argmax (lowest head index on ties), then contract and
    recurse when the greedy choice forms a cycle.
    """
    n_nodes = scores.shape[0]
    head = np.full(n_nodes, -1, dtype=np.intp)
    for d in range(1, n_nodes):
        column = scores[:, d].copy()
        column[d] = _NEG
        head[d] = int(np.argmax(column))
    cycle = _find_cycle(head, n_nodes)
    if cycle is None:
        return head

    in_cycle = set(cycle)
    outside = [v for v in range(n_nodes) if v not in in_cycle]
    contracted_size = len(outside) + 1
    c_new = contracted_size - 1
    new_of_old = {v: i for i, v in enumerate(outside)}
    old_of_new = {i: v for i, v in enumerate(outside)}

    reduced = np.full((contracted_size, contracted_size), _NEG)
    enter_choice = {}
    leave_choice = {}
    for u in outside:
        best_w, best_v = _NEG, cycle[0]
        for v in cycle:
            w = scores[u, v] - scores[head[v], v]
            if w > best_w:
                best_w, best_v = w, v
        reduced[new_of_old[u], c_new] = best_w
        enter_choice[new_of_old[u]] = best_v
    for u in outside:
        if u == 0:
            continue
        best_w, best_v = _NEG, cycle[0]
        for v in cycle:
            if scores[v, u] > best_w:
                best_w, best_v = scores[v, u], v
        reduced[c_new, new_of_old[u]] = best_w
        leave_choice[new_of_old[u]] = best_v
    for u in outside:
        for w in outside:
            if u != w:
                reduced[new_of_old[u], new_of_old[w]] = scores[u, w]

    sub_head = _cle(reduced)

    result = np.full(n_nodes, -1, dtype=np.intp)
    for d_new in range(1, contracted_size):
        if d_new == c_new:
            continue
        d_old = old_of_new[d_new]
        h_new = sub_head[d_new]
        result[d_old] = leave_choice[d_new] if h_new == c_new else old_of_new[h_new]
    entry_head_new = sub_head[c_new]
    entry_v = enter_choice[entry_head_new]
    for v in cycle:
        result[v] = old_of_new[entry_head_new] if v == entry_v else head[v]
    return result


def _tree_score(square, head, n_tokens):
    return float(sum(square[head[d], d] for d in range(1, n_tokens + 1)))


def decode_heads(arc_scores):
    """Decode heads from an [n+1, n] score matrix (row 0 = artificial root).

    Column d scores candidate heads of token d+1. Returns a list of n head
    positions in 0..n with exactly one 0, forming a tree over the tokens.
    """
    arc_scores = np.asarray(arc_scores, dtype=np.float64)
    if arc_scores.ndim != 2 or arc_scores.shape[0] != arc_scores.shape[1] + 1:
        raise DimMismatch(f"arc score matrix must be [n+1, n], got {arc_scores.shape}")
    n_tokens = arc_scores.shape[1]
    if n_tokens == 1:
        return [0]
    square = np.full((n_tokens + 1, n_tokens + 1), _NEG)
    square[:, 1:] = arc_scores
    head = _cle(square)
    root_children = [d for d in range(1, n_tokens + 1) if head[d] == 0]
    if len(root_children) == 1:
        return [int(head[d]) for d in range(1, n_tokens + 1)]

    best_head, best_score = None, None
    for candidate in range(1, n_tokens + 1):
        constrained = square.copy()
        constrained[0, 1:] = _NEG
        constrained[0, candidate] = square[0, candidate]
        h = _cle(constrained)
        score = _tree_score(constrained, h, n_tokens)
        if best_score is None or score > best_score:
            best_head, best_score = h, score
    return [int(best_head[d]) for d in range(1, n_tokens + 1)]


def is_tree(heads):
    """True when every token reaches the root and exactly one attaches to it."""
    n_tokens = len(heads)
    if sum(1 for h in heads if h == 0) != 1:
        return False
    for start in range(1, n_tokens + 1):
        seen = set()
        v = start
        while v != 0:
            if v in seen or not (1 <= v <= n_tokens):
                return False
            seen.add(v)
            v = heads[v - 1]
    return True


def tree_score(arc_scores, heads):
    """Summed arc scores of a head assignment under an [n+1, n] matrix."""
    arc_scores = np.asarray(arc_scores, dtype=np.float64)
    return float(sum(arc_scores[heads[d], d] for d in range(arc_scores.shape[1])))
