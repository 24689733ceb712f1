"""Arborescence decoding against exhaustive single-root enumeration."""

import itertools

import numpy as np
import pytest

from deplima.errors import DimMismatch
from deplima.mst import decode_heads, is_tree, tree_score


def brute_best_tree(arc_scores):
    """Best single-root arborescence by enumerating all head assignments."""
    n = arc_scores.shape[1]
    best_heads, best_score = None, None
    choices = [[h for h in range(n + 1) if h != d + 1] for d in range(n)]
    for heads in itertools.product(*choices):
        if sum(1 for h in heads if h == 0) != 1:
            continue
        if not is_tree(list(heads)):
            continue
        score = tree_score(arc_scores, list(heads))
        if best_score is None or score > best_score:
            best_heads, best_score = list(heads), score
    return best_heads, best_score


def test_single_token():
    assert decode_heads(np.zeros((2, 1))) == [0]
    assert decode_heads(np.array([[1.0], [5.0]])) == [0]


def test_greedy_cycle_is_repaired():
    # tokens 1 and 2 prefer each other; the tree must break the 2-cycle
    scores = np.array(
        [
            [1.0, 1.0],   # root -> 1, root -> 2
            [0.0, 10.0],  # 1 -> 2
            [10.0, 0.0],  # 2 -> 1
        ]
    )
    heads = decode_heads(scores)
    assert is_tree(heads)
    greedy = [int(np.argmax(scores[:, d])) for d in range(2)]
    assert greedy == [2, 1]  # greedy picks the cycle
    assert heads != greedy
    _, best = brute_best_tree(scores)
    assert abs(tree_score(scores, heads) - best) < 1e-12


def test_single_root_constraint_enforced():
    # unconstrained optimum would attach both tokens to root
    scores = np.array(
        [
            [5.0, 5.0],
            [0.0, 1.0],
            [1.0, 0.0],
        ]
    )
    heads = decode_heads(scores)
    assert sum(1 for h in heads if h == 0) == 1
    want, _ = brute_best_tree(scores)
    assert heads == want


def test_randomized_against_brute_force():
    rng = np.random.default_rng(99)
    for _ in range(120):
        n = int(rng.integers(1, 7))
        scores = rng.normal(size=(n + 1, n))
        heads = decode_heads(scores)
        assert is_tree(heads)
        want, want_score = brute_best_tree(scores)
        assert heads == want, (scores, heads, want)
        assert abs(tree_score(scores, heads) - want_score) < 1e-9


def test_mst_beats_or_equals_greedy_when_greedy_is_tree():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 25:
        n = int(rng.integers(2, 6))
        scores = rng.normal(size=(n + 1, n))
        greedy = [int(np.argmax(scores[:, d])) for d in range(n)]
        if not is_tree(greedy):
            continue
        checked += 1
        heads = decode_heads(scores)
        assert tree_score(scores, heads) >= tree_score(scores, greedy) - 1e-12


def test_bad_shape_rejected():
    with pytest.raises(DimMismatch):
        decode_heads(np.zeros((3, 3)))
