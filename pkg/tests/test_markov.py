import random

import numpy as np
import pytest

from aifv.forest import CodeForest
from aifv.markov import (
    SingularChainError,
    block_decompose,
    cost_update_general,
    cost_update_simple,
    costs_invariant,
    expected_length,
    stationary,
    transition_matrix,
    worst_block_invariant,
)
from conftest import make_tree


def random_stochastic(rng, k):
    m = np.array([[rng.random() for _ in range(k)] for _ in range(k)])
    return m / m.sum(axis=1, keepdims=True)


def test_transition_matrix_single_tree():
    t = make_tree(1, [""], [("0", 0), ("1", 0)])
    f = CodeForest((t,), 1)
    assert np.array_equal(transition_matrix(f, [0.5, 0.5]), [[1.0]])


def test_transition_matrix_two_cycle():
    t0 = make_tree(2, [""], [("0", 1), ("1", 1)])
    t1 = make_tree(2, [""], [("0", 0), ("1", 0)])
    f = CodeForest((t0, t1), 2)
    assert np.array_equal(transition_matrix(f, [0.3, 0.7]), [[0, 1], [1, 0]])


def test_transition_matrix_demo_row0(demo_forest):
    pa, pb, pc = 0.5, 0.3, 0.2
    mat = transition_matrix(demo_forest, [pa, pb, pc])
    # tree 0 links: symbol a -> 1, b -> 2, c -> 0
    assert np.allclose(mat[0], [pc, pa, pb, 0.0, 0.0])
    assert np.allclose(mat.sum(axis=1), 1.0)


def test_transition_matrix_rejects_bad_distribution(demo_forest):
    with pytest.raises(ValueError):
        transition_matrix(demo_forest, [0.5, 0.5, 0.1])
    with pytest.raises(ValueError):
        transition_matrix(demo_forest, [1.0, 0.0, 0.0])


def test_block_decompose_irreducible():
    blocks = block_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert blocks.blocks == ((0, 1),)
    assert blocks.n_absorbing == 1


def test_block_decompose_feeder():
    blocks = block_decompose(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert blocks.blocks == ((0,), (1,))
    assert blocks.n_absorbing == 1


def test_block_decompose_two_disjoint_cycles():
    blocks = block_decompose(np.eye(2))
    assert blocks.blocks == ((0,), (1,))
    assert blocks.n_absorbing == 2


def test_block_decompose_partition_and_triangularity():
    rng = random.Random(4)
    for _ in range(60):
        k = rng.randrange(2, 9)
        mat = np.zeros((k, k))
        for i in range(k):
            targets = rng.sample(range(k), rng.randrange(1, min(3, k) + 1))
            for t in targets:
                mat[i, t] = 1.0
            mat[i] /= mat[i].sum()
        blocks = block_decompose(mat)
        assert sorted(blocks.order) == list(range(k))
        start = {}
        pos = 0
        for j, b in enumerate(blocks.blocks):
            for s in b:
                start[s] = j
            pos += len(b)
        for i in range(k):
            for j in range(k):
                if mat[i, j] > 0 and start[i] != start[j]:
                    assert start[j] < start[i], "edge points to a later block"
        for j in range(blocks.n_absorbing):
            members = set(blocks.blocks[j])
            for s in members:
                assert all(mat[s, t] == 0 for t in range(k) if t not in members)


def test_stationary_symmetric_cycle():
    mat = np.array([[0.0, 1.0], [1.0, 0.0]])
    (pi,) = stationary(mat, block_decompose(mat))
    assert np.allclose(pi, [0.5, 0.5])


def test_stationary_hand_solved():
    # balance equations of [[.5,.5],[1,0]] give (2/3, 1/3)
    mat = np.array([[0.5, 0.5], [1.0, 0.0]])
    (pi,) = stationary(mat, block_decompose(mat))
    assert np.allclose(pi, [2 / 3, 1 / 3], atol=1e-12)


def test_stationary_singleton():
    mat = np.array([[1.0]])
    (pi,) = stationary(mat, block_decompose(mat))
    assert pi == pytest.approx([1.0])


def test_stationary_balance_random_chains():
    rng = random.Random(17)
    for _ in range(25):
        k = rng.randrange(2, 51)
        mat = random_stochastic(rng, k)
        blocks = block_decompose(mat)
        assert blocks.n_absorbing == 1  # dense positive matrix is irreducible
        (pi,) = stationary(mat, blocks)
        assert np.all(pi >= -1e-12)
        assert abs(pi.sum() - 1.0) <= 1e-10
        assert np.max(np.abs(pi @ mat - pi)) <= 1e-10


def test_expected_length():
    assert expected_length([1.0, 1.0], np.array([0.5, 0.5])) == pytest.approx(1.0)
    assert expected_length([1.0, 2.0], np.array([2 / 3, 1 / 3])) == pytest.approx(4 / 3)


def test_cost_update_simple_k1():
    assert np.array_equal(cost_update_simple([1.0], np.array([[1.0]]), 1.0), [0.0])


def test_cost_update_simple_hand_solved():
    mat = np.array([[0.5, 0.5], [1.0, 0.0]])
    costs = cost_update_simple([1.0, 2.0], mat, 4 / 3)
    assert np.allclose(costs, [0.0, 2 / 3], atol=1e-12)


def test_cost_update_simple_self_consistent():
    rng = random.Random(23)
    for _ in range(20):
        k = rng.randrange(2, 8)
        mat = random_stochastic(rng, k)
        lengths = [1 + rng.random() for _ in range(k)]
        blocks = block_decompose(mat)
        (pi,) = stationary(mat, blocks)
        lbar = expected_length(lengths, pi)
        costs = cost_update_simple(lengths, mat, lbar)
        again = cost_update_simple(lengths, mat, lbar)
        assert np.array_equal(costs, again)
        # the defining linear identity holds on the non-pinned states
        resid = lengths + (mat - np.eye(k)) @ costs - lbar
        assert np.max(np.abs(resid)) <= 1e-9


def test_cost_update_simple_singular_raises():
    # tree 1 never reaches tree 0
    mat = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SingularChainError):
        cost_update_simple([1.0, 2.0], mat, 1.0)


def test_cost_update_general_matches_simple_on_irreducible():
    rng = random.Random(31)
    for _ in range(20):
        k = rng.randrange(2, 10)
        mat = random_stochastic(rng, k)
        lengths = [1 + rng.random() for _ in range(k)]
        blocks = block_decompose(mat)
        (pi,) = stationary(mat, blocks)
        lbar = expected_length(lengths, pi)
        simple = cost_update_simple(lengths, mat, lbar)
        general, lbars, j_star = cost_update_general(lengths, mat, blocks)
        assert j_star == 0
        assert lbars == pytest.approx([lbar])
        assert np.max(np.abs(general - simple)) <= 1e-12


def test_cost_update_general_disjoint_singletons():
    mat = np.eye(2)
    costs, lbars, j_star = cost_update_general([1.0, 2.0], mat, block_decompose(mat))
    assert np.array_equal(costs, [0.0, 0.0])
    assert lbars == pytest.approx([1.0, 2.0])
    assert j_star == 1


def test_cost_update_general_feeder_chain():
    # state 1 feeds the absorbing state 0 and never self-loops:
    # its cost solves (0 - 1) c = lbar_star - L_1 - P_{1,0} * C_0
    mat = np.array([[1.0, 0.0], [1.0, 0.0]])
    lengths = [1.0, 2.5]
    costs, lbars, j_star = cost_update_general(lengths, mat, block_decompose(mat))
    assert lbars == pytest.approx([1.0])
    assert j_star == 0
    assert costs[0] == 0.0
    assert costs[1] == pytest.approx(2.5 - 1.0)


def test_costs_invariant_tolerances():
    assert costs_invariant([1.0, 2.0], [1.0, 2.0])
    assert not costs_invariant([1.0, 2.0 + 1e-13], [1.0, 2.0], tol=1e-14)
    assert costs_invariant([1.0, 2.0 + 0.5e-14], [1.0, 2.0], tol=1e-14)


def test_worst_block_invariant_rebases():
    c_old = np.array([5.0, 7.0, 9.0])
    block = np.array([0.0, 2.0])
    assert worst_block_invariant(block, c_old, [1, 2], tol=1e-14)
    assert not worst_block_invariant(np.array([0.0, 2.1]), c_old, [1, 2], tol=1e-14)
