import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dacratio import (DirectedGraph, Plant, from_sparsity, is_supergraph, sink_ordering, sinks,
                      validate_plant, validate_structure)


def test_running_instance_graph_and_sinks():
    g = from_sparsity([[0, 0], [2, 0]])
    assert g.adjacency.tolist() == [[0, 0], [1, 0]]
    assert g.has_edge(0, 1) and not g.has_edge(1, 0)
    assert sinks(g) == [1]


def test_sinks_ignore_self_loops():
    assert sinks(DirectedGraph([[1, 0], [1, 1]])) == [1]
    assert sinks(DirectedGraph.complete(3)) == []
    assert sinks(DirectedGraph.identity(2)) == [0, 1]


def test_from_sparsity_tolerance():
    A = [[1e-14, 0], [1.0, -3.0]]
    assert from_sparsity(A).adjacency.tolist() == [[1, 0], [1, 1]]
    assert from_sparsity(A, tol=1e-12).adjacency.tolist() == [[0, 0], [1, 1]]
    with pytest.raises(ValueError):
        from_sparsity(A, tol=-1)


def test_adjacency_validation():
    for bad in ([[0, 2], [0, 0]], [[0, 1, 0]], np.zeros((0, 0))):
        with pytest.raises(ValueError):
            DirectedGraph(bad)
    g = DirectedGraph([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        g.adjacency[0, 0] = 1


def test_supergraph():
    g = DirectedGraph([[0, 0], [1, 0]])
    assert is_supergraph(DirectedGraph.complete(2), g)
    assert not is_supergraph(DirectedGraph.identity(2), g)
    assert is_supergraph(g, g)
    with pytest.raises(ValueError):
        is_supergraph(g, DirectedGraph.complete(3))


def test_validate_structure_flags():
    plant = DirectedGraph([[0, 0, 0], [1, 0, 0], [0, 0, 0]])  # node 2 isolated
    report = validate_structure(plant, DirectedGraph.identity(3), DirectedGraph([[1, 0, 0],
                                                                                [0, 0, 0],
                                                                                [0, 0, 1]]))
    assert report.codes() == {"isolated_node", "design_self_loop", "control_not_supergraph"}
    assert any("G_K not a supergraph of G_P" in str(i) for i in report.issues)
    good = validate_structure(DirectedGraph([[0, 0], [1, 0]]), DirectedGraph.complete(2),
                              DirectedGraph.identity(2))
    assert good.ok and "all checks passed" in good.format()


def test_sink_ordering_block_form():
    # node 0 is a sink fed by 1 and 2; node 2 feeds 1
    g = DirectedGraph([[1, 1, 1], [0, 0, 1], [0, 0, 0]])
    perm = sink_ordering(g)
    assert perm.tolist() == [1, 2, 0]
    S = g.permuted(perm).adjacency
    k = len(perm) - len(sinks(g))
    assert not S[:k, k:].any()  # sinks never feed non-sinks


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)).map(lambda t: (t[0], t[0])),
              elements=st.floats(-10, 10, allow_nan=False) | st.just(0.0)))
@settings(max_examples=60)
def test_sparsity_graph_always_admits_its_matrix(A):
    n = A.shape[0]
    p = Plant(A, np.ones(n), np.ones(n), np.zeros(n), np.zeros(n), 1.0)
    assert "sparsity" not in validate_plant(p, from_sparsity(A)).codes()


@given(st.integers(1, 6), st.randoms(use_true_random=False))
@settings(max_examples=40)
def test_sink_ordering_is_a_permutation(n, rnd):
    S = np.array([[rnd.randint(0, 1) for _ in range(n)] for _ in range(n)])
    g = DirectedGraph(S)
    perm = sink_ordering(g)
    assert sorted(perm.tolist()) == list(range(n))
    k = n - len(sinks(g))
    assert not g.permuted(perm).adjacency[:k, k:].any()
