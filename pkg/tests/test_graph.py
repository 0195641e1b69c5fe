import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarm_init.errors import BadEdge, Disconnected
from swarm_init.graph import (StageGraph, anchor_projection, anchor_projection_scalar, build_row_ladder,
                              edge_block, edge_selector, topology_dump)


def test_first_row():
    g, step = build_row_ladder(1)[0]
    assert (g.n, g.m) == (3, 2)
    assert np.allclose(g.edge_eigen.values, [1.0, 3.0])
    assert step.prev is None and step.anchors == ()


def test_second_row():
    ladder = build_row_ladder(2)
    g, step = ladder[1]
    assert (g.n, g.m) == (6, 7)
    assert step.new_edges == ((0, 3), (1, 4), (2, 5), (3, 4), (4, 5))
    assert step.anchors == (0, 1, 2, 0, 1)
    assert np.array_equal(step.P, np.eye(7))
    assert g.edges[:2] == ladder[0][0].edges


def test_ladder_sizes():
    for k, (g, step) in enumerate(build_row_ladder(6)):
        assert g.n == 3 * (k + 1)
        assert g.m == 2 + 5 * k
        assert g.is_connected()


def test_node_laplacian_block_structure():
    g = build_row_ladder(4)[-1][0]
    L = g.node_laplacian
    adj = -(L - np.diag(np.diag(L)))
    La = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    for r in range(4):
        assert np.array_equal(adj[3 * r:3 * r + 3, 3 * r:3 * r + 3], La)
        if r:
            assert np.array_equal(adj[3 * r:3 * r + 3, 3 * r - 3:3 * r], np.eye(3))
    assert np.allclose(np.diag(L), adj.sum(axis=1))


def test_spectrum_identity():
    g = build_row_ladder(5)[-1][0]
    node = np.sort(np.linalg.eigvalsh(g.node_laplacian))[1:]  # drop the zero mode
    edge = np.sort(g.edge_eigen.values)
    nz = edge[edge > 1e-9]
    assert nz.size == g.n - 1
    assert np.allclose(node, nz, atol=1e-10)


def test_pinv_penrose_and_projector():
    g = build_row_ladder(4)[-1][0]
    Le, P = g.edge_laplacian, g.edge_laplacian_pinv
    assert np.allclose(Le @ P @ Le, Le, atol=1e-10)
    assert np.allclose(P @ Le @ P, P, atol=1e-10)
    assert np.allclose(Le @ P, (Le @ P).T, atol=1e-10)
    assert np.allclose(P @ Le, (P @ Le).T, atol=1e-10)
    Pi = g.projector
    assert np.allclose(Pi @ Pi, Pi, atol=1e-12)
    assert np.allclose(Pi, np.eye(g.n) - np.ones((g.n, g.n)) / g.n, atol=1e-12)


def test_anchor_projection_meaning(rng):
    ladder = build_row_ladder(3)
    prev, step = ladder[1][0], ladder[2][1]
    R = anchor_projection_scalar(step)
    x = rng.standard_normal(prev.n)
    rho = prev.incidence.T @ x
    expect = np.array([x[a] for a in step.anchors]) - x.mean()
    assert np.allclose(R @ rho, expect)
    assert anchor_projection(step).shape == (2 * step.n_new_edges, 2 * prev.m)


def test_anchor_matrices():
    step = build_row_ladder(3)[2][1]
    assert step.anchor_nodes == (3, 4, 5)
    assert np.array_equal(step.V.sum(axis=0), np.ones(step.n_new_edges))
    assert step.U.shape == (6, 3) and step.S.shape == (3, 5)


def test_bad_edges_and_disconnected():
    g = StageGraph(4, [(0, 1), (2, 3)])
    assert not g.is_connected()
    with pytest.raises(Disconnected):
        g.require_connected()
    with pytest.raises(BadEdge):
        g.edge_index((0, 3))
    with pytest.raises(BadEdge):
        g.edge_index(7)
    with pytest.raises(ValueError):
        StageGraph(2, [(0, 0)])
    with pytest.raises(ValueError):
        StageGraph(3, [(0, 1), (1, 0)])


def test_orientation_flip():
    ladder = build_row_ladder(2, flip=[(3, 4)])
    g = ladder[-1][0]
    assert g.orientation((3, 4)) == -1 and g.orientation((4, 3)) == -1
    assert g.orientation((0, 1)) == 1
    k = g.edge_index((3, 4))
    assert g.incidence[4, k] == 1 and g.incidence[3, k] == -1


def test_selector_and_block():
    g = build_row_ladder(2)[-1][0]
    v = np.arange(2 * g.m, dtype=float)
    J = edge_selector(g, (1, 4))
    assert np.array_equal(J @ v, edge_block(v, g.edge_index((1, 4))))


def test_topology_dump():
    doc = json.loads(topology_dump(build_row_ladder(3)))
    assert len(doc["nodes"]) == 9 and len(doc["edges"]) == 12
    assert [s["n_edges"] for s in doc["stages"]] == [2, 7, 12]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.data())
def test_random_tree_pinv(n, data):
    # random tree: attach node k to an earlier node
    parents = [data.draw(st.integers(0, k - 1)) for k in range(1, n)]
    g = StageGraph(n, [(p, k + 1) for k, p in enumerate(parents)])
    assert g.is_connected()
    # a tree has an invertible edge Laplacian
    assert np.allclose(g.edge_laplacian_pinv @ g.edge_laplacian, np.eye(n - 1), atol=1e-9)
    assert g.algebraic_connectivity() > 0
