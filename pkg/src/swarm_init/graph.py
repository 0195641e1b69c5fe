"""Expanding deployment graphs for the row-of-three release ladder.

Nodes are numbered in release order: row ``r`` (0-based) holds nodes
``3r, 3r+1, 3r+2``.  Edges are stored as ordered pairs ``(i, j)`` giving the
orientation ``i -> j``; the incidence column has ``+1`` at ``i`` and ``-1``
at ``j`` so that the edge state is ``x_i - x_j``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BadEdge, Disconnected
from .numerics import EigenDecomposition, pseudo_inverse, sym_eigen

Edge = tuple[int, int]


def _key(e: Edge) -> Edge:
    return (min(e), max(e))


class StageGraph:
    """Graph of the connected cluster at one deployment stage."""

    def __init__(self, n_nodes: int, edges):
        self.n = int(n_nodes)
        self.edges: tuple[Edge, ...] = tuple((int(i), int(j)) for i, j in edges)
        for i, j in self.edges:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"invalid edge {(i, j)} for {self.n} nodes")
        self._index = {_key(e): k for k, e in enumerate(self.edges)}
        if len(self._index) != len(self.edges):
            raise ValueError("duplicate edges")

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_index(self, e) -> int:
        if isinstance(e, (int, np.integer)):
            if not 0 <= e < self.m:
                raise BadEdge(e)
            return int(e)
        try:
            return self._index[_key(tuple(e))]
        except (KeyError, TypeError):
            raise BadEdge(e) from None

    def orientation(self, e) -> int:
        """``+1`` if edge ``e`` runs from its lower to its higher node."""
        i, j = self.edges[self.edge_index(e)]
        return 1 if i < j else -1

    @cached_property
    def incidence(self) -> np.ndarray:
        E = np.zeros((self.n, self.m))
        cols = np.arange(self.m)
        ij = np.array(self.edges, dtype=int).reshape(-1, 2)
        E[ij[:, 0], cols] = 1.0
        E[ij[:, 1], cols] = -1.0
        return E

    @cached_property
    def node_laplacian(self) -> np.ndarray:
        E = self.incidence
        return E @ E.T

    @cached_property
    def edge_laplacian(self) -> np.ndarray:
        E = self.incidence
        return E.T @ E

    @cached_property
    def edge_eigen(self) -> EigenDecomposition:
        return sym_eigen(self.edge_laplacian)

    @cached_property
    def edge_laplacian_pinv(self) -> np.ndarray:
        return pseudo_inverse(self.edge_laplacian, eig=self.edge_eigen)

    @cached_property
    def projector(self) -> np.ndarray:
        """Orthogonal projector ``E L_e^+ E^T`` onto range(E)."""
        E = self.incidence
        return E @ self.edge_laplacian_pinv @ E.T

    def clear_cache(self) -> None:
        """Drop cached matrices (they are rebuilt on demand)."""
        _clear_cached(self)

    def is_connected(self, tol: float = 1e-9) -> bool:
        if self.n <= 1:
            return True
        w = self.edge_eigen.values
        rank = int(np.sum(w > tol * max(w[-1], 1.0))) if w.size else 0
        return rank == self.n - 1

    def algebraic_connectivity(self) -> float:
        return float(np.linalg.eigvalsh(self.node_laplacian)[1])

    def require_connected(self) -> None:
        if not self.is_connected():
            raise Disconnected(f"graph with {self.n} nodes and {self.m} edges is not connected")


def _clear_cached(obj) -> None:
    for name, attr in vars(type(obj)).items():
        if isinstance(attr, cached_property):
            obj.__dict__.pop(name, None)


@dataclass(frozen=True)
class ExpansionStep:
    """New nodes and edges added at one stage, with their anchor assignment.

    For the first stage ``prev`` is None and there are no anchors.
    ``anchors[f]`` is the existing node serving as anchor of new edge ``f``.
    """

    prev: StageGraph | None
    graph: StageGraph
    new_nodes: tuple[int, ...]
    new_edges: tuple[Edge, ...]
    anchors: tuple[int, ...]

    @property
    def n_new_edges(self) -> int:
        return len(self.new_edges)

    @cached_property
    def new_edge_positions(self) -> np.ndarray:
        return np.array([self.graph.edge_index(e) for e in self.new_edges], dtype=int)

    @cached_property
    def anchor_nodes(self) -> tuple[int, ...]:
        """Ascending list of existing nodes used as anchors (the set U)."""
        return tuple(sorted(set(self.anchors)))

    @cached_property
    def U(self) -> np.ndarray:
        n_k = self.prev.n if self.prev is not None else 0
        out = np.zeros((n_k, len(self.anchor_nodes)))
        for col, node in enumerate(self.anchor_nodes):
            out[node, col] = 1.0
        return out

    @cached_property
    def S(self) -> np.ndarray:
        pos = {node: r for r, node in enumerate(self.anchor_nodes)}
        out = np.zeros((len(self.anchor_nodes), self.n_new_edges))
        for f, a in enumerate(self.anchors):
            out[pos[a], f] = 1.0
        return out

    @cached_property
    def V(self) -> np.ndarray:
        return self.U @ self.S

    @cached_property
    def order(self) -> np.ndarray:
        """``order[r]`` is the ``[old edges; new edges]`` position of edge ``r`` of ``graph``."""
        old = self.prev.edges if self.prev is not None else ()
        out = np.empty(self.graph.m, dtype=int)
        for col, e in enumerate(list(old) + list(self.new_edges)):
            out[self.graph.edge_index(e)] = col
        return out

    @property
    def P(self) -> np.ndarray:
        """Permutation matrix taking ``[old edges; new edges]`` to the ordering of ``graph``."""
        P = np.zeros((self.graph.m, self.graph.m))
        P[np.arange(self.graph.m), self.order] = 1.0
        return P

    def clear_cache(self) -> None:
        _clear_cached(self)

    @cached_property
    def new_edge_signs(self) -> np.ndarray:
        return np.array([1.0 if i < j else -1.0 for i, j in self.new_edges])


def anchor_projection(step: ExpansionStep, graph: StageGraph | None = None, d: int = 2) -> np.ndarray:
    """Anchor-displacement map ``R = (V^T E_k L_e^+ (x) I_d)``.

    ``graph`` defaults to ``step.prev``.  Rows of new edges oriented from the
    higher to the lower node are negated so that edge states stay
    orientation-consistent.
    """
    return np.kron(anchor_projection_scalar(step, graph), np.eye(d))


def anchor_projection_scalar(step: ExpansionStep, graph: StageGraph | None = None) -> np.ndarray:
    g = graph if graph is not None else step.prev
    if g is None:
        raise ValueError("the initial stage has no anchor projection")
    g.require_connected()
    V = step.V
    if V.shape != (g.n, step.n_new_edges) or not np.all(V.sum(axis=0) == 1.0):
        raise ValueError("every new edge needs exactly one anchor node")
    R = V.T @ g.incidence @ g.edge_laplacian_pinv
    return step.new_edge_signs[:, None] * R


def edge_selector(graph: StageGraph, e, d: int = 2) -> np.ndarray:
    k = graph.edge_index(e)
    J = np.zeros((d, d * graph.m))
    J[:, d * k:d * (k + 1)] = np.eye(d)
    return J


def edge_block(v: np.ndarray, k: int, d: int = 2) -> np.ndarray:
    return v[d * k:d * (k + 1)]


def build_row_ladder(num_rows: int, row_width: int = 3, flip=()) -> list[tuple[StageGraph, ExpansionStep]]:
    """Stage graphs of the row-by-row release ladder.

    Element ``k`` holds the graph with ``k + 1`` rows and the step that
    created it.  Row ``r`` is a path across its ``row_width`` nodes and each
    node is linked to the same column of the previous row.  New edges are
    anchored at the previous-row node of their (lower) column.  Edges listed
    in ``flip`` (as unordered pairs) get the reversed orientation.
    """
    if num_rows < 1:
        raise ValueError("num_rows must be >= 1")
    flips = {_key(e) for e in flip}

    def orient(i: int, j: int) -> Edge:
        return (j, i) if (i, j) in flips else (i, j)

    w = row_width
    out = []
    prev = None
    for r in range(num_rows):
        base = r * w
        nodes = tuple(range(base, base + w))
        inter = [(base - w + c, base + c) for c in range(w)] if r > 0 else []
        intra = [(base + c, base + c + 1) for c in range(w - 1)]
        new = sorted(inter + intra)
        # inter-row edges start at their anchor; intra-row edges borrow the
        # anchor of their lower column
        anchors = tuple(i if i < base else i - w for i, _ in new) if r > 0 else ()
        new_edges = tuple(orient(i, j) for i, j in new)
        old = prev.edges if prev is not None else ()
        graph = StageGraph(base + w, old + new_edges)
        step = ExpansionStep(prev=prev, graph=graph, new_nodes=nodes, new_edges=new_edges, anchors=anchors)
        out.append((graph, step))
        prev = graph
    return out


def topology_dump(ladder) -> str:
    """JSON description of the final graph and its stage boundaries."""
    graph = ladder[-1][0]
    doc = {
        "nodes": list(range(graph.n)),
        "edges": [list(e) for e in graph.edges],
        "stages": [
            {"stage": k, "n_nodes": g.n, "n_edges": g.m,
             "new_edges": [list(e) for e in s.new_edges], "anchors": list(s.anchors)}
            for k, (g, s) in enumerate(ladder)
        ],
    }
    return json.dumps(doc, indent=1)
