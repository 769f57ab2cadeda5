"""Directed graphs for plant, control and design structure.

Adjacency convention: ``S[i, j] == 1`` iff the edge ``(j, i)`` exists, i.e.
the column index is the source and the row index the destination.  With this
convention a plant matrix ``A`` conforms to ``S`` when ``a_ij == 0`` wherever
``S[i, j] == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    index: tuple | None = None
    magnitude: float | None = None

    def __str__(self) -> str:
        parts = [self.message]
        if self.index is not None:
            parts.append(f"at {self.index}")
        if self.magnitude is not None:
            parts.append(f"(value {self.magnitude!r})")
        return " ".join(parts)


@dataclass
class ValidationReport:
    """Collected check results; callers decide how severe a failure is."""

    checks: list[str] = field(default_factory=list)
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, code, message, index=None, magnitude=None):
        self.issues.append(Issue(code, message, index, magnitude))

    def codes(self) -> set[str]:
        return {issue.code for issue in self.issues}

    def extend(self, other: "ValidationReport") -> "ValidationReport":
        self.checks.extend(other.checks)
        self.issues.extend(other.issues)
        return self

    def format(self) -> str:
        lines = [f"checked: {', '.join(self.checks)}" if self.checks else "checked: nothing"]
        if self.ok:
            lines.append("all checks passed")
        else:
            lines.extend(f"FAIL [{i.code}] {i}" for i in self.issues)
        return "\n".join(lines)


class DirectedGraph:
    """Directed graph on nodes ``0..q-1`` stored as a binary adjacency matrix.

    Nodes are zero-based in code; reports and docs that speak of "node 1"
    mean index 0.
    """

    __slots__ = ("_S",)

    def __init__(self, adjacency):
        S = np.asarray(adjacency)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got shape {S.shape}")
        if not np.all((S == 0) | (S == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        S = S.astype(np.int8)
        S.flags.writeable = False
        self._S = S

    @property
    def adjacency(self) -> np.ndarray:
        return self._S

    @property
    def node_count(self) -> int:
        return self._S.shape[0]

    @classmethod
    def complete(cls, q: int) -> "DirectedGraph":
        return cls(np.ones((q, q), dtype=np.int8))

    @classmethod
    def identity(cls, q: int) -> "DirectedGraph":
        """Self-loops only (a totally disconnected design graph)."""
        return cls(np.eye(q, dtype=np.int8))

    def has_edge(self, src: int, dst: int) -> bool:
        return bool(self._S[dst, src])

    def with_self_loops(self) -> "DirectedGraph":
        S = self._S.copy()
        np.fill_diagonal(S, 1)
        return DirectedGraph(S)

    def permuted(self, perm) -> "DirectedGraph":
        """Relabel so that new node ``k`` is old node ``perm[k]``."""
        perm = np.asarray(perm)
        return DirectedGraph(self._S[np.ix_(perm, perm)])

    def isolated_nodes(self) -> list[int]:
        off = self._S.astype(bool) & ~np.eye(self.node_count, dtype=bool)
        touched = off.any(axis=0) | off.any(axis=1)
        return [int(i) for i in np.flatnonzero(~touched)]

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self._S.shape == other._S.shape and bool(np.array_equal(self._S, other._S))

    def __hash__(self):
        return hash((self._S.shape, self._S.tobytes()))

    def __repr__(self):
        return f"DirectedGraph({self._S.tolist()})"


def from_sparsity(A, tol: float = 0.0) -> DirectedGraph:
    """Graph whose edges are exactly the entries of ``A`` with ``|a_ij| > tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    A = np.asarray(A, dtype=float)
    return DirectedGraph((np.abs(A) > tol).astype(np.int8))


def sinks(g: DirectedGraph) -> list[int]:
    """Nodes with no outgoing edge to another node (self-loops are allowed)."""
    off = g.adjacency.astype(bool) & ~np.eye(g.node_count, dtype=bool)
    return [int(i) for i in np.flatnonzero(~off.any(axis=0))]


def sink_mask(g: DirectedGraph) -> np.ndarray:
    mask = np.zeros(g.node_count, dtype=bool)
    mask[sinks(g)] = True
    return mask


def sink_ordering(g: DirectedGraph) -> np.ndarray:
    """Permutation putting non-sinks first and sinks last, stable otherwise.

    Applying it with :meth:`DirectedGraph.permuted` yields the block form in
    which the upper-right block (sinks feeding non-sinks) is zero.
    """
    mask = sink_mask(g)
    return np.concatenate([np.flatnonzero(~mask), np.flatnonzero(mask)])


def is_supergraph(g1: DirectedGraph, g2: DirectedGraph) -> bool:
    """True iff every edge of ``g2`` is an edge of ``g1``."""
    if g1.node_count != g2.node_count:
        raise ValueError(f"node counts differ: {g1.node_count} vs {g2.node_count}")
    return bool(np.all(g2.adjacency <= g1.adjacency))


def validate_structure(plant_g: DirectedGraph, control_g: DirectedGraph,
                       design_g: DirectedGraph) -> ValidationReport:
    """Check the standing assumptions tying the three graphs together."""
    q = plant_g.node_count
    if control_g.node_count != q or design_g.node_count != q:
        raise ValueError("plant, control and design graphs must have the same node count")
    report = ValidationReport(checks=["plant isolated nodes", "control self-loops",
                                      "design self-loops", "control supergraph of plant"])
    for i in plant_g.isolated_nodes():
        report.add("isolated_node", "plant graph has an isolated node", index=(i,))
    for name, g in (("control", control_g), ("design", design_g)):
        for i in np.flatnonzero(np.diag(g.adjacency) == 0):
            report.add(f"{name}_self_loop", f"{name} graph is missing a self-loop", index=(int(i),))
    if not is_supergraph(control_g, plant_g):
        missing = np.argwhere(plant_g.adjacency > control_g.adjacency)
        for i, j in missing:
            report.add("control_not_supergraph", "G_K not a supergraph of G_P",
                       index=(int(i), int(j)))
    return report
