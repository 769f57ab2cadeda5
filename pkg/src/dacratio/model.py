"""Plant and controller data model, set-membership checks and JSON files.

A plant is the tuple ``(A, B, D, x0, w0)`` of a fully actuated system of
scalar subsystems::

    x(k+1) = A x(k) + B (u(k) + w(k)),   x(0) = x0
    w(k+1) = D w(k),                     w(0) = w0

``B`` and ``D`` are diagonal and stored as vectors.  Costs assume unit state
and input weights; plants with other diagonal weights must be rescaled before
they are written to a file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import DirectedGraph, ValidationReport, from_sparsity


class PlantFileError(ValueError):
    """Base class for malformed plant or controller files."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaError(PlantFileError):
    pass


class NonFiniteError(PlantFileError):
    pass


class DimensionError(PlantFileError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def _check_finite(name, a):
    bad = np.argwhere(~np.isfinite(a))
    if bad.size:
        raise NonFiniteError(f"{name}{list(bad[0])}", "non-finite value")


class Plant:
    """Immutable plant description.

    Parameters
    ----------
    A : (n, n) array_like
    b_diag, d_diag : (n,) array_like
        Diagonals of ``B`` and ``D``.
    x0, w0 : (n,) array_like
        Initial state and initial disturbance.
    epsilon : float
        Class-level lower bound on the singular values of ``B``.
    graph : DirectedGraph, optional
        Declared plant graph.  When absent, the sparsity pattern of ``A`` is
        used wherever a graph is needed.
    """

    __slots__ = ("A", "b_diag", "d_diag", "x0", "w0", "epsilon", "graph")

    def __init__(self, A, b_diag, d_diag, x0, w0, epsilon, graph=None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError("A", f"must be square, got shape {A.shape}")
        n = A.shape[0]
        vectors = {"b_diag": b_diag, "d_diag": d_diag, "x0": x0, "w0": w0}
        for name, v in vectors.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (n,):
                raise DimensionError(name, f"expected length {n}, got shape {v.shape}")
            _check_finite(name, v)
            vectors[name] = v
        _check_finite("A", A)
        if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
            raise SchemaError("epsilon", f"must be a positive finite number, got {epsilon!r}")
        if graph is not None and graph.node_count != n:
            raise DimensionError("plant_graph", f"expected {n} nodes, got {graph.node_count}")
        set_ = object.__setattr__
        set_(self, "A", _frozen(A))
        for name, v in vectors.items():
            set_(self, name, _frozen(v))
        set_(self, "epsilon", float(epsilon))
        set_(self, "graph", graph)

    def __setattr__(self, name, value):
        raise AttributeError("Plant is immutable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def B(self) -> np.ndarray:
        return np.diag(self.b_diag)

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.d_diag)

    def plant_graph(self) -> DirectedGraph:
        return self.graph if self.graph is not None else from_sparsity(self.A)

    def replace(self, **changes) -> "Plant":
        fields = {name: getattr(self, name) for name in self.__slots__}
        fields.update(changes)
        return Plant(**fields)

    def __eq__(self, other):
        if not isinstance(other, Plant):
            return NotImplemented
        return (self.A.shape == other.A.shape
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("A", "b_diag", "d_diag", "x0", "w0"))
                and self.epsilon == other.epsilon
                and self.graph == other.graph)

    __hash__ = None

    def __repr__(self):
        return (f"Plant(n={self.n}, A={self.A.tolist()}, b_diag={self.b_diag.tolist()}, "
                f"d_diag={self.d_diag.tolist()}, x0={self.x0.tolist()}, "
                f"w0={self.w0.tolist()}, epsilon={self.epsilon})")


class Controller:
    """Dynamic state feedback ``x_K(k+1) = A_K x_K + B_K x``, ``u = C_K x_K + D_K x``.

    The internal state starts at zero.  Realizations are kept exactly as
    given (no minimal-realization reduction).  ``n_state`` may be zero for a
    static gain.
    """

    __slots__ = ("A_K", "B_K", "C_K", "D_K")

    def __init__(self, A_K, B_K, C_K, D_K):
        D_K = np.asarray(D_K, dtype=float)
        if D_K.ndim != 2 or D_K.shape[0] != D_K.shape[1]:
            raise DimensionError("D_K", f"must be square, got shape {D_K.shape}")
        n = D_K.shape[0]
        A_K, B_K, C_K = (np.asarray(M, dtype=float) for M in (A_K, B_K, C_K))
        if A_K.size == 0:
            # static gain: accept any empty spelling of the state matrices
            if B_K.size or C_K.size:
                raise DimensionError("A_K", "empty A_K requires empty B_K and C_K")
            A_K, B_K, C_K = np.zeros((0, 0)), np.zeros((0, n)), np.zeros((n, 0))
        m = A_K.shape[0]
        expected = {"A_K": (A_K, (m, m)), "B_K": (B_K, (m, n)), "C_K": (C_K, (n, m))}
        for name, (mat, shape) in expected.items():
            if mat.shape != shape:
                raise DimensionError(name, f"expected shape {shape}, got {mat.shape}")
        for name, mat in (("A_K", A_K), ("B_K", B_K), ("C_K", C_K), ("D_K", D_K)):
            _check_finite(name, mat)
            object.__setattr__(self, name, _frozen(mat))

    def __setattr__(self, name, value):
        raise AttributeError("Controller is immutable")

    @classmethod
    def static(cls, gain) -> "Controller":
        gain = np.asarray(gain, dtype=float)
        n = gain.shape[0]
        return cls(np.zeros((0, 0)), np.zeros((0, n)), np.zeros((n, 0)), gain)

    @property
    def n_state(self) -> int:
        return self.A_K.shape[0]

    @property
    def n(self) -> int:
        return self.D_K.shape[0]

    def matrices(self):
        return self.A_K, self.B_K, self.C_K, self.D_K

    def __eq__(self, other):
        if not isinstance(other, Controller):
            return NotImplemented
        return all(a.shape == b.shape and np.array_equal(a, b)
                   for a, b in zip(self.matrices(), other.matrices()))

    __hash__ = None

    def __repr__(self):
        return f"Controller(n_state={self.n_state}, D_K={self.D_K.tolist()})"


@dataclass(frozen=True)
class CostReport:
    value: float
    method: str  # "closed_form" or "simulated"
    converged: bool
    horizon_used: int


def validate_plant(p: Plant, plant_graph: DirectedGraph | None = None) -> ValidationReport:
    """Membership of ``p`` in the plant class defined by ``plant_graph`` and ``p.epsilon``."""
    g = plant_graph if plant_graph is not None else p.plant_graph()
    if g.node_count != p.n:
        raise ValueError(f"graph has {g.node_count} nodes, plant has dimension {p.n}")
    report = ValidationReport(checks=["sigma_min(B) >= epsilon", "A conforms to plant graph",
                                      "vector lengths"])
    absb = np.abs(p.b_diag)
    for i in np.flatnonzero(absb < p.epsilon):
        report.add("epsilon", "sigma_min(B) < epsilon", index=(int(i),), magnitude=float(absb[i]))
    for i, j in np.argwhere((p.A != 0) & (g.adjacency == 0)):
        report.add("sparsity", "A violates plant graph", index=(int(i), int(j)),
                   magnitude=float(p.A[i, j]))
    return report


def controller_sparsity(k: Controller, tol: float = 0.0) -> DirectedGraph:
    """Structural pattern of the transfer matrix ``C_K (zI - A_K)^-1 B_K + D_K``.

    Entry ``(i, j)`` is present when ``D_K[i, j]`` is nonzero or output ``i``
    is reachable from input ``j`` through the nonzero pattern of
    ``B_K``, powers of ``A_K`` and ``C_K``.  Cancellations are not detected.
    """
    nz = lambda M: np.abs(M) > tol  # noqa: E731
    m = k.n_state
    reach = np.eye(m, dtype=bool) | nz(k.A_K)
    # reflexive-transitive closure by squaring
    for _ in range(max(1, int(np.ceil(np.log2(max(m, 2)))))):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    through = (nz(k.C_K).astype(int) @ reach.astype(int) @ nz(k.B_K).astype(int)) > 0
    return DirectedGraph((nz(k.D_K) | through).astype(np.int8))


# --------------------------------------------------------------------- files

PLANT_FIELDS = ("n", "epsilon", "A", "b_diag", "d_diag", "x0", "w0")
CONTROLLER_FIELDS = ("n_state", "A_K", "B_K", "C_K", "D_K")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("<root>", f"malformed JSON: {exc}") from exc


def _number(field, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(field, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise NonFiniteError(field, "non-finite value")
    return float(value)


def _vector(field, value, n):
    if not isinstance(value, list):
        raise SchemaError(field, "expected an array")
    if len(value) != n:
        raise DimensionError(field, f"expected {n} entries, got {len(value)}")
    return [_number(f"{field}[{i}]", v) for i, v in enumerate(value)]


def _matrix(field, value, rows, cols):
    if not isinstance(value, list):
        raise SchemaError(field, "expected an array of rows")
    if len(value) != rows:
        raise DimensionError(field, f"expected {rows} rows, got {len(value)}")
    return [_vector(f"{field}[{i}]", row, cols) for i, row in enumerate(value)]


def _count(field, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise SchemaError(field, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _require(data, fields):
    if not isinstance(data, dict):
        raise SchemaError("<root>", "expected a JSON object")
    for name in fields:
        if name not in data:
            raise SchemaError(name, "missing required field")


def plant_from_dict(data) -> Plant:
    _require(data, PLANT_FIELDS)
    n = _count("n", data["n"], 1)
    epsilon = _number("epsilon", data["epsilon"])
    if epsilon <= 0:
        raise SchemaError("epsilon", "must be positive")
    graph = None
    if data.get("plant_graph") is not None:
        S = _matrix("plant_graph", data["plant_graph"], n, n)
        try:
            graph = DirectedGraph(S)
        except ValueError as exc:
            raise SchemaError("plant_graph", str(exc)) from exc
    return Plant(
        A=_matrix("A", data["A"], n, n),
        b_diag=_vector("b_diag", data["b_diag"], n),
        d_diag=_vector("d_diag", data["d_diag"], n),
        x0=_vector("x0", data["x0"], n),
        w0=_vector("w0", data["w0"], n),
        epsilon=epsilon,
        graph=graph,
    )


def plant_to_dict(p: Plant) -> dict:
    data = {
        "n": p.n,
        "epsilon": p.epsilon,
        "A": p.A.tolist(),
        "b_diag": p.b_diag.tolist(),
        "d_diag": p.d_diag.tolist(),
        "x0": p.x0.tolist(),
        "w0": p.w0.tolist(),
    }
    if p.graph is not None:
        data["plant_graph"] = p.graph.adjacency.astype(int).tolist()
    return data


def controller_from_dict(data) -> Controller:
    _require(data, CONTROLLER_FIELDS)
    m = _count("n_state", data["n_state"], 0)
    D_K = data["D_K"]
    if not isinstance(D_K, list) or not D_K:
        raise SchemaError("D_K", "expected a non-empty array of rows")
    n = len(D_K)
    return Controller(
        A_K=_matrix("A_K", data["A_K"], m, m),
        B_K=_matrix("B_K", data["B_K"], m, n),
        C_K=_matrix("C_K", data["C_K"], n, m),
        D_K=_matrix("D_K", D_K, n, n),
    )


def controller_to_dict(k: Controller) -> dict:
    return {
        "n_state": k.n_state,
        "A_K": k.A_K.tolist(),
        "B_K": k.B_K.tolist(),
        "C_K": k.C_K.tolist(),
        "D_K": k.D_K.tolist(),
    }


def _write_json(data, path):
    # repr() of a float is the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def load_plant(path) -> Plant:
    return plant_from_dict(_read_json(path))


def save_plant(p: Plant, path) -> None:
    _write_json(plant_to_dict(p), path)


def load_controller(path) -> Controller:
    return controller_from_dict(_read_json(path))


def save_controller(k: Controller, path) -> None:
    _write_json(controller_to_dict(k), path)
