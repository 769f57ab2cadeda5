"""Control design strategies mapping a plant model ``(A, B, D)`` to a controller.

The limited-model-information strategies (deadbeat, sink-aware, PI) build
row ``i`` of every controller matrix from row ``i`` of ``A`` and the scalars
``b_ii``, ``d_ii`` only.  All row scalings are done by broadcasting so that
perturbing another row of ``A`` leaves row ``i`` bit-identical.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .graphs import DirectedGraph, sink_mask
from .model import Controller, Plant
from .riccati import solve_for_plant


class StrategyKind(enum.Enum):
    DEADBEAT = "deadbeat"
    THETA = "theta"
    OPTIMAL = "optimal"
    PI = "pi"

    @classmethod
    def parse(cls, value) -> "StrategyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown strategy {value!r}; expected one of {names}") from None


class SynthesisError(ValueError):
    pass


def synth_deadbeat(p: Plant) -> Controller:
    """``A_K = D, B_K = -B^-1 D^2, C_K = I, D_K = -B^-1 (A + D)``.

    Drives ``x`` and ``u + w`` to zero in two steps for any ``x0``, ``w0``.
    """
    b, d = p.b_diag, p.d_diag
    n = p.n
    D_K = -(p.A + np.diag(d)) / b[:, None]
    return Controller(np.diag(d), np.diag(-(d * d) / b), np.eye(n), D_K)


def sink_gain(a_ii: float, b_ii: float) -> float:
    """Scalar feedback factor of the isolated-node optimal law on a sink.

    Always lies in ``(-1, 0)``; equals ``-b^2 / (1 + b^2)`` when ``a_ii = 0``.
    """
    a2, b2 = a_ii * a_ii, b_ii * b_ii
    root = math.sqrt(a2 * a2 + 2 * a2 * b2 - 2 * a2 + b2 * b2 + 2 * b2 + 1)
    return 2.0 / (b2 + a2 + 1.0 + root) - 1.0


def sink_gains(p: Plant, plant_graph: DirectedGraph | None = None) -> np.ndarray:
    """Per-node gain table: ``sink_gain(a_ii, b_ii)`` on sinks, 0 elsewhere."""
    g = plant_graph if plant_graph is not None else p.plant_graph()
    mask = sink_mask(g)
    f = np.zeros(p.n)
    for i in np.flatnonzero(mask):
        f[i] = sink_gain(p.A[i, i], p.b_diag[i])
    return f


def synth_theta(p: Plant, plant_graph: DirectedGraph | None = None) -> Controller:
    """Sink-aware strategy: deadbeat rows off sinks, isolated-node optimum on sinks.

    With the row factor ``F = diag(f)``::

        A_K = D,  B_K = B^-1 D (F + I) A - B^-1 D^2,  C_K = I,  D_K = B^-1 (F A - D)

    where ``f_i = sink_gain(a_ii, b_ii)`` on sinks and ``f_i = -1`` on every
    other node, which makes those rows coincide with :func:`synth_deadbeat`.
    Nodes may be in any order; sinks are read off ``plant_graph`` (default:
    the plant's declared graph, else the sparsity of ``A``).
    """
    g = plant_graph if plant_graph is not None else p.plant_graph()
    if g.node_count != p.n:
        raise ValueError(f"graph has {g.node_count} nodes, plant has dimension {p.n}")
    mask = sink_mask(g)
    f = np.where(mask, sink_gains(p, g), -1.0)
    b, d, A = p.b_diag, p.d_diag, p.A
    B_K = (d * (f + 1.0) / b)[:, None] * A - np.diag(d * d / b)
    D_K = (f[:, None] * A - np.diag(d)) / b[:, None]
    return Controller(np.diag(d), B_K, np.eye(p.n), D_K)


def synth_optimal_centralized(p: Plant, tol: float = 1e-12, max_iter: int = 100_000) -> Controller:
    """Optimal disturbance-accommodating controller with full model and state access.

    ``A_K = D``, ``B_K = G1 + D G2 B^-1 - G2 B^-1 A``, ``C_K = I``,
    ``D_K = G2 B^-1`` with ``(G1, G2)`` from the Riccati solution.
    """
    sol = solve_for_plant(p, tol=tol, max_iter=max_iter)
    b, d = p.b_diag, p.d_diag
    G2Binv = sol.G2 / b[None, :]
    B_K = sol.G1 + d[:, None] * G2Binv - G2Binv @ p.A
    return Controller(np.diag(d), B_K, np.eye(p.n), G2Binv)


def _require_constant_disturbance(p: Plant):
    if not np.all(p.d_diag == 1.0):
        raise SynthesisError("PI form requires D = I")


def synth_pi(p: Plant) -> Controller:
    """Deadbeat design for constant disturbances (``D = I``), an integrating controller."""
    _require_constant_disturbance(p)
    return synth_deadbeat(p)


def pi_gains(p: Plant):
    """``(Kp, Ki)`` of ``u(k) = Kp x(k) + Ki * sum_{i<=k} x(i)``."""
    _require_constant_disturbance(p)
    b = p.b_diag
    return -p.A / b[:, None], np.diag(-1.0 / b)


def pi_gains_dict(p: Plant) -> dict:
    Kp, Ki = pi_gains(p)
    return {"Kp": Kp.tolist(), "Ki": Ki.tolist()}


def reference_to_disturbance(A, b_diag, r_ref, x0, epsilon: float | None = None) -> Plant:
    """Recast tracking of a constant reference ``r_ref`` as constant-disturbance rejection.

    In error coordinates ``x - r_ref`` the offset ``A r - r`` acts as the
    constant disturbance ``w = B^-1 (A r - r)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b_diag, dtype=float)
    r = np.asarray(r_ref, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if epsilon is None:
        epsilon = float(np.min(np.abs(b)))
    return Plant(A=A, b_diag=b, d_diag=np.ones_like(b), x0=x0 - r, w0=(A @ r - r) / b,
                 epsilon=epsilon)


def synthesize(p: Plant, strategy, plant_graph: DirectedGraph | None = None,
               tol: float = 1e-12, max_iter: int = 100_000) -> Controller:
    kind = StrategyKind.parse(strategy)
    if kind is StrategyKind.DEADBEAT:
        return synth_deadbeat(p)
    if kind is StrategyKind.THETA:
        return synth_theta(p, plant_graph)
    if kind is StrategyKind.PI:
        return synth_pi(p)
    return synth_optimal_centralized(p, tol=tol, max_iter=max_iter)
