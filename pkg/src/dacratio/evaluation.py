"""Closed-loop simulation, exact costs, competitive ratios and worst-case plants.

The cost of a controller ``K`` on a plant is::

    J = sum_k |x(k)|^2 + |u(k) + w(k)|^2

Closed forms are used wherever they exist; simulation is kept as the
independent check and as the only route for the sink-aware design.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .graphs import DirectedGraph
from .model import Controller, CostReport, Plant
from .riccati import solve_for_plant
from .synthesis import StrategyKind, synthesize


@dataclass(frozen=True)
class Tolerances:
    dare_tol: float = 1e-12
    dare_max_iter: int = 100_000
    cost_rel_tol: float = 1e-14
    cap: float = 1e18
    horizon_max: int = 1_000_000
    window: int = 5


DEFAULT_TOLERANCES = Tolerances()


# ---------------------------------------------------------------- simulation

@dataclass(frozen=True)
class Trajectory:
    """Rows are time steps ``0..T``."""

    x: np.ndarray
    x_K: np.ndarray
    u: np.ndarray
    w: np.ndarray
    xi: np.ndarray
    stage_costs: np.ndarray

    @property
    def horizon(self) -> int:
        return self.x.shape[0] - 1

    @property
    def cost(self) -> float:
        return math.fsum(self.stage_costs)


def _check_dims(p: Plant, k: Controller):
    if k.n != p.n:
        raise ValueError(f"controller acts on {k.n} states, plant has {p.n}")


def simulate(p: Plant, k: Controller, horizon: int) -> Trajectory:
    """Closed loop from ``x(0) = x0``, ``w(0) = w0``, ``x_K(0) = 0`` over ``horizon`` steps."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    _check_dims(p, k)
    n, m, T = p.n, k.n_state, horizon
    A, b, d = p.A, p.b_diag, p.d_diag
    A_K, B_K, C_K, D_K = k.matrices()
    xs = np.empty((T + 1, n))
    xks = np.empty((T + 1, m))
    us = np.empty((T + 1, n))
    ws = np.empty((T + 1, n))
    x, xk, w = p.x0.copy(), np.zeros(m), p.w0.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T + 1):
            u = C_K @ xk + D_K @ x
            xs[t], xks[t], us[t], ws[t] = x, xk, u, w
            if t == T:
                break
            x, xk, w = A @ x + b * (u + w), A_K @ xk + B_K @ x, d * w
        xis = us + ws
        stage = np.einsum("ij,ij->i", xs, xs) + np.einsum("ij,ij->i", xis, xis)
    return Trajectory(xs, xks, us, ws, xis, stage)


def cost_simulated(p: Plant, k: Controller, rel_tol: float | None = None,
                   cap: float | None = None, horizon_max: int | None = None,
                   window: int | None = None) -> CostReport:
    """Partial sums of the stage cost until it settles or blows up.

    Converged once ``window`` consecutive stage costs are at most
    ``rel_tol * max(1, J_partial)``.  Exceeding ``cap`` or ``horizon_max``
    reports ``value = inf`` with ``converged = False``.
    """
    t = DEFAULT_TOLERANCES
    rel_tol = t.cost_rel_tol if rel_tol is None else rel_tol
    cap = t.cap if cap is None else cap
    horizon_max = t.horizon_max if horizon_max is None else horizon_max
    window = t.window if window is None else window
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    _check_dims(p, k)
    A, b, d = p.A, p.b_diag, p.d_diag
    A_K, B_K, C_K, D_K = k.matrices()
    x, xk, w = p.x0.copy(), np.zeros(k.n_state), p.w0.copy()
    total = comp = 0.0  # Neumaier summation
    quiet = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(horizon_max + 1):
            u = C_K @ xk + D_K @ x
            xi = u + w
            c = float(x @ x + xi @ xi)
            if not math.isfinite(c):
                return CostReport(math.inf, "simulated", False, step + 1)
            s = total + c
            comp += (total - s) + c if abs(total) >= abs(c) else (c - s) + total
            total = s
            J = total + comp
            if J > cap:
                return CostReport(math.inf, "simulated", False, step + 1)
            quiet = quiet + 1 if c <= rel_tol * max(1.0, J) else 0
            if quiet >= window:
                return CostReport(J, "simulated", True, step + 1)
            x, xk, w = A @ x + b * xi, A_K @ xk + B_K @ x, d * w
    return CostReport(math.inf, "simulated", False, horizon_max + 1)


# --------------------------------------------------------------- closed forms

def _quad(z, M) -> float:
    return float(z @ M @ z)


def deadbeat_cost_matrix(p: Plant) -> np.ndarray:
    """``[[Q11, Q12], [Q12', Q22]]`` acting on ``[x0; B w0]``."""
    A, b, d = p.A, p.b_diag, p.d_diag
    n = p.n
    I, D = np.eye(n), np.diag(d)
    Binv2 = np.diag(1.0 / (b * b))
    AtB2A = A.T @ Binv2 @ A
    Q11 = I + D @ D @ (I + Binv2) + AtB2A + D @ AtB2A @ D + A.T @ Binv2 @ D + D @ Binv2 @ A
    Q12 = -D - A.T @ Binv2 - D @ Binv2 - D @ AtB2A
    Q22 = AtB2A + Binv2 + I
    return np.block([[Q11, Q12], [Q12.T, Q22]])


def cost_deadbeat_closed_form(p: Plant) -> float:
    z = np.concatenate([p.x0, p.b_diag * p.w0])
    return _quad(z, deadbeat_cost_matrix(p))


def optimal_cost_matrix(p: Plant, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Cost matrix of the optimal centralized controller acting on ``[x0; w0]``."""
    X22 = solve_for_plant(p, tol=tol, max_iter=max_iter).X22
    n = p.n
    binv, D = 1.0 / p.b_diag, np.diag(p.d_diag)
    top_left = binv[:, None] * (X22 + D @ X22 @ D - np.eye(n)) * binv[None, :]
    top_right = -binv[:, None] * (D @ X22)
    return np.block([[top_left, top_right], [top_right.T, X22]])


def cost_optimal_closed_form(p: Plant, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    z = np.concatenate([p.x0, p.w0])
    return _quad(z, optimal_cost_matrix(p, tol, max_iter))


def lower_bound_matrix(p: Plant) -> np.ndarray:
    """Bound matrix on ``[x0; B w0]`` built from ``W = A'(I+B^2)^-1 A + I``."""
    A, b = p.A, p.b_diag
    n = p.n
    W = A.T @ (A / (1.0 + b * b)[:, None]) + np.eye(n)
    D = np.diag(p.d_diag)
    Binv2 = np.diag(1.0 / (b * b))
    V = W + Binv2
    return np.block([[W + D @ W @ D + D @ D @ Binv2, -D @ V], [-V @ D, V]])


def optimal_cost_lower_bound(p: Plant) -> float:
    z = np.concatenate([p.x0, p.b_diag * p.w0])
    return _quad(z, lower_bound_matrix(p))


def ratio_bound(eps: float) -> float:
    """Worst-case cost ratio of the deadbeat design over plants with ``sigma_min(B) >= eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    e2 = eps * eps
    return (2 * e2 + 1 + math.sqrt(4 * e2 + 1)) / (2 * e2)


# -------------------------------------------------------------------- ratios

@dataclass(frozen=True)
class RatioReport:
    strategy: str
    cost_strategy: float
    cost_optimal_centralized: float
    ratio: float
    bound: float
    within_bound: bool
    converged: bool
    method: str


def strategy_cost(p: Plant, strategy, plant_graph: DirectedGraph | None = None,
                  method: str = "auto", tolerances: Tolerances = DEFAULT_TOLERANCES) -> CostReport:
    """Cost of a design strategy, closed form where one exists unless told otherwise."""
    kind = StrategyKind.parse(strategy)
    t = tolerances
    if method not in ("auto", "closed_form", "simulated"):
        raise ValueError(f"unknown method {method!r}")
    has_closed = kind is not StrategyKind.THETA
    if method == "closed_form" and not has_closed:
        raise ValueError(f"no closed-form cost for strategy {kind.value!r}")
    if method != "simulated" and has_closed:
        if kind is StrategyKind.OPTIMAL:
            value = cost_optimal_closed_form(p, t.dare_tol, t.dare_max_iter)
        else:
            if kind is StrategyKind.PI:
                synthesize(p, kind)  # enforces D = I
            value = cost_deadbeat_closed_form(p)
        return CostReport(value, "closed_form", True, 0)
    k = synthesize(p, kind, plant_graph, tol=t.dare_tol, max_iter=t.dare_max_iter)
    return cost_simulated(p, k, t.cost_rel_tol, t.cap, t.horizon_max, t.window)


def _divide(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def ratio(p: Plant, strategy, plant_graph: DirectedGraph | None = None,
          tolerances: Tolerances = DEFAULT_TOLERANCES, bound_rtol: float = 1e-9) -> RatioReport:
    """Cost of ``strategy`` relative to the optimal centralized cost on one plant.

    Zero over zero counts as one.  For a non-complete control graph the true
    structured optimum can only cost more than the centralized one, so the
    value reported here bounds the structured ratio from above.
    """
    kind = StrategyKind.parse(strategy)
    num = strategy_cost(p, kind, plant_graph, "auto", tolerances)
    den = cost_optimal_closed_form(p, tolerances.dare_tol, tolerances.dare_max_iter)
    r = _divide(num.value, den)
    bound = ratio_bound(p.epsilon)
    return RatioReport(kind.value, num.value, den, r, bound,
                       bool(r <= bound * (1 + bound_rtol)), num.converged, num.method)


# ------------------------------------------------------------------ families

def family_thm1(eps: float, r: float) -> Plant:
    """Two-node plant ``A = r e2 e1'``, ``B = eps I``, ``D = I`` whose ratio tends to the bound."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if r == 0:
        raise ValueError("r must be nonzero")
    c = (eps * eps + 1) * (math.sqrt(4 * eps * eps + 1) + 1) / 2
    A = np.zeros((2, 2))
    A[1, 0] = r
    return Plant(A, [eps, eps], [1.0, 1.0], [c / (eps * r), 0.0],
                 [c / (eps * eps * r), -1.0], eps, graph=family_graph("thm1"))


def family_sink(eps: float, r: float) -> Plant:
    """Two-node plant whose node 2 is a sink with self-loop ``r``; ``x0 = 0``, ``w0 = e2``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    A = np.zeros((2, 2))
    A[1, 1] = r
    return Plant(A, [eps, eps], [1.0, 1.0], [0.0, 0.0], [0.0, 1.0], eps,
                 graph=family_graph("sink"))


def family_path(eps: float, r: float, s: float) -> Plant:
    """Three-node path ``1 -> 2 -> 3`` with weights ``r`` and ``s``; ``x0 = 0``, ``w0 = e1``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    A = np.zeros((3, 3))
    A[1, 0] = r
    A[2, 1] = s
    return Plant(A, [eps] * 3, [1.0] * 3, [0.0] * 3, [1.0, 0.0, 0.0], eps,
                 graph=family_graph("path"))


_FAMILY_GRAPHS = {
    "thm1": [[0, 0], [1, 0]],
    "sink": [[0, 0], [1, 1]],
    "path": [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
}

FAMILIES = tuple(_FAMILY_GRAPHS)


def family_graph(family: str) -> DirectedGraph:
    try:
        return DirectedGraph(_FAMILY_GRAPHS[family])
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}") from None


def family_plant(family: str, eps: float, param) -> Plant:
    if family == "path":
        r, s = param
        return family_path(eps, r, s)
    r = param[0] if isinstance(param, (tuple, list)) else param
    if family == "thm1":
        return family_thm1(eps, r)
    if family == "sink":
        return family_sink(eps, r)
    raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


# --------------------------------------------------------------------- sweep

SWEEP_COLUMNS = ("family", "eps", "r", "s", "strategy", "cost", "cost_opt", "ratio",
                 "bound", "within_bound", "converged")


@dataclass(frozen=True)
class SweepRow:
    family: str
    eps: float
    r: float
    s: float | None
    strategy: str
    cost: float
    cost_opt: float
    ratio: float
    bound: float
    within_bound: bool
    converged: bool
    error: str | None = field(default=None)


def _sweep_row(job) -> SweepRow:
    family, eps, param, strategy, tolerances = job
    r, s = (param if family == "path" else (param, None))
    try:
        rep = ratio(family_plant(family, eps, param), strategy, tolerances=tolerances)
        return SweepRow(family, eps, r, s, rep.strategy, rep.cost_strategy,
                        rep.cost_optimal_centralized, rep.ratio, rep.bound,
                        rep.within_bound, rep.converged)
    except Exception as exc:  # recorded in the row; a sweep never aborts
        bound = ratio_bound(eps) if eps > 0 else math.nan
        return SweepRow(family, eps, r, s, str(strategy), math.nan, math.nan, math.nan,
                        bound, False, False, f"{type(exc).__name__}: {exc}")


def sweep(family: str, eps: float, grid, strategies, jobs: int = 1,
          tolerances: Tolerances = DEFAULT_TOLERANCES) -> list[SweepRow]:
    """One row per ``(parameter, strategy)`` in grid-major order.

    ``grid`` holds values of ``r`` for the ``thm1`` and ``sink`` families and
    ``(r, s)`` pairs for ``path``.
    """
    family_graph(family)
    grid = list(grid)
    if not grid:
        raise ValueError("parameter grid must be nonempty")
    strategies = [StrategyKind.parse(s).value for s in strategies]
    if family == "path":
        grid = [tuple(map(float, g)) for g in grid]
    else:
        grid = [float(g) for g in grid]
    jobs_list = [(family, float(eps), g, s, tolerances) for g in grid for s in strategies]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_row, jobs_list))
    return [_sweep_row(job) for job in jobs_list]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def sweep_to_json(rows) -> str:
    payload = [{k: _json_safe(v) for k, v in asdict(row).items()} for row in rows]
    return json.dumps(payload, indent=2) + "\n"
