"""Command-line interface.

Every command writes machine-readable output (JSON or CSV) to stdout or to
``--out`` and a short human summary to stderr.  Exit codes: 0 success,
1 domain error or failed validation, 2 unreadable or malformed input,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (FAMILIES, DEFAULT_TOLERANCES, Tolerances, ratio, simulate, strategy_cost,
                         sweep, sweep_to_csv, sweep_to_json)
from .graphs import sink_mask
from .model import (PlantFileError, controller_sparsity, controller_to_dict, load_controller,
                    load_plant, validate_plant)
from .riccati import DareConvergenceError, DareSingularError
from .synthesis import StrategyKind, pi_gains_dict, synthesize

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _note(msg: str):
    print(msg, file=sys.stderr)


def _tolerances(args) -> Tolerances:
    return Tolerances(dare_tol=args.tol_dare, dare_max_iter=args.dare_max_iter,
                      cost_rel_tol=args.tol_cost, cap=args.cap, horizon_max=args.horizon_max)


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    p = load_plant(args.plant)
    g = p.plant_graph()
    report = validate_plant(p, g)
    report.checks.append("plant graph has no isolated node")
    for i in g.isolated_nodes():
        report.add("isolated_node", "plant graph has an isolated node", index=(i,))
    payload = {
        "ok": report.ok,
        "checks": report.checks,
        "issues": [{"code": i.code, "message": i.message,
                    "index": list(i.index) if i.index is not None else None,
                    "value": i.magnitude} for i in report.issues],
    }
    _emit(_dump(payload), args.out)
    _note(report.format())
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_synthesize(args) -> int:
    p = load_plant(args.plant)
    kind = StrategyKind.parse(args.strategy)
    k = synthesize(p, kind, tol=args.tol_dare, max_iter=args.dare_max_iter)
    _emit(_dump(controller_to_dict(k)), args.out)
    if args.gains_out:
        if kind is not StrategyKind.PI:
            raise CliError(EXIT_DOMAIN, "--gains-out is only meaningful with --strategy pi")
        Path(args.gains_out).write_text(_dump(pi_gains_dict(p)), encoding="utf-8")
    S = controller_sparsity(k).adjacency
    _note(f"{kind.value}: controller order {k.n_state}, "
          f"{int(S.sum())}/{S.size} nonzero transfer entries")
    if kind is StrategyKind.THETA:
        _note(f"sinks: {np.flatnonzero(sink_mask(p.plant_graph())).tolist()}")
    return EXIT_OK


def cmd_cost(args) -> int:
    p = load_plant(args.plant)
    rep = strategy_cost(p, args.strategy, method=args.method, tolerances=_tolerances(args))
    payload = {"strategy": StrategyKind.parse(args.strategy).value,
               **{k: _json_value(v) for k, v in asdict(rep).items()}}
    _emit(_dump(payload), args.out)
    _note(f"cost {rep.value!r} ({rep.method}, converged={rep.converged})")
    if not rep.converged:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_ratio(args) -> int:
    p = load_plant(args.plant)
    rep = ratio(p, args.strategy, tolerances=_tolerances(args))
    _emit(_dump({k: _json_value(v) for k, v in asdict(rep).items()}), args.out)
    _note(f"ratio {rep.ratio!r} vs bound {rep.bound!r} (within_bound={rep.within_bound})")
    return EXIT_OK if rep.converged else EXIT_NUMERIC


def cmd_simulate(args) -> int:
    if args.horizon < 0:
        raise CliError(EXIT_DOMAIN, "horizon must be nonnegative")
    p = load_plant(args.plant)
    k = load_controller(args.controller)
    if k.n != p.n:
        raise CliError(EXIT_DOMAIN, f"controller acts on {k.n} states, plant has {p.n}")
    tr = simulate(p, k, args.horizon)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n, m = p.n, k.n_state
    w.writerow(["k"] + [f"{name}[{i}]" for name, size in
                        (("x", n), ("x_K", m), ("u", n), ("w", n), ("xi", n)) for i in range(size)]
               + ["stage_cost"])
    for t in range(tr.horizon + 1):
        values = np.concatenate([tr.x[t], tr.x_K[t], tr.u[t], tr.w[t], tr.xi[t],
                                 [tr.stage_costs[t]]])
        w.writerow([t] + [format(float(v), ".17g") for v in values])
    _emit(buf.getvalue(), args.out)
    _note(f"simulated {tr.horizon} steps, partial cost {tr.cost!r}")
    return EXIT_OK


def _parse_grid(text: str, family: str):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise CliError(EXIT_DOMAIN, "parameter grid must be nonempty")
    try:
        if family == "path":
            pairs = []
            for item in items:
                r, s = item.split(":")
                pairs.append((float(r), float(s)))
            return pairs
        return [float(item) for item in items]
    except ValueError:
        hint = "r:s pairs such as 2:5,3:7" if family == "path" else "numbers such as 10,100"
        raise CliError(EXIT_INPUT, f"cannot parse grid {text!r}; expected {hint}") from None


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid, args.family)
    strategies = args.strategy or ["deadbeat"]
    rows = sweep(args.family, args.eps, grid, strategies, jobs=args.jobs,
                 tolerances=_tolerances(args))
    _emit(sweep_to_csv(rows), args.out)
    if args.json_out:
        Path(args.json_out).write_text(sweep_to_json(rows), encoding="utf-8")
    failed = [r for r in rows if r.error]
    best = max((r.ratio for r in rows if not r.error), default=math.nan)
    _note(f"{len(rows)} rows, max ratio {best!r}, bound {rows[0].bound!r}, "
          f"{len(failed)} failed" if rows else "no rows")
    for r in failed:
        _note(f"row r={r.r} s={r.s} {r.strategy}: {r.error}")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def _add_tolerances(p: argparse.ArgumentParser):
    t = DEFAULT_TOLERANCES
    p.add_argument("--tol-dare", type=float, default=t.dare_tol,
                   help="relative step tolerance of the Riccati iteration (default %(default)g)")
    p.add_argument("--dare-max-iter", type=int, default=t.dare_max_iter,
                   help="iteration limit of the Riccati solver (default %(default)d)")
    p.add_argument("--tol-cost", type=float, default=t.cost_rel_tol,
                   help="relative stage-cost threshold for simulated costs (default %(default)g)")
    p.add_argument("--cap", type=float, default=t.cap,
                   help="partial cost above which a simulation is declared divergent")
    p.add_argument("--horizon-max", type=int, default=t.horizon_max,
                   help="maximum number of simulated steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dacratio",
        description="Limited-model-information disturbance accommodation: synthesis, "
                    "exact costs and competitive ratios.",
        epilog="Only the totally disconnected (deadbeat, theta, pi) and complete (optimal) "
               "design-information cases are synthesized; intermediate design graphs "
               "are not supported.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    strategies = [k.value for k in StrategyKind]

    p = sub.add_parser("validate", help="check a plant file against its plant class")
    p.add_argument("plant")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synthesize", help="write the controller of a design strategy")
    p.add_argument("plant")
    p.add_argument("--strategy", choices=strategies, required=True)
    p.add_argument("--out", help="controller file (default: stdout)")
    p.add_argument("--gains-out", help="with --strategy pi, also write the Kp/Ki gains here")
    p.add_argument("--tol-dare", type=float, default=DEFAULT_TOLERANCES.dare_tol)
    p.add_argument("--dare-max-iter", type=int, default=DEFAULT_TOLERANCES.dare_max_iter)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("cost", help="closed-loop cost of a strategy")
    p.add_argument("plant")
    p.add_argument("--strategy", choices=strategies, required=True)
    p.add_argument("--method", choices=["auto", "closed_form", "simulated"], default="auto")
    p.add_argument("--out")
    _add_tolerances(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("ratio", help="cost ratio against the optimal centralized controller")
    p.add_argument("plant")
    p.add_argument("--strategy", choices=strategies, required=True)
    p.add_argument("--out")
    _add_tolerances(p)
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("simulate", help="closed-loop trajectory as CSV")
    p.add_argument("plant")
    p.add_argument("controller")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="ratios over a worst-case plant family")
    p.add_argument("family", choices=list(FAMILIES))
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--grid", required=True,
                   help="comma-separated r values, or r:s pairs for the path family")
    p.add_argument("--strategy", action="append", choices=strategies,
                   help="repeatable (default: deadbeat)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.add_argument("--json-out", help="also write the rows as JSON")
    _add_tolerances(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _note(f"error: {exc}")
        return exc.code
    except (PlantFileError, OSError) as exc:
        _note(f"error: {exc}")
        return EXIT_INPUT
    except (DareConvergenceError, DareSingularError) as exc:
        _note(f"error: {exc}")
        return EXIT_NUMERIC
    except ValueError as exc:
        _note(f"error: {exc}")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
