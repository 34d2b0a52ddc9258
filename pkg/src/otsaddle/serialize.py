"""Deterministic CSV/JSON emission for traces, solutions, and plans.

All floats go out with 17 significant digits, which round-trips IEEE doubles
exactly, and identical inputs always produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .problem import TransportPlan
from .solver import ConvergenceTrace, Solution

TRACE_HEADER = "iter,matvecs,primal,dual,gap,elapsed_ms"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_trace(trace: ConvergenceTrace, path) -> None:
    """Write a trace as CSV, one row per gap check (header only if empty)."""
    lines = [TRACE_HEADER]
    for row in trace:
        lines.append(
            f"{row.outer_iter},{row.matvecs},{_fmt(row.primal)},{_fmt(row.dual)},"
            f"{_fmt(row.gap)},{_fmt(row.elapsed_ms)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def emit_plan(plan, path) -> None:
    M = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    lines = [",".join(_fmt(v) for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def load_plan_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def emit_solution(solution: Solution, path, plan_path=None) -> Path:
    """Write a solution summary as JSON; the plan goes to a sibling CSV.

    Returns the path of the plan file.
    """
    path = Path(path)
    if plan_path is None:
        plan_path = path.with_suffix(".plan.csv")
    plan_path = Path(plan_path)
    emit_plan(solution.plan, plan_path)
    payload = {
        "objective": solution.objective,
        "gap": solution.gap,
        "outer_iterations": solution.outer_iterations,
        "matvecs": solution.matvecs,
        "solver": solution.solver,
        "config": solution.config,
        "plan_file": str(plan_path),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return plan_path
