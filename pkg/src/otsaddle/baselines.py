"""Sinkhorn baseline and an exact small-instance transportation oracle.

Sinkhorn alternately rescales rows and columns of exp(-eta * C) until the
marginals match; the potentials are kept in log domain so large eta values do
not overflow.  The oracle solves the transportation LP exactly with the
transportation simplex and exists to verify the approximate solvers at desk
scale, not for production use.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .problem import Problem, TransportPlan, transport_objective
from .rounding import round_to_feasible
from .solver import ConvergenceTrace, NumericalError, Solution, TraceRow

SINKHORN_PRESETS = {"theory-like": 70.0, "practical": 5.0}

ORACLE_MAX_N = 16


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic strength, iteration cap, and the l1 marginal stop threshold."""

    eta: float
    max_iter: int = 10000
    marginal_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.marginal_tol < 0:
            raise ValueError("marginal_tol must be nonnegative")


def _logsumexp_rows(M: np.ndarray) -> np.ndarray:
    mx = M.max(axis=1)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.exp(M - safe[:, None]).sum(axis=1))


def sinkhorn(
    prob: Problem,
    cfg: SinkhornConfig,
    clock=None,
) -> tuple[TransportPlan, ConvergenceTrace]:
    """Log-domain diagonal scaling of exp(-eta * C).

    Each half-iteration matches one marginal exactly and counts as one
    matvec-equivalent.  Trace rows record the penalised transport value of the
    current scaling as ``primal`` and the infeasibility penalty
    ``2 * cost_max * marginal_error`` as ``gap``; no duality certificate is
    available, so ``dual`` is NaN.  The final matrix is rounded onto the
    polytope before being returned.
    """
    clock = clock or time.perf_counter
    start = clock()
    n = prob.n
    K = -cfg.eta * prob.cost_matrix()
    with np.errstate(divide="ignore"):
        log_r = np.log(prob.row_marginal)
        log_c = np.log(prob.col_marginal)
    u = np.zeros(n)
    v = np.zeros(n)
    trace = ConvergenceTrace()
    matvecs = 0
    X = np.exp(K)
    for it in range(1, cfg.max_iter + 1):
        u = log_r - _logsumexp_rows(K + v[None, :])
        matvecs += 1
        v = log_c - _logsumexp_rows(K.T + u[None, :])
        matvecs += 1
        if np.isnan(u).any() or np.isnan(v).any():
            raise NumericalError(f"sinkhorn potentials became NaN at iteration {it} (eta={cfg.eta:g})")
        X = np.exp(u[:, None] + K + v[None, :])
        err = float(
            np.abs(X.sum(axis=1) - prob.row_marginal).sum()
            + np.abs(X.sum(axis=0) - prob.col_marginal).sum()
        )
        penalty = 2.0 * prob.cost_max * err
        transport = float(np.sum(prob.cost_matrix() * X))
        trace.append(
            TraceRow(it, matvecs, transport + penalty, math.nan, penalty, (clock() - start) * 1e3)
        )
        if err <= cfg.marginal_tol:
            break
    plan, _ = round_to_feasible(prob, X)
    return plan, trace


def solve_sinkhorn(prob: Problem, cfg: SinkhornConfig, clock=None) -> Solution:
    """Run :func:`sinkhorn` and package the result like the extragradient solvers.

    ``gap`` carries the final infeasibility penalty, not a duality
    certificate; ``converged`` means the marginal tolerance was met.
    """
    plan, trace = sinkhorn(prob, cfg, clock)
    last = trace.last()
    converged = last.gap <= 2.0 * prob.cost_max * cfg.marginal_tol
    return Solution(
        z=None,
        plan=plan,
        objective=transport_objective(prob, plan),
        gap=last.gap,
        trace=trace,
        solver="sinkhorn",
        outer_iterations=last.outer_iter,
        matvecs=last.matvecs,
        converged=converged,
        config={
            "solver": "sinkhorn",
            "eta": cfg.eta,
            "max_iter": cfg.max_iter,
            "marginal_tol": cfg.marginal_tol,
        },
    )


@dataclass(frozen=True)
class OracleResult:
    """Exact optimum, an optimal vertex plan, and its basis description."""

    optimum: float
    plan: TransportPlan
    vertex: tuple[tuple[int, int], ...]
    row_potential: np.ndarray
    col_potential: np.ndarray


def _northwest_corner(r: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    n = len(r)
    X = np.zeros((n, n))
    basis: list[tuple[int, int]] = []
    a = r.copy()
    b = c.copy()
    i = j = 0
    while True:
        t = min(a[i], b[j])
        X[i, j] = t
        basis.append((i, j))
        a[i] -= t
        b[j] -= t
        if i == n - 1 and j == n - 1:
            break
        # Advance exactly one index per step so the basis keeps 2n - 1 cells
        # (degenerate zero cells included).
        if i == n - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return X, basis


def _potentials(C: np.ndarray, basis: list[tuple[int, int]], n: int) -> tuple[np.ndarray, np.ndarray]:
    rows_adj: list[list[int]] = [[] for _ in range(n)]
    cols_adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in basis:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    u = np.full(n, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [(True, 0)]
    while stack:
        is_row, k = stack.pop()
        if is_row:
            for j in rows_adj[k]:
                if math.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    stack.append((False, j))
        else:
            for i in cols_adj[k]:
                if math.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    stack.append((True, i))
    return u, v


def _pivot_cycle(basis: list[tuple[int, int]], entering: tuple[int, int], n: int) -> list[tuple[int, int]]:
    # The basis is a spanning tree on rows and columns, so adding the entering
    # cell closes exactly one cycle: entering plus the tree path between its
    # row and its column.
    adj: dict[tuple[bool, int], list[tuple[tuple[bool, int], tuple[int, int]]]] = {}
    for i, j in basis:
        adj.setdefault((True, i), []).append(((False, j), (i, j)))
        adj.setdefault((False, j), []).append(((True, i), (i, j)))
    start = (True, entering[0])
    goal = (False, entering[1])
    prev: dict[tuple[bool, int], tuple[tuple[bool, int], tuple[int, int]] | None] = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj.get(node, ()):  # pragma: no branch
            if nxt not in prev:
                prev[nxt] = (node, cell)
                queue.append(nxt)
    path: list[tuple[int, int]] = []
    node = goal
    while prev[node] is not None:
        node, cell = prev[node]  # type: ignore[misc]
        path.append(cell)
    path.reverse()
    return [entering] + path


def exact_oracle(prob: Problem) -> OracleResult:
    """Solve the transportation LP exactly with the transportation simplex.

    Northwest-corner start, cycle pivoting, and smallest-index (Bland) tie
    breaking for both the entering and the leaving cell, which prevents
    cycling on degenerate instances.  Enforced to ``n <= 16``: this is a
    verification oracle, quadratic scans per pivot are fine at that size.
    """
    if prob.n > ORACLE_MAX_N:
        raise ValueError(f"exact oracle accepts n <= {ORACLE_MAX_N}, got {prob.n}")
    n = prob.n
    C = prob.cost_matrix()
    X, basis = _northwest_corner(prob.row_marginal.copy(), prob.col_marginal.copy())
    tol = 1e-10 * max(1.0, prob.cost_max)
    max_pivots = 500 * n * n + 100
    u = np.zeros(n)
    v = np.zeros(n)
    for _ in range(max_pivots):
        u, v = _potentials(C, basis, n)
        reduced = C - u[:, None] - v[None, :]
        negatives = np.flatnonzero(reduced.reshape(-1) < -tol)
        if negatives.size == 0:
            break
        entering = divmod(int(negatives[0]), n)
        cycle = _pivot_cycle(basis, entering, n)
        gives = cycle[1::2]
        theta = min(X[cell] for cell in gives)
        leaving = min(
            (cell for cell in gives if X[cell] == theta),
            key=lambda ij: ij[0] * n + ij[1],
        )
        for idx, cell in enumerate(cycle):
            X[cell] += theta if idx % 2 == 0 else -theta
        X[leaving] = 0.0
        basis.remove(leaving)
        basis.append(entering)
    else:
        raise RuntimeError(f"pivot limit {max_pivots} exceeded (degenerate instance?)")
    np.maximum(X, 0.0, out=X)
    return OracleResult(
        optimum=float(np.sum(C * X)),
        plan=TransportPlan(X),
        vertex=tuple(sorted(basis)),
        row_potential=u,
        col_potential=v,
    )
