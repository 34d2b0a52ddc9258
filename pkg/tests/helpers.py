"""Shared test oracles: dense operators, brute-force LP solvers, generators."""

from __future__ import annotations

import itertools

import numpy as np

import otsaddle as ot


def dense_incidence(n: int) -> np.ndarray:
    """Materialised 2n-by-n^2 vertex/edge incidence matrix (row-major edges)."""
    A = np.zeros((2 * n, n * n))
    for e in range(n * n):
        i, j = divmod(e, n)
        A[i, e] = 1.0
        A[n + j, e] = 1.0
    return A


def random_problem(rng: np.random.Generator, n: int, cost_max: float = 1.0) -> ot.Problem:
    C = rng.random((n, n))
    C = C / C.max() * cost_max
    r = rng.dirichlet(np.ones(n))
    c = rng.dirichlet(np.ones(n))
    return ot.build_problem(C, r, c)


def random_point(rng: np.random.Generator, prob: ot.Problem) -> ot.PrimalDualPoint:
    """Random interior point: Dirichlet simplex block, uniform box block."""
    return ot.PrimalDualPoint(
        rng.dirichlet(np.ones(prob.num_edges)),
        rng.uniform(-1.0, 1.0, 2 * prob.n),
    )


def box_dual_from_oracle(prob: ot.Problem, result: ot.OracleResult) -> np.ndarray:
    """Optimal box point built from the oracle's LP potentials.

    Tightening both potential vectors (each against the other) keeps them
    optimal while bounding their spread by the cost range; re-centring then
    fits them inside the scaled box with room to spare.
    """
    C = prob.cost_matrix()
    u = (C - result.col_potential[None, :]).min(axis=1)
    v = (C - u[:, None]).min(axis=0)
    shift = 0.5 * (u.max() + u.min())
    u = u - shift
    v = v + shift
    return -np.concatenate([u, v]) / (2.0 * max(prob.cost_max, 1e-300))


def _tree_plan(n: int, cells: tuple[tuple[int, int], ...], r: np.ndarray, c: np.ndarray):
    """Solve for the basic solution supported on a spanning set of cells.

    Peels degree-one vertices: each leaf pins its only incident cell.  Returns
    None when the cells do not determine a unique solution.
    """
    plan = np.zeros((n, n))
    row_rem = r.copy()
    col_rem = c.copy()
    remaining = set(cells)
    while remaining:
        row_deg = {}
        col_deg = {}
        for i, j in remaining:
            row_deg[i] = row_deg.get(i, 0) + 1
            col_deg[j] = col_deg.get(j, 0) + 1
        leaf = None
        for i, j in sorted(remaining):
            if row_deg[i] == 1:
                leaf = (i, j, "row")
                break
            if col_deg[j] == 1:
                leaf = (i, j, "col")
                break
        if leaf is None:
            return None  # a cycle: not a tree
        i, j, kind = leaf
        amount = row_rem[i] if kind == "row" else col_rem[j]
        plan[i, j] = amount
        row_rem[i] -= amount
        col_rem[j] -= amount
        remaining.remove((i, j))
    if np.abs(row_rem).max() > 1e-9 or np.abs(col_rem).max() > 1e-9:
        return None
    return plan


def brute_force_transport(prob: ot.Problem) -> float:
    """Minimum cost over every spanning-tree basic solution (n <= 4)."""
    n = prob.n
    assert n <= 4, "exhaustive enumeration is only tractable for tiny n"
    cells = list(itertools.product(range(n), range(n)))
    best = np.inf
    C = prob.cost_matrix()
    for subset in itertools.combinations(cells, 2 * n - 1):
        plan = _tree_plan(n, subset, prob.row_marginal, prob.col_marginal)
        if plan is None or plan.min() < -1e-12:
            continue
        best = min(best, float(np.sum(C * np.maximum(plan, 0.0))))
    return best


def linprog_transport(prob: ot.Problem) -> float:
    """Reference optimum from an independent LP solver."""
    from scipy.optimize import linprog

    n = prob.n
    A_eq = dense_incidence(n)[:-1]  # drop one redundant constraint
    b_eq = prob.demand[:-1]
    res = linprog(prob.cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def make_pgm(pixels: np.ndarray, maxval: int = 255) -> str:
    """Serialise an integer image as plain-text PGM."""
    h, w = pixels.shape
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in pixels)
    return f"P2\n# test image\n{w} {h}\n{maxval}\n{rows}\n"


def blob_image(w: int, h: int, cx: float, cy: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian blob plus uniform background noise, quantised to [0, 255]."""
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2)) * 255.0
    img += rng.uniform(0.0, 10.0, (h, w))
    return np.clip(img, 0, 255).astype(int)


def near_feasible_plan(
    rng: np.random.Generator, prob: ot.Problem, blend: float
) -> np.ndarray:
    """Unit-mass plan at a controlled distance from the feasible polytope."""
    feasible = np.outer(prob.row_marginal, prob.col_marginal)
    noise = rng.dirichlet(np.ones(prob.num_edges)).reshape(prob.n, prob.n)
    plan = (1.0 - blend) * feasible + blend * noise
    return plan / plan.sum()
