"""Transportation instances and the implicit bipartite incidence operator.

An instance couples two discrete distributions through the complete n-by-n
bipartite graph: edge (i, j) carries the mass moved from source i to sink j.
The vertex sums of an edge vector are exactly the row and column sums of its
n-by-n unflattening, so every incidence product runs in Theta(n^2) without
the 0/1 operator ever being materialised.  Each such product counts as one
"matvec", the cost unit shared by all solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-12
MARGINAL_TOL = 1e-9


@dataclass
class MatvecCounter:
    """Running count of incidence/adjoint applications."""

    count: int = 0

    def tick(self, k: int = 1) -> None:
        self.count += k


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Problem:
    """Immutable transportation instance.

    ``cost`` is the row-major flattening of the n-by-n cost matrix; ``demand``
    concatenates ``row_marginal`` and ``col_marginal``, so its entries sum
    to 2.  Marginals are normalised to total mass one at construction.
    """

    n: int
    cost: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    demand: np.ndarray
    cost_max: float

    @property
    def num_edges(self) -> int:
        return self.n * self.n

    def cost_matrix(self) -> np.ndarray:
        return self.cost.reshape(self.n, self.n)


@dataclass
class PrimalDualPoint:
    """A simplex point over edges paired with a box point over vertices."""

    x: np.ndarray
    y: np.ndarray

    def copy(self) -> "PrimalDualPoint":
        return PrimalDualPoint(self.x.copy(), self.y.copy())

    def validate(self, tol: float = SIMPLEX_TOL) -> None:
        if np.any(self.x < 0):
            raise ValueError("simplex block has a negative entry")
        if abs(float(self.x.sum()) - 1.0) > tol:
            raise ValueError("simplex block does not sum to 1")
        if np.any(np.abs(self.y) > 1.0):
            raise ValueError("box block leaves [-1, 1]")


@dataclass
class TransportPlan:
    """Nonnegative n-by-n coupling matrix."""

    matrix: np.ndarray

    def marginal_error(self, prob: "Problem") -> float:
        """Combined l1 deviation of the row and column sums from the marginals."""
        X = self.matrix
        return float(
            np.abs(X.sum(axis=1) - prob.row_marginal).sum()
            + np.abs(X.sum(axis=0) - prob.col_marginal).sum()
        )


def _marginal(v, n: int, side: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (n,):
        raise ValueError(f"{side} marginal must have length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite {side} marginal entry")
    if np.any(v < 0):
        raise ValueError(f"negative {side} marginal entry")
    total = float(v.sum())
    if total <= 0:
        raise ValueError(f"{side} marginal has zero total mass")
    return v / total


def build_problem(C, r, c) -> Problem:
    """Validate an instance and normalise its marginals.

    Costs must be nonnegative and finite; marginals must be nonnegative with
    positive total mass and are rescaled to sum to one.  A zero cost matrix is
    legal: every feasible plan is then optimal.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {C.shape}")
    n = int(C.shape[0])
    if n < 1:
        raise ValueError("instance needs at least one point")
    if not np.all(np.isfinite(C)):
        raise ValueError("non-finite cost entry")
    if np.any(C < 0):
        raise ValueError("negative cost entry")
    r = _marginal(r, n, "row")
    c = _marginal(c, n, "column")
    cost = C.reshape(-1).copy()
    return Problem(
        n=n,
        cost=_readonly(cost),
        row_marginal=_readonly(r),
        col_marginal=_readonly(c),
        demand=_readonly(np.concatenate([r, c])),
        cost_max=float(cost.max()),
    )


def apply_incidence(prob: Problem, x, counter: MatvecCounter | None = None) -> np.ndarray:
    """Vertex sums of an edge vector: (row sums, column sums) of its unflattening."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (prob.num_edges,):
        raise ValueError(f"edge vector must have length {prob.num_edges}, got shape {x.shape}")
    X = x.reshape(prob.n, prob.n)
    if counter is not None:
        counter.tick()
    return np.concatenate([X.sum(axis=1), X.sum(axis=0)])


def apply_adjoint(prob: Problem, y, counter: MatvecCounter | None = None) -> np.ndarray:
    """Adjoint of :func:`apply_incidence`: edge (i, j) receives ``y[i] + y[n + j]``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (2 * prob.n,):
        raise ValueError(f"vertex vector must have length {2 * prob.n}, got shape {y.shape}")
    if counter is not None:
        counter.tick()
    return (y[: prob.n, None] + y[None, prob.n :]).reshape(-1)


def primal_value(prob: Problem, x, counter: MatvecCounter | None = None) -> float:
    """Transport cost of ``x`` plus the scaled l1 penalty on its infeasibility."""
    x = np.asarray(x, dtype=np.float64)
    residual = apply_incidence(prob, x, counter) - prob.demand
    return float(prob.cost @ x + 2.0 * prob.cost_max * np.abs(residual).sum())


def dual_value(prob: Problem, y, counter: MatvecCounter | None = None) -> float:
    """Lower bound certified by a box point.

    The inner minimisation over the simplex is attained at a vertex, so it
    reduces to the minimum entry of the shifted cost vector.
    """
    y = np.asarray(y, dtype=np.float64)
    shifted = prob.cost + 2.0 * prob.cost_max * apply_adjoint(prob, y, counter)
    return float(shifted.min() - 2.0 * prob.cost_max * (prob.demand @ y))


def duality_gap(prob: Problem, z: PrimalDualPoint, counter: MatvecCounter | None = None) -> float:
    """Certified suboptimality of the pair; nonnegative up to roundoff."""
    return primal_value(prob, z.x, counter) - dual_value(prob, z.y, counter)


def transport_objective(prob: Problem, plan) -> float:
    """Entrywise inner product of the cost matrix with a plan."""
    M = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    if M.shape != (prob.n, prob.n):
        raise ValueError(f"plan must be {prob.n}x{prob.n}, got shape {M.shape}")
    return float(np.sum(prob.cost_matrix() * M))
