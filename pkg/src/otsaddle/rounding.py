"""Projection of a near-feasible plan onto the transportation polytope.

Two diagonal scalings clamp the row sums and then the column sums from above,
after which a rank-one patch restores the missing mass.  The output meets both
marginals exactly and moves at most twice the input's l1 infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import Problem, TransportPlan

MASS_TOL = 1e-9
# Deficits below this are treated as zero: the rank-one patch divides by the
# deficit and would otherwise amplify rounding noise.
DEFICIT_FLOOR = 1e-15


@dataclass(frozen=True)
class RoundingReport:
    """Input infeasibility, l1 mass moved, and the resulting objective change."""

    delta_in: float
    l1_moved: float
    objective_change: float


def round_to_feasible(prob: Problem, plan) -> tuple[TransportPlan, RoundingReport]:
    """Round a nonnegative matrix of total mass one onto the feasible polytope.

    The l1 distance moved is at most ``2 * delta_in + 1e-9`` where ``delta_in``
    is the combined l1 deviation of the input's row and column sums, so the
    objective degrades by at most ``cost_max`` times the mass moved.
    """
    X = np.asarray(plan, dtype=np.float64)
    if X.shape != (prob.n, prob.n):
        raise ValueError(f"plan must be {prob.n}x{prob.n}, got shape {X.shape}")
    if np.any(X < 0):
        raise ValueError("plan has a negative entry")
    total = float(X.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"plan mass {total!r} deviates from 1 beyond {MASS_TOL:g}")

    r, c = prob.row_marginal, prob.col_marginal
    row_in = X.sum(axis=1)
    col_in = X.sum(axis=0)
    delta_in = float(np.abs(row_in - r).sum() + np.abs(col_in - c).sum())

    # An all-zero row has nothing to scale; its factor is defined as 1.
    safe_rows = np.where(row_in > 0, row_in, 1.0)
    row_scale = np.where(row_in > 0, np.minimum(r / safe_rows, 1.0), 1.0)
    X1 = row_scale[:, None] * X

    col_mid = X1.sum(axis=0)
    safe_cols = np.where(col_mid > 0, col_mid, 1.0)
    col_scale = np.where(col_mid > 0, np.minimum(c / safe_cols, 1.0), 1.0)
    X2 = X1 * col_scale[None, :]

    # Both scalings only remove mass, so the remaining deficits are
    # nonnegative; tiny negative roundoff is clipped to keep the plan >= 0.
    err_r = np.maximum(r - X2.sum(axis=1), 0.0)
    err_c = np.maximum(c - X2.sum(axis=0), 0.0)
    deficit = float(err_r.sum())
    if deficit > DEFICIT_FLOOR:
        Xhat = X2 + np.outer(err_r, err_c) / deficit
    else:
        Xhat = X2

    l1_moved = float(np.abs(Xhat - X).sum())
    objective_change = float(np.sum(prob.cost_matrix() * (Xhat - X)))
    return TransportPlan(Xhat), RoundingReport(delta_in, l1_moved, objective_change)
