"""Gradient operator and the entropy-plus-coupling regularizer.

The saddle objective's gradient operator is affine, so the extragradient loop
only ever needs incidence products.  The regularizer mixes edge entropy with a
coupling term pairing edge mass against squared vertex potentials; it is not
strongly convex, but its values grow along triangles fast enough (relative to
the operator) for dual extrapolation to converge.  The probes in this module
measure that growth so a configuration can be audited before a long run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .problem import (
    MatvecCounter,
    PrimalDualPoint,
    Problem,
    apply_adjoint,
    apply_incidence,
)

if TYPE_CHECKING:  # pragma: no cover
    from .prox import DualState


@dataclass(frozen=True)
class RegularizerConfig:
    """Shape of the regularizer.

    ``entropy_weight`` balances edge entropy against the coupling term
    (default 10, the setting with a convergence guarantee; the tuned presets
    use 4 and 3).  ``scale`` multiplies the whole regularizer and is normally
    twice the maximum cost, which keeps both block minimisers in closed form.
    """

    entropy_weight: float = 10.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.entropy_weight <= 0:
            raise ValueError("entropy_weight must be positive")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")

    @classmethod
    def for_problem(cls, prob: Problem, entropy_weight: float = 10.0) -> "RegularizerConfig":
        return cls(entropy_weight=entropy_weight, scale=2.0 * prob.cost_max)


@dataclass(frozen=True)
class GradientPair:
    """The two blocks of the saddle operator at a point."""

    gx: np.ndarray
    gy: np.ndarray


def regularizer_range_bound(cost_max: float, n: int) -> float:
    """Budget constant for the regularizer's value spread over its domain."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if cost_max < 0:
        raise ValueError("cost_max must be nonnegative")
    return 20.0 * cost_max * math.log(n) + 4.0 * cost_max


def gradient_operator(prob: Problem, z: PrimalDualPoint, counter: MatvecCounter | None = None) -> GradientPair:
    """Saddle operator: x-gradient of the objective and negated y-gradient."""
    gx = prob.cost + 2.0 * prob.cost_max * apply_adjoint(prob, z.y, counter)
    gy = 2.0 * prob.cost_max * (prob.demand - apply_incidence(prob, z.x, counter))
    return GradientPair(gx, gy)


def _entropy(x: np.ndarray) -> float:
    # 0 log 0 = 0 at the simplex boundary.
    pos = x[x > 0]
    return float(np.sum(pos * np.log(pos)))


def regularizer_value(
    prob: Problem,
    cfg: RegularizerConfig,
    z: PrimalDualPoint,
    counter: MatvecCounter | None = None,
) -> float:
    coupling = float(z.x @ apply_adjoint(prob, z.y * z.y, counter))
    return cfg.scale * (cfg.entropy_weight * _entropy(z.x) + coupling)


def regularizer_gradient(
    prob: Problem,
    cfg: RegularizerConfig,
    z: PrimalDualPoint,
    counter: MatvecCounter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the regularizer; needs a strictly positive simplex block."""
    if np.any(z.x <= 0):
        raise ValueError("regularizer gradient needs strictly positive simplex block")
    gx = cfg.scale * (
        cfg.entropy_weight * (1.0 + np.log(z.x)) + apply_adjoint(prob, z.y * z.y, counter)
    )
    gy = cfg.scale * 2.0 * apply_incidence(prob, z.x, counter) * z.y
    return gx, gy


def prox_objective(
    prob: Problem,
    cfg: RegularizerConfig,
    state: "DualState",
    z: PrimalDualPoint,
    counter: MatvecCounter | None = None,
) -> float:
    """Linear dual term plus the regularizer: the proximal subproblem's objective."""
    linear = float(state.sx @ z.x + state.sy @ z.y)
    return linear + regularizer_value(prob, cfg, z, counter)


def area_convexity_residual(
    prob: Problem,
    cfg: RegularizerConfig,
    kappa: float,
    a: PrimalDualPoint,
    b: PrimalDualPoint,
    c: PrimalDualPoint,
    counter: MatvecCounter | None = None,
) -> float:
    """Triangle growth of the regularizer minus the operator area of the triangle.

    Nonnegative for every triple when ``kappa = 3`` and ``entropy_weight = 10``;
    small ``kappa`` values can and do go negative.  This is a probe, not a
    certificate: a nonnegative sample proves nothing about other triples.
    """
    mid = PrimalDualPoint((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    growth = (
        regularizer_value(prob, cfg, a, counter)
        + regularizer_value(prob, cfg, b, counter)
        + regularizer_value(prob, cfg, c, counter)
        - 3.0 * regularizer_value(prob, cfg, mid, counter)
    )
    gb = gradient_operator(prob, b, counter)
    ga = gradient_operator(prob, a, counter)
    area = float((gb.gx - ga.gx) @ (b.x - c.x) + (gb.gy - ga.gy) @ (b.y - c.y))
    return kappa * growth - area


def area_convexity_quadratic_form(
    prob: Problem,
    z: PrimalDualPoint,
    a,
    b,
    c,
    d,
    counter: MatvecCounter | None = None,
) -> float:
    """Quadratic form of the curvature block matrix behind the kappa = 3 probe.

    Direction blocks ``a``, ``c`` live on edges and ``b``, ``d`` on vertices.
    The form is nonnegative whenever ``z.x`` is strictly positive and ``z.y``
    stays in the box.  Runs in Theta(n^2) over the implicit incidence pattern.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    x, y = z.x, z.y
    # Columns of the incidence pattern are 2-sparse, so the diagonal 1/x terms
    # appear once per incident vertex.
    value = 10.0 * float(np.sum((a * a + c * c) / x))
    value += float(a @ apply_adjoint(prob, 4.0 * b * y - 2.0 * d, counter))
    value += float(c @ apply_adjoint(prob, 4.0 * d * y + 2.0 * b, counter))
    value += float(x @ apply_adjoint(prob, 2.0 * (b * b + d * d), counter))
    return value
