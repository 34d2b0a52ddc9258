"""Outer extragradient loops, duality-gap termination, and trace recording.

Two variants share all plumbing.  ``dual-extrapolation`` accumulates a dual
state and takes both proximal steps from the regularizer's minimiser, with the
deliberate factor-two asymmetry between the lookahead step (1/kappa) and the
state update (1/(2 kappa)).  ``mirror-prox`` re-centres both proximal steps at
the current iterate each round; it has no convergence proof under this
regularizer and is flagged experimental in its output config.

Certification is the computable duality gap.  Every periodic check evaluates
both the second half-iterate and the running average of half-iterates (the
average carries the worst-case guarantee and usually certifies first), and
whichever candidate has certified the smaller gap is rounded and returned.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .problem import (
    MatvecCounter,
    PrimalDualPoint,
    Problem,
    TransportPlan,
    dual_value,
    primal_value,
    transport_objective,
)
from .prox import AltMinConfig, DualState, approx_prox, inner_iteration_budget
from .regularizer import (
    RegularizerConfig,
    gradient_operator,
    regularizer_gradient,
    regularizer_range_bound,
)
from .rounding import round_to_feasible

DUAL_EXTRAPOLATION = "dual-extrapolation"
MIRROR_PROX = "mirror-prox"
VARIANTS = (DUAL_EXTRAPOLATION, MIRROR_PROX)

PRESET_NAMES = ("provable", "reasonable", "optimized")


class NumericalError(RuntimeError):
    """Solver state stopped being finite."""


class IterationLimitError(RuntimeError):
    """Iteration cap hit before certification; carries the best solution seen."""

    def __init__(self, message: str, solution: "Solution"):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SolverConfig:
    """Extragradient run parameters.

    ``step_scale`` multiplies the theoretical 1/kappa lookahead and
    1/(2 kappa) state-update steps.  ``max_outer`` and ``max_inner`` default to
    the certified budgets for the requested ``epsilon``; ``movement_tol``
    enables the inner early stop (set it to 0 to force full inner budgets).
    """

    epsilon: float
    kappa: float = 3.0
    step_scale: float = 1.0
    entropy_weight: float = 10.0
    max_outer: int | None = None
    gap_check_every: int = 10
    variant: str = DUAL_EXTRAPOLATION
    max_inner: int | None = None
    movement_tol: float = 1e-9
    denom_floor: float = 1e-30

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.entropy_weight <= 0:
            raise ValueError("entropy_weight must be positive")
        if self.max_outer is not None and self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.gap_check_every < 1:
            raise ValueError("gap_check_every must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.max_inner is not None and self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")

    def resolved_max_outer(self, prob: Problem) -> int:
        if self.max_outer is not None:
            return self.max_outer
        theta = regularizer_range_bound(prob.cost_max, prob.n)
        return math.ceil(12.0 * theta / self.epsilon) + 1

    def resolved_max_inner(self, prob: Problem) -> int:
        if self.max_inner is not None:
            return self.max_inner
        return inner_iteration_budget(prob.cost_max, prob.n, self.epsilon)


def preset(name: str, epsilon: float, cost_max: float, **overrides) -> SolverConfig:
    """Named parameter bundles.

    ``provable`` is the guaranteed setting (entropy weight 10, unit step
    multiplier, full inner budget).  ``reasonable`` and ``optimized`` are the
    tuned settings (entropy weight 4 with step multiplier cost_max / 3, and 3
    with cost_max), capped at 8 inner alternations since a handful suffice.
    """
    if name == "provable":
        base = dict(entropy_weight=10.0, step_scale=1.0)
    elif name == "reasonable":
        base = dict(entropy_weight=4.0, step_scale=max(cost_max, 1e-300) / 3.0, max_inner=8)
    elif name == "optimized":
        base = dict(entropy_weight=3.0, step_scale=max(cost_max, 1e-300), max_inner=8)
    else:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    base.update(overrides)
    return SolverConfig(epsilon=epsilon, **base)


@dataclass(frozen=True)
class TraceRow:
    outer_iter: int
    matvecs: int
    primal: float
    dual: float
    gap: float
    elapsed_ms: float


@dataclass
class ConvergenceTrace:
    """Per-check rows of (iteration, matvecs, primal, dual, gap, wall time)."""

    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def last(self) -> TraceRow:
        if not self.rows:
            raise ValueError("empty trace")
        return self.rows[-1]


@dataclass
class Solution:
    """Solver output: the certified pair, the rounded plan, and run stats."""

    z: PrimalDualPoint | None
    plan: TransportPlan
    objective: float
    gap: float
    trace: ConvergenceTrace
    solver: str
    outer_iterations: int
    matvecs: int
    converged: bool
    config: dict


def termination_check(prob: Problem, w: PrimalDualPoint, epsilon: float, counter: MatvecCounter | None = None) -> bool:
    """True once the pair's duality gap certifies epsilon-suboptimality.

    The lower bound takes the minimum entry of the shifted cost vector (a
    maximum would be vacuous), and the loop must continue while the certified
    gap still exceeds epsilon.
    """
    return primal_value(prob, w.x, counter) <= dual_value(prob, w.y, counter) + epsilon


class _RunningMean:
    """Incremental average of iterates; no history is stored."""

    def __init__(self) -> None:
        self._x: np.ndarray | None = None
        self._y: np.ndarray | None = None
        self._count = 0

    def add(self, z: PrimalDualPoint) -> None:
        self._count += 1
        if self._x is None:
            self._x = z.x.astype(np.float64, copy=True)
            self._y = z.y.astype(np.float64, copy=True)
        else:
            self._x += (z.x - self._x) / self._count
            self._y += (z.y - self._y) / self._count

    @property
    def count(self) -> int:
        return self._count

    def point(self) -> PrimalDualPoint:
        if self._x is None:
            raise ValueError("no iterates to average")
        x = np.maximum(self._x, 0.0)
        x = x / x.sum()  # absorb accumulation drift; stays within 1e-12 of the mean
        return PrimalDualPoint(x, np.clip(self._y, -1.0, 1.0))


def averaged_iterate(points: Iterable[PrimalDualPoint]) -> PrimalDualPoint:
    """Arithmetic mean of both blocks, renormalised onto the simplex."""
    mean = _RunningMean()
    for z in points:
        mean.add(z)
    return mean.point()


def solve_dual_extrapolation(
    prob: Problem,
    config: SolverConfig,
    clock: Callable[[], float] | None = None,
    callback: Callable[[int, PrimalDualPoint, PrimalDualPoint], None] | None = None,
) -> Solution:
    """Run the accumulating extragradient scheme to an epsilon-certified plan."""
    return _solve_extragradient(prob, replace(config, variant=DUAL_EXTRAPOLATION), clock, callback)


def solve_mirror_prox(
    prob: Problem,
    config: SolverConfig,
    clock: Callable[[], float] | None = None,
    callback: Callable[[int, PrimalDualPoint, PrimalDualPoint], None] | None = None,
) -> Solution:
    """Run the locally re-centred extragradient scheme (experimental)."""
    return _solve_extragradient(prob, replace(config, variant=MIRROR_PROX), clock, callback)


def solve(prob: Problem, config: SolverConfig, clock=None, callback=None) -> Solution:
    """Dispatch on ``config.variant``."""
    return _solve_extragradient(prob, config, clock, callback)


def _config_dict(cfg: SolverConfig, max_outer: int, max_inner: int) -> dict:
    out = {
        "variant": cfg.variant,
        "epsilon": cfg.epsilon,
        "kappa": cfg.kappa,
        "step_scale": cfg.step_scale,
        "entropy_weight": cfg.entropy_weight,
        "max_outer": max_outer,
        "max_inner": max_inner,
        "gap_check_every": cfg.gap_check_every,
        "movement_tol": cfg.movement_tol,
        "denom_floor": cfg.denom_floor,
    }
    if cfg.variant == MIRROR_PROX:
        out["experimental"] = True
    return out


def _zero_cost_solution(prob: Problem, cfg: SolverConfig, elapsed_ms: float) -> Solution:
    # With an all-zero cost matrix every feasible plan is optimal and the
    # regularizer scale degenerates, so return the independent coupling.
    plan = TransportPlan(np.outer(prob.row_marginal, prob.col_marginal))
    z = PrimalDualPoint(plan.matrix.reshape(-1).copy(), np.zeros(2 * prob.n))
    trace = ConvergenceTrace([TraceRow(0, 0, 0.0, 0.0, 0.0, elapsed_ms)])
    return Solution(
        z=z,
        plan=plan,
        objective=0.0,
        gap=0.0,
        trace=trace,
        solver="dualex" if cfg.variant == DUAL_EXTRAPOLATION else "mirrorprox",
        outer_iterations=0,
        matvecs=0,
        converged=True,
        config=_config_dict(cfg, 0, 0),
    )


def _ensure_finite(state: DualState, w: PrimalDualPoint, t: int) -> None:
    if not state.is_finite():
        raise NumericalError(f"dual state became non-finite at outer iteration {t}")
    if not (np.all(np.isfinite(w.x)) and np.all(np.isfinite(w.y))):
        raise NumericalError(f"iterate became non-finite at outer iteration {t}")


def _solve_extragradient(
    prob: Problem,
    cfg: SolverConfig,
    clock: Callable[[], float] | None,
    callback: Callable[[int, PrimalDualPoint, PrimalDualPoint], None] | None,
) -> Solution:
    clock = clock or time.perf_counter
    start = clock()
    if prob.cost_max == 0.0:
        return _zero_cost_solution(prob, cfg, (clock() - start) * 1e3)

    solver_name = "dualex" if cfg.variant == DUAL_EXTRAPOLATION else "mirrorprox"
    reg = RegularizerConfig(entropy_weight=cfg.entropy_weight, scale=2.0 * prob.cost_max)
    max_outer = cfg.resolved_max_outer(prob)
    max_inner = cfg.resolved_max_inner(prob)
    am = AltMinConfig(max_inner=max_inner, movement_tol=cfg.movement_tol, denom_floor=cfg.denom_floor)
    counter = MatvecCounter()
    trace = ConvergenceTrace()

    m = prob.num_edges
    center = PrimalDualPoint(np.full(m, 1.0 / m), np.zeros(2 * prob.n))
    state = DualState.zeros(prob)
    warm = center
    current = center  # mirror-prox re-centring point
    mean = _RunningMean()
    lookahead = cfg.step_scale / cfg.kappa

    best_point: PrimalDualPoint | None = None
    best_primal = best_dual = math.nan
    best_gap = math.inf
    converged = False
    t = 0
    for t in range(1, max_outer + 1):
        if cfg.variant == DUAL_EXTRAPOLATION:
            z = approx_prox(prob, reg, am, state, warm, counter)
            gz = gradient_operator(prob, z, counter)
            shifted = DualState(state.sx + lookahead * gz.gx, state.sy + lookahead * gz.gy)
            w = approx_prox(prob, reg, am, shifted, z, counter)
            gw = gradient_operator(prob, w, counter)
            state = DualState(
                state.sx + 0.5 * lookahead * gw.gx,
                state.sy + 0.5 * lookahead * gw.gy,
            )
            warm = w
        else:
            # Both proximal steps are taken from the current iterate: subtract
            # its regularizer gradient so the minimisation is the local
            # divergence step rather than the accumulated one.
            rx, ry = regularizer_gradient(prob, reg, current, counter)
            gz = gradient_operator(prob, current, counter)
            w = approx_prox(
                prob, reg, am,
                DualState(lookahead * gz.gx - rx, lookahead * gz.gy - ry),
                current, counter,
            )
            gw = gradient_operator(prob, w, counter)
            current = approx_prox(
                prob, reg, am,
                DualState(lookahead * gw.gx - rx, lookahead * gw.gy - ry),
                w, counter,
            )
        mean.add(w)
        if callback is not None:
            callback(t, w, mean.point())
        if t % cfg.gap_check_every == 0 or t == max_outer:
            _ensure_finite(state, w, t)
            # Certify the half-iterate and the running average: the average
            # carries the worst-case guarantee and usually certifies first,
            # while the half-iterate can dip below epsilon early.
            p = primal_value(prob, w.x, counter)
            d = dual_value(prob, w.y, counter)
            gap = p - d
            if gap < best_gap:
                best_point, best_primal, best_dual, best_gap = w, p, d, gap
            avg = mean.point()
            p = primal_value(prob, avg.x, counter)
            d = dual_value(prob, avg.y, counter)
            gap = p - d
            if gap < best_gap:
                best_point, best_primal, best_dual, best_gap = avg, p, d, gap
            trace.append(
                TraceRow(t, counter.count, best_primal, best_dual, best_gap, (clock() - start) * 1e3)
            )
            if best_gap <= cfg.epsilon:
                converged = True
                break

    assert best_point is not None  # at least one check runs (t == max_outer)
    plan, _ = round_to_feasible(prob, best_point.x.reshape(prob.n, prob.n))
    solution = Solution(
        z=best_point,
        plan=plan,
        objective=transport_objective(prob, plan),
        gap=best_gap,
        trace=trace,
        solver=solver_name,
        outer_iterations=t,
        matvecs=counter.count,
        converged=converged,
        config=_config_dict(cfg, max_outer, max_inner),
    )
    if not converged:
        raise IterationLimitError(
            f"max_outer {max_outer} reached with gap {best_gap:.6g} > epsilon {cfg.epsilon:g}",
            solution,
        )
    return solution
