import numpy as np
import pytest

import otsaddle as ot
from otsaddle.solver import _RunningMean, _ensure_finite
from otsaddle.prox import DualState
from helpers import box_dual_from_oracle, random_problem


def zero_clock():
    return 0.0


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ot.SolverConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            ot.SolverConfig(epsilon=0.1, kappa=0.0)
        with pytest.raises(ValueError):
            ot.SolverConfig(epsilon=0.1, variant="unknown")
        with pytest.raises(ValueError):
            ot.SolverConfig(epsilon=0.1, gap_check_every=0)

    def test_default_outer_cap_follows_range_bound(self):
        p = ot.build_problem(np.eye(4), np.ones(4), np.ones(4))
        cfg = ot.SolverConfig(epsilon=0.1)
        theta = ot.regularizer_range_bound(p.cost_max, p.n)
        assert cfg.resolved_max_outer(p) == int(np.ceil(12.0 * theta / 0.1)) + 1

    def test_presets(self):
        provable = ot.preset("provable", epsilon=0.1, cost_max=3.0)
        assert provable.entropy_weight == 10.0
        assert provable.step_scale == 1.0
        assert provable.max_inner is None
        reasonable = ot.preset("reasonable", epsilon=0.1, cost_max=3.0)
        assert reasonable.entropy_weight == 4.0
        assert reasonable.step_scale == 1.0
        assert reasonable.max_inner == 8
        optimized = ot.preset("optimized", epsilon=0.1, cost_max=3.0)
        assert optimized.entropy_weight == 3.0
        assert optimized.step_scale == 3.0
        assert optimized.max_inner == 8
        with pytest.raises(ValueError, match="preset"):
            ot.preset("fastest", epsilon=0.1, cost_max=1.0)

    def test_preset_overrides(self):
        cfg = ot.preset("provable", epsilon=0.2, cost_max=1.0, max_outer=50, variant=ot.MIRROR_PROX)
        assert cfg.max_outer == 50
        assert cfg.variant == ot.MIRROR_PROX


class TestTerminationCheck:
    def test_single_edge_always_true(self):
        p = ot.build_problem([[5.0]], [1.0], [1.0])
        z = ot.PrimalDualPoint(np.ones(1), np.array([0.2, -0.7]))
        assert ot.termination_check(p, z, 1e-12)

    def test_hand_example_false(self):
        p = ot.build_problem([[0, 1], [1, 0]], [0.5, 0.5], [0.5, 0.5])
        z = ot.PrimalDualPoint(np.full(4, 0.25), np.zeros(4))
        assert not ot.termination_check(p, z, 0.1)

    def test_oracle_optimal_pair_passes(self):
        rng = np.random.Generator(np.random.PCG64(0))
        p = random_problem(rng, 5)
        result = ot.exact_oracle(p)
        z = ot.PrimalDualPoint(result.plan.matrix.reshape(-1), box_dual_from_oracle(p, result))
        assert ot.termination_check(p, z, 1e-6)


class TestAveragedIterate:
    def test_single_point_is_identity(self):
        z = ot.PrimalDualPoint(np.array([0.25, 0.75]), np.array([0.5, -0.5]))
        avg = ot.averaged_iterate([z])
        assert np.allclose(avg.x, z.x, atol=1e-15)
        assert np.allclose(avg.y, z.y, atol=1e-15)

    def test_two_points_give_midpoint(self):
        z1 = ot.PrimalDualPoint(np.array([1.0, 0.0]), np.array([1.0, -1.0]))
        z2 = ot.PrimalDualPoint(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
        avg = ot.averaged_iterate([z1, z2])
        assert np.allclose(avg.x, [0.5, 0.5], atol=1e-15)
        assert np.allclose(avg.y, [0.5, -0.5], atol=1e-15)

    def test_mean_of_valid_points_is_valid(self):
        rng = np.random.Generator(np.random.PCG64(1))
        points = [
            ot.PrimalDualPoint(rng.dirichlet(np.ones(9)), rng.uniform(-1, 1, 6))
            for _ in range(25)
        ]
        ot.averaged_iterate(points).validate()

    def test_empty_history_raises(self):
        with pytest.raises(ValueError, match="average"):
            ot.averaged_iterate([])

    def test_running_mean_matches_batch(self):
        rng = np.random.Generator(np.random.PCG64(2))
        points = [
            ot.PrimalDualPoint(rng.dirichlet(np.ones(4)), rng.uniform(-1, 1, 4))
            for _ in range(50)
        ]
        mean = _RunningMean()
        for z in points:
            mean.add(z)
        batch_x = np.mean([z.x for z in points], axis=0)
        batch_y = np.mean([z.y for z in points], axis=0)
        avg = mean.point()
        assert np.allclose(avg.x, batch_x / batch_x.sum(), atol=1e-12)
        assert np.allclose(avg.y, batch_y, atol=1e-12)


class TestDualExtrapolation:
    def test_single_edge_terminates_at_first_check(self):
        p = ot.build_problem([[5.0]], [1.0], [1.0])
        sol = ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=0.1))
        assert sol.converged
        assert sol.gap == pytest.approx(0.0, abs=1e-12)
        assert sol.outer_iterations == 10  # first periodic check
        assert sol.objective == pytest.approx(5.0, abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_instances_beat_oracle_bound(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        p = random_problem(rng, 6)
        eps = 0.05 * p.cost_max
        sol = ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=eps))
        opt = ot.exact_oracle(p).optimum
        assert sol.converged and sol.gap <= eps
        assert sol.objective <= opt + eps + 1e-12
        assert sol.plan.marginal_error(p) <= 1e-9

    def test_plan_is_feasible_and_consistent(self):
        rng = np.random.Generator(np.random.PCG64(3))
        p = random_problem(rng, 5)
        sol = ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=0.1))
        assert sol.objective == pytest.approx(ot.transport_objective(p, sol.plan), abs=1e-12)
        sol.z.validate()

    def test_trace_matvecs_strictly_increase(self):
        rng = np.random.Generator(np.random.PCG64(4))
        p = random_problem(rng, 5)
        sol = ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=0.05))
        counts = [row.matvecs for row in sol.trace]
        assert all(b > a for a, b in zip(counts, counts[1:]))
        assert len(sol.trace) >= 1

    def test_trace_gap_is_nonincreasing(self):
        rng = np.random.Generator(np.random.PCG64(5))
        p = random_problem(rng, 6)
        sol = ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=0.05))
        gaps = [row.gap for row in sol.trace]
        assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))

    def test_iterates_stay_valid(self):
        rng = np.random.Generator(np.random.PCG64(6))
        p = random_problem(rng, 4)

        def check(t, w, avg):
            w.validate()
            avg.validate()

        ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=0.2), callback=check)

    def test_deterministic_traces(self):
        rng = np.random.Generator(np.random.PCG64(7))
        p = random_problem(rng, 5)
        cfg = ot.SolverConfig(epsilon=0.1)
        a = ot.solve_dual_extrapolation(p, cfg, clock=zero_clock)
        b = ot.solve_dual_extrapolation(p, cfg, clock=zero_clock)
        assert a.trace.rows == b.trace.rows
        assert np.array_equal(a.plan.matrix, b.plan.matrix)
        assert a.gap == b.gap
        assert a.matvecs == b.matvecs

    def test_iteration_cap_carries_best_solution(self):
        rng = np.random.Generator(np.random.PCG64(8))
        p = random_problem(rng, 5)
        cfg = ot.SolverConfig(epsilon=1e-9, max_outer=5, gap_check_every=1)
        with pytest.raises(ot.IterationLimitError, match="max_outer") as info:
            ot.solve_dual_extrapolation(p, cfg)
        sol = info.value.solution
        assert not sol.converged
        assert sol.outer_iterations == 5
        assert np.isfinite(sol.gap)
        assert sol.plan.marginal_error(p) <= 1e-9

    def test_zero_cost_shortcut(self):
        p = ot.build_problem(np.zeros((3, 3)), [0.2, 0.3, 0.5], [0.1, 0.4, 0.5])
        sol = ot.solve_dual_extrapolation(p, ot.SolverConfig(epsilon=0.1))
        assert sol.converged
        assert sol.objective == 0.0
        assert sol.gap == 0.0
        assert np.allclose(
            sol.plan.matrix, np.outer(p.row_marginal, p.col_marginal), atol=1e-15
        )

    def test_gap_checks_cost_extra_counted_matvecs(self):
        # Same work, denser checks: the extra certifications must be counted.
        rng = np.random.Generator(np.random.PCG64(9))
        p = random_problem(rng, 4)
        cfg_dense = ot.SolverConfig(epsilon=1e-9, max_outer=20, gap_check_every=1)
        cfg_sparse = ot.SolverConfig(epsilon=1e-9, max_outer=20, gap_check_every=20)
        with pytest.raises(ot.IterationLimitError) as dense_info:
            ot.solve_dual_extrapolation(p, cfg_dense)
        with pytest.raises(ot.IterationLimitError) as sparse_info:
            ot.solve_dual_extrapolation(p, cfg_sparse)
        assert dense_info.value.solution.matvecs > sparse_info.value.solution.matvecs


class TestMirrorProx:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_random_instances_beat_oracle_bound(self, seed):
        rng = np.random.Generator(np.random.PCG64(100 + seed))
        p = random_problem(rng, 5)
        eps = 0.05 * p.cost_max
        sol = ot.solve_mirror_prox(p, ot.SolverConfig(epsilon=eps))
        opt = ot.exact_oracle(p).optimum
        assert sol.converged
        assert sol.objective <= opt + eps + 1e-12

    def test_single_edge_immediate(self):
        p = ot.build_problem([[2.0]], [1.0], [1.0])
        sol = ot.solve_mirror_prox(p, ot.SolverConfig(epsilon=0.1))
        assert sol.converged
        assert sol.gap == pytest.approx(0.0, abs=1e-12)

    def test_marked_experimental(self):
        rng = np.random.Generator(np.random.PCG64(102))
        p = random_problem(rng, 4)
        sol = ot.solve_mirror_prox(p, ot.SolverConfig(epsilon=0.3))
        assert sol.config["experimental"] is True
        assert sol.solver == "mirrorprox"

    def test_dispatch_by_variant(self):
        rng = np.random.Generator(np.random.PCG64(103))
        p = random_problem(rng, 4)
        sol = ot.solve(p, ot.SolverConfig(epsilon=0.3, variant=ot.MIRROR_PROX))
        assert sol.solver == "mirrorprox"


class TestNumericalGuards:
    def test_non_finite_state_aborts(self):
        p = ot.build_problem(np.ones((2, 2)), [1, 1], [1, 1])
        bad_state = DualState(np.array([np.nan, 0, 0, 0]), np.zeros(4))
        w = ot.PrimalDualPoint(np.full(4, 0.25), np.zeros(4))
        with pytest.raises(ot.NumericalError, match="non-finite"):
            _ensure_finite(bad_state, w, 3)

    def test_non_finite_iterate_aborts(self):
        p = ot.build_problem(np.ones((2, 2)), [1, 1], [1, 1])
        state = DualState.zeros(p)
        w = ot.PrimalDualPoint(np.array([np.inf, 0, 0, 0]), np.zeros(4))
        with pytest.raises(ot.NumericalError, match="iterate"):
            _ensure_finite(state, w, 3)
