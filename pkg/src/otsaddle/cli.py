"""Command-line interface: solve, bench, gen, oracle, and audit subcommands.

Exit codes: 0 on success (gap within epsilon, or the requested artifact was
produced), 2 when an iteration cap was reached first, 3 on input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import (
    SINKHORN_PRESETS,
    SinkhornConfig,
    exact_oracle,
    solve_sinkhorn,
)
from .instances import (
    cost_euclidean,
    cost_manhattan,
    gen_random_instance,
    image_to_distribution,
    load_matrix_csv,
    load_vector_csv,
    save_matrix_csv,
    save_vector_csv,
)
from .problem import PrimalDualPoint, Problem, build_problem
from .regularizer import (
    RegularizerConfig,
    area_convexity_quadratic_form,
    area_convexity_residual,
)
from .serialize import emit_plan, emit_solution, emit_trace
from .solver import (
    DUAL_EXTRAPOLATION,
    MIRROR_PROX,
    IterationLimitError,
    Solution,
    SolverConfig,
    preset,
    solve,
)

EXIT_OK = 0
EXIT_ITERATION_LIMIT = 2
EXIT_INPUT_ERROR = 3

SOLVER_NAMES = ("dualex", "mirrorprox", "sinkhorn")


def _parse_cost_spec(spec: str, cell_cap_args=None):
    for kind, builder in (("manhattan", cost_manhattan), ("euclidean", cost_euclidean)):
        prefix = kind + ":"
        if spec.startswith(prefix):
            dims = spec[len(prefix) :].lower().split("x")
            if len(dims) != 2:
                raise ValueError(f"expected {kind}:WxH, got {spec!r}")
            w, h = int(dims[0]), int(dims[1])
            return builder(w, h), (w, h)
    return load_matrix_csv(spec), None


def _resolve_instance(args) -> tuple[Problem, dict]:
    """Build the Problem from --images, --cost/--r/--c, or --n/--seed."""
    meta: dict = {}
    if getattr(args, "images", None):
        a_path, b_path = args.images
        noise = args.noise_floor
        downsample = args.downsample
        r = image_to_distribution(Path(a_path).read_text(), noise, downsample)
        c = image_to_distribution(Path(b_path).read_text(), noise, downsample)
        # Grid shape after optional downsampling; both images must agree.
        from .instances import parse_pgm

        img = parse_pgm(Path(a_path).read_text())
        if downsample:
            img = img[::2, ::2]
        h, w = img.shape
        if r.shape != c.shape:
            raise ValueError("images have different pixel counts")
        if args.cost is not None:
            C, dims = _parse_cost_spec(args.cost)
            if dims is not None and dims != (w, h):
                raise ValueError(f"cost grid {dims} does not match image grid {(w, h)}")
        else:
            C = cost_manhattan(w, h)
        if C.shape[0] != r.shape[0]:
            raise ValueError(f"cost is {C.shape[0]}x{C.shape[0]} but images give {r.shape[0]} pixels")
        meta.update(source="image-pair", images=[str(a_path), str(b_path)], grid=[w, h],
                    noise_floor=noise, downsample=downsample)
        return build_problem(C, r, c), meta
    if getattr(args, "cost", None):
        C, dims = _parse_cost_spec(args.cost)
        if args.r is None or args.c is None:
            raise ValueError("--cost without --images needs both --r and --c")
        r = load_vector_csv(args.r)
        c = load_vector_csv(args.c)
        meta.update(source="file", cost=args.cost, r=str(args.r), c=str(args.c))
        if dims is not None:
            meta["grid"] = list(dims)
        return build_problem(C, r, c), meta
    if getattr(args, "n", None):
        seed = args.seed if args.seed is not None else 0
        meta.update(source="random", n=args.n, seed=seed)
        return gen_random_instance(args.n, seed), meta
    raise ValueError("no instance given: use --images, --cost with --r/--c, or --n")


def _print_config(label: str, payload: dict) -> None:
    print(f"{label}: {json.dumps(payload, sort_keys=True)}")


def _run_one(prob: Problem, solver: str, preset_name: str, args, clock) -> tuple[Solution, int]:
    if solver == "sinkhorn":
        eta = args.eta if args.eta is not None else SINKHORN_PRESETS["theory-like"]
        cfg = SinkhornConfig(
            eta=eta,
            max_iter=args.max_outer if args.max_outer else 10000,
            marginal_tol=args.marginal_tol,
        )
        resolved = {"solver": "sinkhorn", "eta": cfg.eta, "max_iter": cfg.max_iter,
                    "marginal_tol": cfg.marginal_tol}
        _print_config("resolved configuration", resolved)
        sol = solve_sinkhorn(prob, cfg, clock=clock)
        return sol, EXIT_OK if sol.converged else EXIT_ITERATION_LIMIT
    variant = DUAL_EXTRAPOLATION if solver == "dualex" else MIRROR_PROX
    overrides: dict = {"variant": variant}
    if args.max_outer:
        overrides["max_outer"] = args.max_outer
    scfg = preset(preset_name, epsilon=args.epsilon, cost_max=prob.cost_max, **overrides)
    resolved = {
        "solver": solver,
        "preset": preset_name,
        "epsilon": scfg.epsilon,
        "kappa": scfg.kappa,
        "step_scale": scfg.step_scale,
        "entropy_weight": scfg.entropy_weight,
        "max_outer": scfg.resolved_max_outer(prob) if prob.cost_max > 0 else 0,
        "max_inner": scfg.resolved_max_inner(prob) if prob.cost_max > 0 else 0,
        "gap_check_every": scfg.gap_check_every,
        "movement_tol": scfg.movement_tol,
    }
    _print_config("resolved configuration", resolved)
    try:
        sol = solve(prob, scfg, clock=clock)
        code = EXIT_OK
    except IterationLimitError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        sol = exc.solution
        code = EXIT_ITERATION_LIMIT
    sol.config["preset"] = preset_name
    return sol, code


def _cmd_solve(args) -> int:
    prob, meta = _resolve_instance(args)
    clock = (lambda: 0.0) if args.deterministic else None
    sol, code = _run_one(prob, args.solver, args.preset, args, clock)
    sol.config["instance"] = meta
    if args.seed is not None:
        sol.config["seed"] = args.seed
    if args.trace:
        emit_trace(sol.trace, args.trace)
    if args.out:
        plan_path = emit_solution(sol, args.out)
        print(f"solution written to {args.out} (plan: {plan_path})")
    print(
        f"solver={sol.solver} objective={sol.objective:.12g} gap={sol.gap:.12g} "
        f"outer_iterations={sol.outer_iterations} matvecs={sol.matvecs} converged={sol.converged}"
    )
    return code


def _cmd_bench(args) -> int:
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    presets = [p.strip() for p in args.presets.split(",") if p.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    for s in solvers:
        if s not in SOLVER_NAMES:
            raise ValueError(f"unknown solver {s!r}")
    clock = (lambda: 0.0) if args.deterministic else None
    rows = ["solver,preset,seed,n,epsilon,converged,objective,gap,outer_iterations,matvecs,elapsed_ms"]
    worst = EXIT_OK
    for seed in seeds:
        if args.n and not (getattr(args, "images", None) or getattr(args, "cost", None)):
            prob = gen_random_instance(args.n, seed)
        else:
            prob, _ = _resolve_instance(args)
        for solver in solvers:
            solver_presets = presets if solver != "sinkhorn" else ["n/a"]
            for preset_name in solver_presets:
                sol, code = _run_one(prob, solver, preset_name if preset_name != "n/a" else "provable", args, clock)
                worst = max(worst, code)
                elapsed = sol.trace.last().elapsed_ms if len(sol.trace) else 0.0
                rows.append(
                    f"{solver},{preset_name},{seed},{prob.n},{args.epsilon},"
                    f"{int(sol.converged)},{sol.objective:.17g},{sol.gap:.17g},"
                    f"{sol.outer_iterations},{sol.matvecs},{elapsed:.17g}"
                )
    Path(args.out).write_text("\n".join(rows) + "\n")
    print(f"bench results written to {args.out}")
    return worst


def _cmd_gen(args) -> int:
    prob = gen_random_instance(args.n, args.seed)
    prefix = Path(args.out_prefix)
    cost_path = prefix.with_suffix(".cost.csv")
    r_path = prefix.with_suffix(".r.csv")
    c_path = prefix.with_suffix(".c.csv")
    save_matrix_csv(prob.cost_matrix(), cost_path)
    save_vector_csv(prob.row_marginal, r_path)
    save_vector_csv(prob.col_marginal, c_path)
    print(f"instance written to {cost_path}, {r_path}, {c_path}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    prob, meta = _resolve_instance(args)
    _print_config("resolved configuration", {"command": "oracle", "instance": meta})
    result = exact_oracle(prob)
    if args.out:
        emit_plan(result.plan, args.out)
        print(f"optimal plan written to {args.out}")
    print(f"optimum={result.optimum:.17g} basis_cells={len(result.vertex)}")
    return EXIT_OK


def _cmd_audit(args) -> int:
    prob, meta = _resolve_instance(args)
    cfg = RegularizerConfig(entropy_weight=args.entropy_weight, scale=2.0 * prob.cost_max)
    _print_config(
        "resolved configuration",
        {
            "command": "audit",
            "entropy_weight": args.entropy_weight,
            "kappa": args.kappa,
            "samples": args.samples,
            "instance": meta,
        },
    )
    rng = np.random.Generator(np.random.PCG64(args.seed if args.seed is not None else 0))
    m, nv = prob.num_edges, 2 * prob.n

    def point():
        return PrimalDualPoint(rng.dirichlet(np.ones(m)), rng.uniform(-1.0, 1.0, nv))

    worst_residual = np.inf
    for _ in range(args.samples):
        worst_residual = min(
            worst_residual,
            area_convexity_residual(prob, cfg, args.kappa, point(), point(), point()),
        )
    worst_form = np.inf
    for _ in range(args.samples):
        z = point()
        worst_form = min(
            worst_form,
            area_convexity_quadratic_form(
                prob, z,
                rng.standard_normal(m), rng.standard_normal(nv),
                rng.standard_normal(m), rng.standard_normal(nv),
            ),
        )
    print(f"worst area-convexity residual over {args.samples} triples: {worst_residual:.6g}")
    print(f"worst quadratic-form value over {args.samples} probes: {worst_form:.6g}")
    print("note: probes report observed minima only; they certify nothing beyond the samples")
    return EXIT_OK


def _add_instance_flags(p: argparse.ArgumentParser, with_random: bool = True) -> None:
    p.add_argument("--cost", help="cost matrix: CSV path, manhattan:WxH, or euclidean:WxH")
    p.add_argument("--r", help="row marginal CSV")
    p.add_argument("--c", help="column marginal CSV")
    p.add_argument("--images", nargs=2, metavar=("A.pgm", "B.pgm"),
                   help="derive marginals from two plain PGM images")
    p.add_argument("--noise-floor", type=float, default=1e-6,
                   help="per-pixel mass added before normalising image histograms")
    p.add_argument("--downsample", action="store_true",
                   help="skip every other pixel in both directions")
    if with_random:
        p.add_argument("--n", type=int, help="random instance size")
    p.add_argument("--seed", type=int, default=None, help="PRNG seed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otsaddle",
                                     description="optimal transport solvers and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance")
    _add_instance_flags(p_solve)
    p_solve.add_argument("--epsilon", type=float, default=0.1, help="additive target")
    p_solve.add_argument("--solver", choices=SOLVER_NAMES, default="dualex")
    p_solve.add_argument("--preset", choices=("provable", "reasonable", "optimized"),
                         default="provable")
    p_solve.add_argument("--eta", type=float, default=None,
                         help="sinkhorn entropic strength (default 70)")
    p_solve.add_argument("--marginal-tol", type=float, default=1e-6,
                         help="sinkhorn l1 marginal stop threshold")
    p_solve.add_argument("--max-outer", type=int, default=None)
    p_solve.add_argument("--trace", help="write the convergence trace CSV here")
    p_solve.add_argument("--out", help="write the solution JSON here (plan CSV alongside)")
    p_solve.add_argument("--deterministic", action="store_true",
                         help="zero all wall-time columns for byte-reproducible outputs")
    p_solve.set_defaults(func=_cmd_solve)

    p_bench = sub.add_parser("bench", help="run a solver/preset/seed matrix")
    _add_instance_flags(p_bench)
    p_bench.add_argument("--solvers", default="dualex", help="comma-separated solver list")
    p_bench.add_argument("--presets", default="provable", help="comma-separated preset list")
    p_bench.add_argument("--seeds", default="0", help="comma-separated seed list")
    p_bench.add_argument("--epsilon", type=float, default=0.1)
    p_bench.add_argument("--eta", type=float, default=None)
    p_bench.add_argument("--marginal-tol", type=float, default=1e-6)
    p_bench.add_argument("--max-outer", type=int, default=None)
    p_bench.add_argument("--out", required=True, help="combined results CSV")
    p_bench.add_argument("--deterministic", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser("gen", help="write a random instance to CSV files")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out-prefix", required=True,
                       help="files <prefix>.cost.csv, <prefix>.r.csv, <prefix>.c.csv")
    p_gen.set_defaults(func=_cmd_gen)

    p_oracle = sub.add_parser("oracle", help="exact solve (n <= 16)")
    _add_instance_flags(p_oracle)
    p_oracle.add_argument("--out", help="write the optimal plan CSV here")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_audit = sub.add_parser("audit", help="probe a regularizer configuration")
    _add_instance_flags(p_audit)
    p_audit.add_argument("--entropy-weight", type=float, default=10.0)
    p_audit.add_argument("--kappa", type=float, default=3.0)
    p_audit.add_argument("--samples", type=int, default=1000)
    p_audit.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
