"""Command-line front end: solve a market, run one tatonnement, run
batches and convergence grids, and run the verification suites.

Exit codes: 0 success, 1 verification failure, 2 usage or domain error.
All randomized commands take a --seed; nothing on the computation path
reads the clock, so identical invocations write identical CSV payload
rows (the leading '# meta' line carries the timestamp and is exempt).
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import experiments as xp
from .consumer import identity_suite, shephard_check
from .model import Family, MarketFormatError, load_market
from .oracle import brute_force_tiny, cobb_douglas_equilibrium, solve_by_descent
from .potentials import subgradient_check
from .tatonnement import (
    Kernel,
    KernelSpec,
    StepPolicy,
    run,
    verify_demand_bounds,
    verify_step_lemmas,
    write_trajectory_csv,
)

USAGE_ERROR, VERIFY_ERROR = 2, 1


def _meta() -> str:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return f"meta generated={stamp} tool=fishmarket-0.1.0"


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.6f}" for x in v) + "]"


def _parse_policy(args) -> StepPolicy:
    if args.gamma is not None:
        return StepPolicy.fixed(args.gamma)
    name = args.policy or "fixed:2"
    kind, _, param = name.partition(":")
    if kind == "fixed":
        return StepPolicy.fixed(float(param or 2.0))
    if kind == "informed":
        return StepPolicy.informed_mixed()
    if kind == "fivemax":
        return StepPolicy.five_times_max_demand()
    if kind == "naive":
        return StepPolicy.naive_horizon(int(param or 64))
    raise argparse.ArgumentTypeError(f"unknown policy {name!r}")


def _cmd_solve(args) -> int:
    market = load_market(args.market)
    if market.families() == {Family.COBB_DOUGLAS}:
        result = cobb_douglas_equilibrium(market)
    elif Family.LINEAR in market.families() or args.brute_force:
        result = brute_force_tiny(market)
    else:
        p0 = np.full(market.n_goods, market.budgets.sum() / market.supply.sum())
        result = solve_by_descent(market, p0)
    print(f"p* = {_fmt_vec(result.prices.values)}, residual {result.residual:.3g}")
    if result.boundary_goods:
        print(f"boundary goods (price at floor): {list(result.boundary_goods)}")
    if not result.target_met:
        print("warning: residual target not met; best-found prices reported")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "prices.csv")
        with open(path, "w") as fh:
            fh.write(f"# {_meta()}\n")
            fh.write("good,price\n")
            for j, price in enumerate(result.prices.values):
                fh.write(f"{j + 1},{price:.17g}\n")
        print(f"wrote {path}")
    return 0


def _cmd_simulate(args) -> int:
    market = load_market(args.market)
    if args.p0:
        p0 = np.array([float(x) for x in args.p0.split(",")])
    else:
        p0 = np.ones(market.n_goods)
    kernel = KernelSpec(kind=Kernel.ENTROPIC_KL if args.kernel == "entropic" else Kernel.EUCLIDEAN)
    traj = run(
        market,
        p0,
        kernel=kernel,
        policy=_parse_policy(args),
        max_iters=args.max_iters,
        tol=args.tol,
    )
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "trajectory.csv")
    write_trajectory_csv(traj, path, meta=_meta())
    print(f"status {traj.status.value} after {traj.steps} steps, "
          f"residual {traj.final_residual:.3g}; wrote {path}")
    return 0


def _base_config(args) -> xp.ExperimentConfig:
    return xp.ExperimentConfig(
        n_buyers=args.buyers,
        n_goods=args.goods,
        replications=args.replications,
        gamma=args.gamma if args.gamma is not None else 2.0,
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        families=xp.LINEAR_INCLUSIVE_FAMILIES if args.include_linear else xp.DEFAULT_FAMILIES,
    )


def _cmd_batch(args) -> int:
    config = _base_config(args)
    out = args.out or "out"
    batch = xp.run_batch(config, out_dir=out, jobs=args.jobs, write_trajectories=args.trajectories)
    print(f"convergence fraction {batch.convergence_fraction:.3f} "
          f"over {config.replications} replications; wrote {out}/summary.csv")
    return 0


def _cmd_heatmap(args) -> int:
    config = _base_config(args)
    elasticities = tuple(float(x) for x in args.e_values.split(","))
    gammas = tuple(float(x) for x in args.gamma_values.split(","))
    matrix = xp.heatmap_grid(config, elasticities, gammas, jobs=args.jobs)
    out = args.out or "out"
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "heatmap.csv")
    xp.write_heatmap_csv(matrix, elasticities, gammas, path, meta=_meta())
    print(f"wrote {path}")
    return 0


def _verify_identities(seed: int) -> tuple[bool, str]:
    worst = 0.0
    for rep in range(200):
        config = xp.ExperimentConfig(n_buyers=1, n_goods=4, seed=seed)
        market = xp.generate_market(config, np.random.SeedSequence((seed, rep)))
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep, 1)))
        p = rng.uniform(0.2, 5.0, size=market.n_goods)
        report = identity_suite(market.buyers[0].utility, p, market.buyers[0].budget)
        worst = max(worst, report.max_violation)
    return worst < 1e-8, f"max identity violation {worst:.3g} (tol 1e-8)"


def _verify_shephard(seed: int) -> tuple[bool, str]:
    worst = 0.0
    for rep in range(100):
        market = xp.generate_market(
            xp.ExperimentConfig(n_buyers=1, n_goods=4, seed=seed),
            np.random.SeedSequence((seed, rep)),
        )
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep, 1)))
        p = rng.uniform(0.2, 5.0, size=market.n_goods)
        worst = max(worst, shephard_check(market.buyers[0].utility, p, target=1.0))
    return worst < 1e-4, f"max expenditure-gradient error {worst:.3g} (tol 1e-4)"


def _verify_subgradient(seed: int) -> tuple[bool, str]:
    worst = 0.0
    for rep in range(100):
        market = xp.generate_market(
            xp.ExperimentConfig(n_buyers=3, n_goods=4, seed=seed),
            np.random.SeedSequence((seed, rep)),
        )
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep, 1)))
        p = rng.uniform(0.5, 4.0, size=market.n_goods)
        worst = max(worst, subgradient_check(market, p))
    return worst < 1e-4, f"max potential-gradient error {worst:.3g} (tol 1e-4)"


def _verify_bounds(seed: int) -> tuple[bool, str]:
    failures = []
    for rep in range(10):
        config = xp.ExperimentConfig(n_buyers=5, n_goods=4, seed=seed)
        market = xp.generate_market(config, np.random.SeedSequence((seed, rep)))
        p0 = xp.sample_initial_prices(config, (seed, rep))
        traj = run(market, p0, policy=StepPolicy.five_times_max_demand(),
                   max_iters=2000, record_buyer_demands=True)
        lemmas = verify_step_lemmas(traj)
        demand = verify_demand_bounds(traj, market)
        if not lemmas.all_hold:
            failures.append(f"rep {rep}: step inequalities violated")
        if not demand.applicable or demand.violations:
            failures.append(f"rep {rep}: demand bound violated")
    return not failures, "; ".join(failures) or "all step and demand bounds hold"


def _cmd_verify(args) -> int:
    suites = {
        "identities": _verify_identities,
        "shephard": _verify_shephard,
        "subgradient": _verify_subgradient,
        "bounds": _verify_bounds,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        ok, detail = suites[name](args.seed)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed |= not ok
    return VERIFY_ERROR if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fishmarket", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, market_required=True):
        if market_required:
            p.add_argument("--market", required=True, help="market-spec JSON path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--max-iters", type=int, default=20_000, dest="max_iters")

    p_solve = sub.add_parser("solve", help="equilibrium prices for a market file")
    common(p_solve)
    p_solve.add_argument("--brute-force", action="store_true", dest="brute_force")
    p_solve.set_defaults(fn=_cmd_solve)

    p_sim = sub.add_parser("simulate", help="one tatonnement run")
    common(p_sim)
    p_sim.add_argument("--kernel", choices=["entropic", "euclidean"], default="entropic")
    p_sim.add_argument("--gamma", type=float)
    p_sim.add_argument("--policy", help="fixed:G | informed | fivemax | naive:T")
    p_sim.add_argument("--p0", help="comma-separated initial prices")
    p_sim.set_defaults(fn=_cmd_simulate)

    for name, fn in (("batch", _cmd_batch), ("heatmap", _cmd_heatmap)):
        p_exp = sub.add_parser(name, help=f"{name} experiment")
        common(p_exp, market_required=False)
        p_exp.add_argument("--buyers", type=int, default=10)
        p_exp.add_argument("--goods", type=int, default=5)
        p_exp.add_argument("--replications", type=int, default=100 if name == "batch" else 20)
        p_exp.add_argument("--gamma", type=float, default=None)
        p_exp.add_argument("--include-linear", action="store_true", dest="include_linear")
        p_exp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        if name == "batch":
            p_exp.add_argument("--trajectories", action="store_true")
        else:
            p_exp.add_argument("--e-values", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
                               dest="e_values")
            p_exp.add_argument("--gamma-values", default="1,2,3,4,5,6,7,8,9",
                               dest="gamma_values")
        p_exp.set_defaults(fn=fn)

    p_ver = sub.add_parser("verify", help="run a property-verification suite")
    p_ver.add_argument("--suite", choices=["identities", "shephard", "subgradient", "bounds", "all"],
                       default="all")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (MarketFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
