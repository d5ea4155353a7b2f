"""Seeded random-market generation, batch runs, rate fits, and the
elasticity x step-size convergence grid.

Markets follow the reference recipe at desk scale: valuations, budgets
and initial prices drawn uniformly from [2, 3], buyers assigned a family
uniformly at random, and CES curvature drawn from a two-branch law (half
mild substitutes in [1/4, 3/4], half complements in [-101, -1]) that caps
the market's demand elasticity at 4.  Replication seeds are derived from
the master seed by counter, so batches are deterministic regardless of
how the worker pool schedules them.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import Buyer, Family, Market, UtilityFunction
from .tatonnement import (
    KernelSpec,
    StepPolicy,
    Trajectory,
    nonconverged,
    run,
    write_trajectory_csv,
)

DEFAULT_FAMILIES = (Family.CES, Family.COBB_DOUGLAS, Family.LEONTIEF)
LINEAR_INCLUSIVE_FAMILIES = DEFAULT_FAMILIES + (Family.LINEAR,)


@dataclass(frozen=True)
class ExperimentConfig:
    n_buyers: int = 10
    n_goods: int = 5
    value_range: tuple[float, float] = (2.0, 3.0)
    budget_range: tuple[float, float] = (2.0, 3.0)
    price_range: tuple[float, float] = (2.0, 3.0)
    families: tuple[Family, ...] = DEFAULT_FAMILIES
    # CES curvature: with probability rho_substitute_prob uniform on the
    # substitute branch, otherwise uniform on the complement branch
    rho_substitute_range: tuple[float, float] = (0.25, 0.75)
    rho_complement_range: tuple[float, float] = (-101.0, -1.0)
    rho_substitute_prob: float = 0.5
    fixed_rho: float | None = None  # overrides the law (uniform-rho grids)
    gamma: float = 2.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    max_iters: int = 20_000
    tol: float = 1e-6
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("value_range", "budget_range", "price_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must have positive width")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.families:
            raise ValueError("at least one family is required")


def _draw_rho(config: ExperimentConfig, rng: np.random.Generator) -> float:
    if config.fixed_rho is not None:
        return config.fixed_rho
    if rng.random() < config.rho_substitute_prob:
        return float(rng.uniform(*config.rho_substitute_range))
    lo, hi = config.rho_complement_range
    return float(rng.uniform(min(lo, hi), max(lo, hi)))


def generate_market(config: ExperimentConfig, seed) -> Market:
    """Deterministic market draw for the given seed."""
    rng = np.random.default_rng(seed)
    buyers = []
    for _ in range(config.n_buyers):
        family = config.families[rng.integers(len(config.families))]
        valuations = rng.uniform(*config.value_range, size=config.n_goods)
        rho = _draw_rho(config, rng) if family is Family.CES else None
        buyers.append(
            Buyer(
                utility=UtilityFunction(family=family, valuations=valuations, rho=rho),
                budget=float(rng.uniform(*config.budget_range)),
            )
        )
    return Market(buyers=tuple(buyers))


def sample_initial_prices(config: ExperimentConfig, seed) -> np.ndarray:
    """Initial prices use an offset seed stream so they are independent of
    the market draw but still reproducible."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(id_entropy(seed), 0x9E37)))
    return rng.uniform(*config.price_range, size=config.n_goods)


def id_entropy(seed) -> int:
    """Collapse int / tuple seeds into one integer for SeedSequence mixing."""
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(np.random.SeedSequence(entropy=tuple(seed)).generate_state(1)[0])


def market_elasticity_bound(market: Market) -> float:
    """Largest per-buyer substitution elasticity: sigma for CES buyers, the
    conventional 1 / 0 / inf for Cobb-Douglas / Leontief / linear."""
    return max(b.utility.sigma for b in market.buyers)


@dataclass(frozen=True)
class RunSummary:
    replication: int
    converged: bool
    iterations: int
    residual: float
    alpha: float | None
    constant: float | None
    elasticity_bound: float
    gamma: float


@dataclass(frozen=True)
class BatchSummary:
    runs: tuple[RunSummary, ...]

    @property
    def convergence_fraction(self) -> float:
        return sum(r.converged for r in self.runs) / len(self.runs)


def fit_rate(traj: Trajectory, phi_star: float, min_points: int = 10):
    """Least-squares fit of log(phi(p^t) - phi_star) = log C - alpha log t
    over the tail half of the pre-convergence window (the window ends at
    the first step with ||z||_inf < 10 tol, before round-off swamps the
    gap).  Returns (alpha, C), or None with fewer than min_points usable
    points."""
    residuals = np.abs(traj.excess).max(axis=1)
    below = np.nonzero(residuals < 10.0 * traj.tol)[0]
    end = int(below[0]) if below.size else traj.prices.shape[0]
    start = max(1, end // 2)
    t = np.arange(start, end)
    gap = traj.potential[start:end] - phi_star
    keep = gap > 0
    t, gap = t[keep], gap[keep]
    if t.size < min_points:
        return None
    slope, intercept = np.polyfit(np.log(t), np.log(gap), 1)
    return float(-slope), float(np.exp(intercept))


def _run_one(config: ExperimentConfig, rep: int) -> tuple[RunSummary, Trajectory]:
    seed = np.random.SeedSequence(entropy=(config.seed, rep))
    market = generate_market(config, seed)
    p0 = sample_initial_prices(config, (config.seed, rep))
    traj = run(
        market,
        p0,
        kernel=config.kernel,
        policy=StepPolicy.fixed(config.gamma),
        max_iters=config.max_iters,
        tol=config.tol,
    )
    converged = not nonconverged(traj) and traj.final_residual < traj.tol
    alpha = constant = None
    if converged:
        fit = fit_rate(traj, phi_star=float(traj.potential.min()))
        if fit is not None:
            alpha, constant = fit
    summary = RunSummary(
        replication=rep,
        converged=converged,
        iterations=traj.steps,
        residual=traj.final_residual,
        alpha=alpha,
        constant=constant,
        elasticity_bound=market_elasticity_bound(market),
        gamma=config.gamma,
    )
    return summary, traj


def _run_one_worker(args) -> RunSummary:
    """Pool worker: run one replication, write its trajectory if asked.
    Filenames are unique per replication, so workers never collide."""
    config, rep, out_dir = args
    summary, traj = _run_one(config, rep)
    if out_dir is not None:
        write_trajectory_csv(traj, os.path.join(out_dir, f"run_{rep:05d}.csv"))
    return summary


def run_batch(
    config: ExperimentConfig,
    out_dir=None,
    jobs: int = 1,
    write_trajectories: bool = False,
) -> BatchSummary:
    """Run all replications (in a worker pool when jobs > 1), classify each,
    and optionally write summary.csv plus per-run trajectory CSVs."""
    traj_dir = out_dir if (out_dir is not None and write_trajectories) else None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    tasks = [(config, rep, traj_dir) for rep in range(config.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_one_worker, tasks))
    else:
        summaries = [_run_one_worker(task) for task in tasks]
    batch = BatchSummary(runs=tuple(summaries))
    if out_dir is not None:
        write_summary_csv(batch, os.path.join(out_dir, "summary.csv"))
    return batch


def heatmap_grid(
    base: ExperimentConfig,
    elasticities: tuple[float, ...] = tuple(np.round(np.arange(0.1, 1.0, 0.1), 1)),
    gammas: tuple[float, ...] = tuple(float(g) for g in range(1, 10)),
    jobs: int = 1,
) -> np.ndarray:
    """Convergence fraction per (E, gamma) cell.

    Each cell uses a pure-CES market where every buyer has the same
    substitution elasticity sigma = E (so rho = 1 - 1/E; E < 1 makes all
    goods gross complements).  Returns a matrix with one row per E value.
    """
    matrix = np.zeros((len(elasticities), len(gammas)))
    for i, e_value in enumerate(elasticities):
        for k, gamma in enumerate(gammas):
            cell = replace(
                base,
                families=(Family.CES,),
                fixed_rho=1.0 - 1.0 / float(e_value),
                gamma=float(gamma),
                seed=id_entropy((base.seed, i, k)),
            )
            matrix[i, k] = run_batch(cell, jobs=jobs).convergence_fraction
    return matrix


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_summary_csv(batch: BatchSummary, path, meta: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        fh.write("seed,converged,iters,residual,alpha,C,E,gamma\n")
        for r in batch.runs:
            fh.write(
                ",".join(
                    [
                        str(r.replication),
                        str(int(r.converged)),
                        str(r.iterations),
                        _fmt(r.residual),
                        _fmt(r.alpha) if r.alpha is not None else "",
                        _fmt(r.constant) if r.constant is not None else "",
                        _fmt(r.elasticity_bound),
                        _fmt(r.gamma),
                    ]
                )
                + "\n"
            )


def write_heatmap_csv(matrix: np.ndarray, elasticities, gammas, path, meta: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        fh.write("E," + ",".join(_fmt(g) for g in gammas) + "\n")
        for e_value, row in zip(elasticities, matrix):
            fh.write(_fmt(e_value) + "," + ",".join(_fmt(x) for x in row) + "\n")
