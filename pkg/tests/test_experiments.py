"""Market generation, batch harness, rate fitting, and the E x gamma grid."""

import numpy as np

from fishmarket.experiments import (
    DEFAULT_FAMILIES,
    LINEAR_INCLUSIVE_FAMILIES,
    ExperimentConfig,
    fit_rate,
    generate_market,
    heatmap_grid,
    market_elasticity_bound,
    run_batch,
    sample_initial_prices,
    write_heatmap_csv,
)
from fishmarket.model import Family
from fishmarket.tatonnement import KernelSpec, Status, Trajectory


def synthetic_trajectory(gaps: np.ndarray, phi_star: float = 0.0) -> Trajectory:
    """A trajectory whose potential column carries the given gap sequence and
    whose excess stays large enough to keep the whole range in the fit window."""
    steps = gaps.size
    ones = np.ones((steps, 1))
    return Trajectory(
        prices=ones,
        excess=ones,  # residual 1 everywhere: never under 10 * tol
        potential=phi_star + gaps,
        gamma=np.full(steps, 2.0),
        max_rel_dp=np.zeros(steps),
        status=Status.MAX_ITERS,
        tol=1e-6,
        kernel=KernelSpec(),
    )


# -- generation ----------------------------------------------------------------


def test_generate_market_deterministic():
    config = ExperimentConfig(seed=3)
    m1 = generate_market(config, 17)
    m2 = generate_market(config, 17)
    assert m1.n_buyers == config.n_buyers
    for b1, b2 in zip(m1.buyers, m2.buyers):
        assert b1.utility.family is b2.utility.family
        np.testing.assert_array_equal(b1.utility.valuations, b2.utility.valuations)
        assert b1.utility.rho == b2.utility.rho
        assert b1.budget == b2.budget
    np.testing.assert_array_equal(
        sample_initial_prices(config, 17), sample_initial_prices(config, 17)
    )


def test_generated_values_in_ranges():
    config = ExperimentConfig(seed=1)
    market = generate_market(config, 5)
    for buyer in market.buyers:
        if buyer.utility.family is not Family.COBB_DOUGLAS:  # those are normalized
            assert np.all(buyer.utility.valuations >= 2.0)
            assert np.all(buyer.utility.valuations <= 3.0)
        assert 2.0 <= buyer.budget <= 3.0


def test_rho_branch_frequency():
    config = ExperimentConfig(n_buyers=1, families=(Family.CES,), seed=11)
    draws = np.array(
        [generate_market(config, k).buyers[0].utility.rho for k in range(10_000)]
    )
    substitute_fraction = np.mean(draws > 0)
    assert abs(substitute_fraction - 0.5) < 0.02
    assert np.all((draws <= 0.75) | (draws >= -101.0))


def test_bounded_elasticity_mix_caps_sigma():
    config = ExperimentConfig(seed=2)
    for k in range(50):
        market = generate_market(config, k)
        assert market_elasticity_bound(market) <= 4.0


def test_linear_inclusive_mix_reaches_linear():
    config = ExperimentConfig(families=LINEAR_INCLUSIVE_FAMILIES, seed=4)
    families = set()
    for k in range(30):
        families |= generate_market(config, k).families()
    assert Family.LINEAR in families
    assert families >= set(DEFAULT_FAMILIES)


# -- rate fitting ---------------------------------------------------------------


def test_fit_rate_recovers_quadratic_gap():
    t = np.arange(0, 400)
    gaps = np.empty_like(t, dtype=float)
    gaps[0] = 10.0
    gaps[1:] = 3.0 / t[1:] ** 2
    alpha, constant = fit_rate(synthetic_trajectory(gaps), phi_star=0.0)
    assert abs(alpha - 2.0) < 0.01
    assert abs(constant - 3.0) < 0.05


def test_fit_rate_recovers_linear_gap():
    t = np.arange(0, 400)
    gaps = np.empty_like(t, dtype=float)
    gaps[0] = 10.0
    gaps[1:] = 0.7 / t[1:]
    alpha, _ = fit_rate(synthetic_trajectory(gaps), phi_star=0.0)
    assert abs(alpha - 1.0) < 0.01


def test_fit_rate_needs_enough_points():
    gaps = np.array([1.0, 0.5, 0.25, 0.125])
    assert fit_rate(synthetic_trajectory(gaps), phi_star=0.0) is None


# -- batches ----------------------------------------------------------------------


def test_small_batch_runs_and_writes(tmp_path):
    config = ExperimentConfig(n_buyers=4, n_goods=3, replications=6, seed=9, max_iters=3000)
    batch = run_batch(config, out_dir=tmp_path, write_trajectories=True)
    assert 0.0 <= batch.convergence_fraction <= 1.0
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "seed,converged,iters,residual,alpha,C,E,gamma"
    assert len(summary) == 7
    assert sorted(p.name for p in tmp_path.glob("run_*.csv")) == [
        f"run_{k:05d}.csv" for k in range(6)
    ]


def test_batch_deterministic_across_pool_sizes(tmp_path):
    config = ExperimentConfig(n_buyers=3, n_goods=3, replications=4, seed=5, max_iters=2000)
    serial = run_batch(config, out_dir=tmp_path / "serial")
    pooled = run_batch(config, out_dir=tmp_path / "pooled", jobs=2)
    assert serial == pooled
    s = (tmp_path / "serial" / "summary.csv").read_text()
    p = (tmp_path / "pooled" / "summary.csv").read_text()
    assert s == p


def test_converged_runs_clear_market():
    from fishmarket.potentials import allocation_from_prices
    from fishmarket.model import validate_allocation
    from fishmarket.experiments import _run_one

    config = ExperimentConfig(n_buyers=4, n_goods=3, replications=1, seed=21)
    summary, traj = _run_one(config, 0)
    assert summary.converged
    market = generate_market(config, np.random.SeedSequence(entropy=(config.seed, 0)))
    alloc = allocation_from_prices(market, traj.final_prices)
    slack = validate_allocation(market, alloc).slack
    assert np.max(np.abs(slack)) < config.tol


# -- heatmap ----------------------------------------------------------------------


def test_heatmap_tiny_grid(tmp_path):
    base = ExperimentConfig(n_buyers=4, n_goods=3, replications=3, seed=13, max_iters=3000)
    elasticities, gammas = (0.2, 0.8), (2.0, 6.0)
    matrix = heatmap_grid(base, elasticities, gammas)
    assert matrix.shape == (2, 2)
    assert np.all((matrix >= 0) & (matrix <= 1))
    path = tmp_path / "heatmap.csv"
    write_heatmap_csv(matrix, elasticities, gammas, path, meta="t")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "E,2,6"
    assert len(lines) == 4


def test_heatmap_empty_grid():
    base = ExperimentConfig(replications=1, seed=0)
    matrix = heatmap_grid(base, elasticities=(), gammas=())
    assert matrix.shape == (0, 0)
