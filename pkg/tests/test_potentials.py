"""Potential, dual objectives, and their analytic relationships."""

import numpy as np
import pytest

from fishmarket.model import Allocation, Buyer, Family, Market, UnsupportedFamilyError, UtilityFunction
from fishmarket.potentials import (
    allocation_from_prices,
    dual_offset,
    eg_dual,
    eg_primal_objective,
    excess_demand,
    potential,
    subgradient_check,
)
from fishmarket.model import validate_allocation

from conftest import random_market, random_prices


def single_linear_market() -> Market:
    return Market(buyers=(Buyer(UtilityFunction(Family.LINEAR, [1.0]), 1.0),))


def symmetric_cd_market(n: int = 2) -> Market:
    u = UtilityFunction(Family.COBB_DOUGLAS, [0.5, 0.5])
    return Market(buyers=tuple(Buyer(u, 1.0) for _ in range(n)))


# -- excess demand ------------------------------------------------------------


def test_excess_demand_single_good():
    market = single_linear_market()
    np.testing.assert_allclose(excess_demand(market, [1.0]), [0.0])
    np.testing.assert_allclose(excess_demand(market, [2.0]), [-0.5])


def test_excess_demand_symmetric_equilibrium():
    market = symmetric_cd_market()
    np.testing.assert_allclose(excess_demand(market, [1.0, 1.0]), [0.0, 0.0], atol=1e-15)


# -- potential ----------------------------------------------------------------


def test_potential_single_good_values():
    market = single_linear_market()
    assert potential(market, [1.0]).value == 1.0
    assert abs(potential(market, [2.0]).value - (2.0 - np.log(2.0))) < 1e-15


def test_potential_subgradient_is_negative_excess():
    market = single_linear_market()
    ev = potential(market, [2.0])
    np.testing.assert_allclose(ev.subgradient, [0.5])
    np.testing.assert_allclose(ev.subgradient, -ev.excess)


def test_potential_budget_scaling_linearity():
    u = UtilityFunction(Family.COBB_DOUGLAS, [0.4, 0.6])
    p = [1.3, 0.8]
    lam = 3.0
    base = Market(buyers=(Buyer(u, 1.0),))
    scaled = Market(buyers=(Buyer(u, lam),))
    seller_term = sum(p)
    base_demand_term = seller_term - potential(base, p).value
    scaled_demand_term = seller_term - potential(scaled, p).value
    assert abs(scaled_demand_term - lam * base_demand_term) < 1e-12


# -- dual objective and the constant offset -----------------------------------


def test_eg_dual_one_buyer_zero_at_equilibrium():
    assert abs(eg_dual(single_linear_market(), [1.0])) < 1e-15


def test_offset_identity_random_markets(rng):
    for _ in range(50):
        market = random_market(rng, n=rng.integers(1, 5), m=3)
        offset = dual_offset(market)
        for _ in range(10):
            p = random_prices(rng, 3)
            value = potential(market, p).value
            gap = eg_dual(market, p) - value - offset
            assert abs(gap) < 1e-9 * (1.0 + abs(value))


def test_offset_is_minus_n_for_unit_budgets():
    market = symmetric_cd_market(n=3)
    assert abs(dual_offset(market) - (-3.0)) < 1e-15


# -- log-welfare objective ----------------------------------------------------


def test_primal_one_buyer():
    assert eg_primal_objective(single_linear_market(), Allocation([[1.0]])) == 0.0


def test_primal_symmetric_cd_split():
    market = symmetric_cd_market()
    alloc = Allocation([[0.5, 0.5], [0.5, 0.5]])
    # each buyer: u = sqrt(0.25) = 0.5
    assert abs(eg_primal_objective(market, alloc) - 2.0 * np.log(0.5)) < 1e-15


def test_primal_scaling_adds_budget_weighted_log():
    market = random_market(np.random.default_rng(7), n=3, m=2)
    base = np.abs(np.random.default_rng(8).normal(size=(3, 2))) + 0.1
    lam = 2.5
    v0 = eg_primal_objective(market, Allocation(base))
    v1 = eg_primal_objective(market, Allocation(lam * base))
    assert abs(v1 - (v0 + market.budgets.sum() * np.log(lam))) < 1e-10


def test_primal_rejects_zero_utility():
    market = symmetric_cd_market()
    with pytest.raises(ValueError, match="zero utility"):
        eg_primal_objective(market, Allocation([[1.0, 0.0], [0.5, 0.5]]))


# -- allocation from prices ---------------------------------------------------


def test_allocation_from_prices_single():
    alloc = allocation_from_prices(single_linear_market(), [1.0])
    np.testing.assert_allclose(alloc.matrix, [[1.0]])


def test_allocation_from_prices_symmetric():
    alloc = allocation_from_prices(symmetric_cd_market(), [1.0, 1.0])
    np.testing.assert_allclose(alloc.matrix, [[0.5, 0.5], [0.5, 0.5]])


def test_allocation_off_equilibrium_reports_negative_slack():
    market = single_linear_market()
    alloc = allocation_from_prices(market, [0.5])  # demand 2 > supply 1
    report = validate_allocation(market, alloc)
    assert not report.feasible
    assert report.slack[0] < 0


# -- finite-difference subgradient checks --------------------------------------


def test_subgradient_check_cobb_douglas():
    market = Market(buyers=(Buyer(UtilityFunction(Family.COBB_DOUGLAS, [0.5, 0.5]), 1.0),))
    assert subgradient_check(market, [1.0, 2.0]) < 1e-5


def test_subgradient_check_mixed_ces_market(rng):
    market = random_market(rng, n=3, m=3)
    assert subgradient_check(market, random_prices(rng, 3, lo=0.5, hi=3.0)) < 1e-5


def test_subgradient_check_single_good_leontief():
    market = Market(buyers=(Buyer(UtilityFunction(Family.LEONTIEF, [1.0]), 1.0),))
    # phi(p) = p - log p, -z = 1 - 1/p: central differences on a smooth 1-d curve
    assert subgradient_check(market, [2.0]) < 1e-10


def test_subgradient_check_rejects_linear_buyers():
    with pytest.raises(UnsupportedFamilyError):
        subgradient_check(single_linear_market(), [1.0])


# -- convexity and weak duality probes ----------------------------------------


def test_potential_convexity_probe(rng):
    for _ in range(30):
        market = random_market(rng, n=3, m=3)
        p = random_prices(rng, 3)
        q = random_prices(rng, 3)
        lam = float(rng.uniform(0.05, 0.95))
        mid = potential(market, lam * p + (1 - lam) * q).value
        chord = lam * potential(market, p).value + (1 - lam) * potential(market, q).value
        assert mid <= chord + 1e-9


def test_weak_duality_probe(rng):
    for _ in range(30):
        market = random_market(rng, n=3, m=3)
        # strictly positive feasible allocation: each good split across buyers
        shares = rng.dirichlet(np.ones(3), size=3).T  # columns sum to 1
        scale = rng.uniform(0.2, 1.0, size=3)
        alloc = Allocation(shares * (market.supply * scale)[None, :])
        assert validate_allocation(market, alloc).feasible
        primal = eg_primal_objective(market, alloc)
        p = random_prices(rng, 3)
        assert primal <= eg_dual(market, p) + 1e-8
