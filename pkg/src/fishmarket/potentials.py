"""Price-space objectives whose minimizers are market equilibria.

The central object is the convex potential

    phi(p) = sum_j s_j p_j - sum_i b_i log e_i(p, 1),

whose subgradient at p is the negative excess demand -z(p).  The classic
budget-weighted log-welfare objective and its price-space dual

    dual(p) = sum_j s_j p_j + sum_i [b_i log v_i(p, b_i) - b_i]

share minimizers with phi; the two differ by the price-independent
constant sum_i (b_i log b_i - b_i).  The seller term is supply-weighted so
the subgradient identity survives non-unit supplies (it reduces to the
plain price sum when supply is all ones).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consumer import (
    TieBreak,
    _budget_shares_raw,
    _log_unit_expenditure_raw,
    log_unit_expenditure,
)
from .model import (
    Allocation,
    Family,
    Market,
    UnsupportedFamilyError,
    as_prices,
)


@dataclass(frozen=True)
class PotentialEval:
    """Potential value at p, with its subgradient (= -excess) and excess."""

    value: float
    subgradient: np.ndarray
    excess: np.ndarray


def _aggregate_demand_raw(market: Market, p: np.ndarray, tie_break: TieBreak) -> np.ndarray:
    total = np.zeros(market.n_goods)
    for buyer in market.buyers:
        total += buyer.budget * _budget_shares_raw(buyer.utility, p, tie_break)
    return total / p


def aggregate_demand(market: Market, p, tie_break: TieBreak = TieBreak.LOWEST_INDEX) -> np.ndarray:
    return _aggregate_demand_raw(market, as_prices(p).values, tie_break)


def excess_demand(market: Market, p, tie_break: TieBreak = TieBreak.LOWEST_INDEX) -> np.ndarray:
    """z(p) = aggregate Marshallian demand minus supply."""
    return aggregate_demand(market, p, tie_break) - market.supply


def _potential_raw(market: Market, p: np.ndarray, tie_break: TieBreak) -> PotentialEval:
    demand_term = 0.0
    for buyer in market.buyers:
        log_e = _log_unit_expenditure_raw(buyer.utility, p)
        if not np.isfinite(log_e):
            raise ValueError("degenerate buyer: zero unit expenditure")
        demand_term += buyer.budget * log_e
    value = float(market.supply @ p) - demand_term
    z = _aggregate_demand_raw(market, p, tie_break) - market.supply
    return PotentialEval(value=value, subgradient=-z, excess=z)


def potential(market: Market, p, tie_break: TieBreak = TieBreak.LOWEST_INDEX) -> PotentialEval:
    return _potential_raw(market, as_prices(p).values, tie_break)


def eg_dual(market: Market, p) -> float:
    """Price-space dual of the budget-weighted log-welfare program."""
    p = as_prices(p).values
    total = float(market.supply @ p)
    for buyer in market.buyers:
        # v(p, b) = b * v(p, 1) = b / e(p, 1)
        log_v = np.log(buyer.budget) - log_unit_expenditure(buyer.utility, p)
        total += buyer.budget * float(log_v) - buyer.budget
    return total


def eg_primal_objective(market: Market, alloc: Allocation) -> float:
    """Budget-weighted log utilities sum_i b_i log u_i(x_i)."""
    x = alloc.matrix
    if x.shape != (market.n_buyers, market.n_goods):
        raise ValueError("allocation shape does not match market")
    total = 0.0
    for i, buyer in enumerate(market.buyers):
        ui = buyer.utility.value(x[i])
        if ui <= 0:
            raise ValueError(f"buyer {i} has zero utility; log-welfare undefined")
        total += buyer.budget * float(np.log(ui))
    return total


def allocation_from_prices(
    market: Market, p, tie_break: TieBreak = TieBreak.LOWEST_INDEX
) -> Allocation:
    """Each buyer's Marshallian demand, stacked; clears the market at p*."""
    p = as_prices(p).values
    rows = [
        buyer.budget * _budget_shares_raw(buyer.utility, p, tie_break) / p
        for buyer in market.buyers
    ]
    return Allocation(matrix=np.stack(rows))


def dual_offset(market: Market) -> float:
    """The constant eg_dual(p) - potential(p): sum_i (b_i log b_i - b_i)."""
    b = market.budgets
    return float(np.sum(b * np.log(b) - b))


def subgradient_check(market: Market, p, h: float = 1e-5) -> float:
    """Max relative gap between the central-difference gradient of the
    potential value and -z(p), over coordinates.

    Requires every buyer strictly concave so that the potential is
    differentiable (linear buyers give it kinks).
    """
    if Family.LINEAR in market.families():
        raise UnsupportedFamilyError(
            "potential has a set-valued subdifferential with linear buyers"
        )
    p = as_prices(p).values
    z = excess_demand(market, p)
    worst = 0.0
    for j in range(p.size):
        step = h * p[j]
        hi = p.copy()
        lo = p.copy()
        hi[j] += step
        lo[j] -= step
        deriv = (potential(market, hi).value - potential(market, lo).value) / (2.0 * step)
        worst = max(worst, abs(deriv - (-z[j])) / max(abs(z[j]), 1.0))
    return worst
