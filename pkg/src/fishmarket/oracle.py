"""Reference equilibrium prices for gap measurement.

Three routes with overlapping domains that must agree where they meet:
a closed form for all-Cobb-Douglas markets, a long entropic descent with
a decaying step and a derivative-based polish for strictly concave
markets, and a grid-plus-refine search over the price simplex for tiny
instances (m <= 3), which also covers linear buyers.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import Allocation, Family, Market, PriceVector, UnsupportedFamilyError
from .potentials import allocation_from_prices, excess_demand, potential
from .tatonnement import StepPolicy, compute_gamma

BOUNDARY_PRICE = 1e-9


class Method(enum.Enum):
    CLOSED_FORM = "closed_form"
    LONG_RUN_DESCENT = "long_run_descent"
    BRUTE_FORCE = "brute_force"


@dataclass(frozen=True)
class EquilibriumResult:
    prices: PriceVector
    allocation: Allocation
    residual: float
    method: Method
    target_met: bool = True
    boundary_goods: tuple[int, ...] = ()


def _finish(market: Market, p: np.ndarray, method: Method, target: float) -> EquilibriumResult:
    residual = float(np.abs(excess_demand(market, p)).max())
    pv = PriceVector(p)
    return EquilibriumResult(
        prices=pv,
        allocation=allocation_from_prices(market, pv),
        residual=residual,
        method=method,
        target_met=residual < target,
        boundary_goods=tuple(int(j) for j in np.nonzero(p <= 10 * BOUNDARY_PRICE)[0]),
    )


def cobb_douglas_equilibrium(market: Market) -> EquilibriumResult:
    """p*_j = sum_i b_i a_ij / s_j: each good's price collects the budget
    shares spent on it, since Cobb-Douglas buyers spend fixed fractions."""
    if market.families() != {Family.COBB_DOUGLAS}:
        raise UnsupportedFamilyError("closed form requires all Cobb-Douglas buyers")
    weights = np.stack([b.utility.valuations for b in market.buyers])
    p = market.budgets @ weights / market.supply
    return _finish(market, p, Method.CLOSED_FORM, target=1e-12)


def _newton_polish(market: Market, p: np.ndarray, iters: int = 40, fd: float = 1e-6) -> np.ndarray:
    """Damped Newton on z(exp(q)) = 0 in log-price coordinates; the
    finite-difference Jacobian is cheap at oracle scale (m <= ~10)."""
    q = np.log(p)
    z = excess_demand(market, np.exp(q))
    for _ in range(iters):
        res = np.abs(z).max()
        if res < 1e-13:
            break
        m = q.size
        jac = np.empty((m, m))
        for k in range(m):
            hi = q.copy()
            lo = q.copy()
            hi[k] += fd
            lo[k] -= fd
            jac[:, k] = (excess_demand(market, np.exp(hi)) - excess_demand(market, np.exp(lo))) / (2 * fd)
        # least squares takes the minimum-norm step, so a rank-deficient
        # Jacobian (non-unique equilibria) cannot drift along its null space
        step, *_ = np.linalg.lstsq(jac, -z, rcond=1e-10)
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        improved = False
        for _ in range(30):
            # clamp keeps exp() away from under/overflow on wild proposals
            q_new = np.clip(q + scale * step, -500.0, 500.0)
            z_new = excess_demand(market, np.exp(q_new))
            if np.abs(z_new).max() < res:
                q, z = q_new, z_new
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    return np.exp(q)


def solve_by_descent(
    market: Market,
    p0,
    budget_of_steps: int = 20_000,
    residual_target: float = 1e-8,
) -> EquilibriumResult:
    """Minimize the potential by entropic descent with gamma_t growing like
    sqrt(t) (so the effective step decays), then polish the root of the
    excess demand.  Strictly concave buyers only."""
    if Family.LINEAR in market.families():
        raise UnsupportedFamilyError("descent oracle needs strictly concave buyers")
    p = np.asarray(p0, dtype=float).copy()
    if np.any(p <= 0):
        raise ValueError("initial prices must be positive")
    gamma0 = compute_gamma(market, p, StepPolicy.informed_mixed())
    for t in range(budget_of_steps):
        z = excess_demand(market, p)
        if np.abs(z).max() < max(1e-3, residual_target):
            break
        p = p * np.exp(z / (gamma0 * np.sqrt(t + 1.0)))
    p = _newton_polish(market, p)
    return _finish(market, p, Method.LONG_RUN_DESCENT, target=residual_target)


def _simplex_grid(m: int, resolution: int):
    """Positive weights w with sum 1 on a resolution-step lattice."""
    for cuts in itertools.combinations(range(1, resolution), m - 1):
        parts = np.diff((0, *cuts, resolution)) / resolution
        if np.all(parts > 0):
            yield parts


def brute_force_tiny(market: Market, grid_resolution: int = 40) -> EquilibriumResult:
    """Global grid search of the potential over the budget-scaled price
    simplex (equilibrium prices satisfy sum_j s_j p_j = total budget by
    budget exhaustion and clearing), refined locally in log space."""
    m = market.n_goods
    if m > 3:
        raise ValueError("brute force supports at most 3 goods")
    total_budget = market.budgets.sum()
    if m == 1:
        candidates = [np.array([1.0])]
    else:
        candidates = list(_simplex_grid(m, grid_resolution))
    best, best_value = None, np.inf
    for w in candidates:
        p = np.maximum(total_budget * np.asarray(w) / market.supply, BOUNDARY_PRICE)
        value = potential(market, p).value
        if value < best_value:
            best, best_value = p, value

    def objective(q):
        return potential(market, np.maximum(np.exp(q), BOUNDARY_PRICE)).value

    res = minimize(objective, np.log(best), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    p = np.maximum(np.exp(res.x), BOUNDARY_PRICE)
    if Family.LINEAR not in market.families():
        p = _newton_polish(market, p)
    return _finish(market, p, Method.BRUTE_FORCE, target=1e-6)
