"""Closed-form consumer theory for the four utility families.

For each family we implement Marshallian demand d(p, b), Hicksian demand
h(p, u), the expenditure function e(p, u) and the indirect utility
v(p, b).  Degree-1 homogeneity makes every one of these a rescaling of
its unit-level value: e(p, u) = u * e(p, 1), v(p, b) = b * v(p, 1),
and v(p, 1) = 1 / e(p, 1).

Unit expenditures:

    linear        e(p,1) = min_j p_j / v_j           (v_j > 0)
    Cobb-Douglas  e(p,1) = prod_j (p_j / a_j)^a_j    (sum a_j = 1)
    Leontief      e(p,1) = sum_j p_j v_j
    CES           e(p,1) = (sum_j v_j^s p_j^(1-s))^(1/(1-s)),  s = 1/(1-rho)

CES sums are evaluated as exponent sums of logarithms so that strongly
complementary buyers (rho near -100) stay inside double range.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Family, UnsupportedFamilyError, UtilityFunction, as_prices

DEFAULT_FD_STEP = 1e-5  # relative central-difference step


class DemandKind(enum.Enum):
    MARSHALLIAN = "marshallian"
    HICKSIAN = "hicksian"


class TieBreak(enum.Enum):
    """Selection rule for linear buyers when several goods tie on bang per buck.

    LOWEST_INDEX spends the whole budget on the first maximizer, which is
    what makes price cycles reproducible in linear markets; EQUAL_SPLIT
    divides the budget evenly across the tied goods.
    """

    LOWEST_INDEX = "lowest_index"
    EQUAL_SPLIT = "equal_split"


@dataclass(frozen=True)
class DemandBundle:
    quantities: np.ndarray
    kind: DemandKind


def _strictly_concave(u: UtilityFunction) -> bool:
    return u.family is not Family.LINEAR


def _ces_log_shares(u: UtilityFunction, p: np.ndarray):
    """Log expenditure-share terms L_j = s*log v_j + (1-s)*log p_j over the
    support of v, plus their log-sum-exp.  Shares are exp(L_j - logD)."""
    sigma = u.sigma
    pos = u.valuations > 0
    logterms = sigma * np.log(u.valuations[pos]) + (1.0 - sigma) * np.log(p[pos])
    peak = logterms.max()
    logden = peak + np.log(np.sum(np.exp(logterms - peak)))
    return pos, logterms, logden


def _linear_selection(u: UtilityFunction, p: np.ndarray, tie_break: TieBreak) -> np.ndarray:
    """Indicator weights over the max bang-per-buck goods (they sum to 1)."""
    ratio = np.where(u.valuations > 0, u.valuations / p, -np.inf)
    best = ratio.max()
    weights = np.zeros_like(p)
    if tie_break is TieBreak.LOWEST_INDEX:
        weights[int(np.argmax(ratio))] = 1.0
    else:
        tied = ratio == best
        weights[tied] = 1.0 / tied.sum()
    return weights


def _budget_shares_raw(u: UtilityFunction, p: np.ndarray, tie_break: TieBreak) -> np.ndarray:
    # p is a validated positive ndarray; hot path for tatonnement loops
    v = u.valuations
    if u.family is Family.LINEAR:
        return _linear_selection(u, p, tie_break)
    if u.family is Family.COBB_DOUGLAS:
        return v.copy()
    if u.family is Family.LEONTIEF:
        return p * v / (p @ v)
    pos, logterms, logden = _ces_log_shares(u, p)
    shares = np.zeros_like(p)
    shares[pos] = np.exp(logterms - logden)
    return shares


def budget_shares(u: UtilityFunction, p, tie_break: TieBreak = TieBreak.LOWEST_INDEX) -> np.ndarray:
    """Fraction of the budget spent on each good at prices p (sums to 1)."""
    p = as_prices(p).values
    if p.size != u.n_goods:
        raise ValueError("price dimension mismatch")
    return _budget_shares_raw(u, p, tie_break)


def marshallian_demand(
    u: UtilityFunction,
    p,
    budget: float,
    tie_break: TieBreak = TieBreak.LOWEST_INDEX,
) -> DemandBundle:
    """Utility-maximizing bundle at prices p and the given budget.

    The budget is exactly exhausted (local non-satiation) for every family.
    """
    p = as_prices(p).values
    if budget < 0:
        raise ValueError("budget must be non-negative")
    shares = budget_shares(u, p, tie_break)
    return DemandBundle(quantities=budget * shares / p, kind=DemandKind.MARSHALLIAN)


def _log_unit_expenditure_raw(u: UtilityFunction, p: np.ndarray) -> float:
    v = u.valuations
    if u.family is Family.LINEAR:
        pos = v > 0
        return float(np.min(np.log(p[pos]) - np.log(v[pos])))
    if u.family is Family.COBB_DOUGLAS:
        pos = v > 0
        return float(np.sum(v[pos] * (np.log(p[pos]) - np.log(v[pos]))))
    if u.family is Family.LEONTIEF:
        return float(np.log(p @ v))
    _, _, logden = _ces_log_shares(u, p)
    return float(logden / (1.0 - u.sigma))


def log_unit_expenditure(u: UtilityFunction, p) -> float:
    """log e(p, 1), the log of the minimum spend for one unit of utility."""
    p = as_prices(p).values
    if p.size != u.n_goods:
        raise ValueError("price dimension mismatch")
    return _log_unit_expenditure_raw(u, p)


def unit_expenditure(u: UtilityFunction, p) -> float:
    """e(p, 1); the polyhedral families avoid the log/exp round-trip."""
    p = as_prices(p).values
    if p.size != u.n_goods:
        raise ValueError("price dimension mismatch")
    v = u.valuations
    if u.family is Family.LEONTIEF:
        return float(p @ v)
    if u.family is Family.LINEAR:
        pos = v > 0
        return float(np.min(p[pos] / v[pos]))
    return float(np.exp(log_unit_expenditure(u, p)))


def expenditure(u: UtilityFunction, p, target: float) -> float:
    """Minimum spend e(p, target) to reach utility level target."""
    if target < 0:
        raise ValueError("target utility must be non-negative")
    if target == 0:
        return 0.0
    return target * unit_expenditure(u, p)


def indirect_utility(u: UtilityFunction, p, budget: float) -> float:
    """Maximum achievable utility v(p, budget); equals budget / e(p, 1)."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if budget == 0:
        return 0.0
    return budget / unit_expenditure(u, p)


def hicksian_demand(
    u: UtilityFunction,
    p,
    target: float,
    tie_break: TieBreak = TieBreak.LOWEST_INDEX,
) -> DemandBundle:
    """Cheapest bundle h(p, target) reaching utility level target.

    Set-valued linear demand is collapsed by the tie-break rule.
    """
    p = as_prices(p).values
    if target < 0:
        raise ValueError("target utility must be non-negative")
    v = u.valuations
    if u.family is Family.LEONTIEF:
        q = target * v
    elif u.family is Family.LINEAR:
        weights = _linear_selection(u, p, tie_break)
        q = np.where(weights > 0, target * weights / np.where(v > 0, v, 1.0), 0.0)
    else:
        # h(p, u) = d(p, e(p, u)): spend the minimal budget optimally
        q = marshallian_demand(u, p, expenditure(u, p, target)).quantities.copy()
    return DemandBundle(quantities=q, kind=DemandKind.HICKSIAN)


@dataclass(frozen=True)
class ElasticityReport:
    """Finite-difference price elasticities of Marshallian demand.

    matrix[j, k] is d log d_j / d log p_k at the evaluation point.  The
    scalar bound is the largest negated entry; for CES buyers the analytic
    substitution elasticity sigma = 1/(1-rho) is reported alongside.  The
    sign/extremum convention for a market-level elasticity bound is not
    settled, so both numbers are surfaced instead of picking one.
    """

    matrix: np.ndarray
    bound: float
    sigma: float | None
    convention: str = "bound = max over (j,k) of -elasticity at the given prices"


def elasticity_of_demand(
    u: UtilityFunction,
    p,
    budget: float,
    h: float = DEFAULT_FD_STEP,
) -> ElasticityReport:
    """Central-difference elasticity matrix of d(p, budget).

    Requires a single-valued differentiable demand, which rules out the
    linear family.  Goods the buyer does not value have identically zero
    demand; their rows are reported as zero.
    """
    if not _strictly_concave(u):
        raise UnsupportedFamilyError("linear demand is set-valued; elasticity undefined")
    p = as_prices(p).values
    base = marshallian_demand(u, p, budget).quantities
    m = p.size
    matrix = np.zeros((m, m))
    for k in range(m):
        step = h * p[k]
        hi = p.copy()
        lo = p.copy()
        hi[k] += step
        lo[k] -= step
        d_hi = marshallian_demand(u, hi, budget).quantities
        d_lo = marshallian_demand(u, lo, budget).quantities
        deriv = (d_hi - d_lo) / (2.0 * step)
        with np.errstate(invalid="ignore", divide="ignore"):
            col = deriv * p[k] / base
        matrix[:, k] = np.where(base > 0, col, 0.0)
    sigma = u.sigma if u.family is Family.CES else None
    return ElasticityReport(matrix=matrix, bound=float(np.max(-matrix)), sigma=sigma)


@dataclass(frozen=True)
class IdentitySuiteReport:
    violations: dict[str, float]
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.violations.values())

    @property
    def all_pass(self) -> bool:
        return self.max_violation <= self.tol


def _rel(err_from, ref) -> float:
    """Relative deviation with a unit floor so near-zero references stay sane."""
    err_from = np.asarray(err_from, dtype=float)
    ref = np.asarray(ref, dtype=float)
    return float(np.max(np.abs(err_from - ref) / np.maximum(np.abs(ref), 1.0)))


def identity_suite(
    u: UtilityFunction,
    p,
    budget: float,
    tol: float = 1e-8,
    scales: tuple[float, ...] = (0.5, 2.0, 10.0),
) -> IdentitySuiteReport:
    """Check the duality identities linking d, h, e and v at one price point.

    Each entry of the report is the worst relative violation of one
    identity; h(p, v(p,b)) = d(p,b) and d(p, e(p,u)) = h(p,u) are checked
    componentwise, the budget/utility inversions and the degree-1 scalings
    as scalars, and e(p,1) * v(p,1) = 1 ties the two unit levels together.
    """
    p = as_prices(p).values
    level = indirect_utility(u, p, budget)
    d = marshallian_demand(u, p, budget).quantities
    h = hicksian_demand(u, p, level).quantities
    violations = {
        "expenditure_of_indirect": _rel(expenditure(u, p, level), budget),
        "indirect_of_expenditure": _rel(indirect_utility(u, p, expenditure(u, p, level)), level),
        "hicksian_at_indirect": _rel(h, d),
        "marshallian_at_expenditure": _rel(
            marshallian_demand(u, p, expenditure(u, p, level)).quantities, h
        ),
        "unit_levels_reciprocal": _rel(
            expenditure(u, p, 1.0) * indirect_utility(u, p, 1.0), 1.0
        ),
    }
    scale_v = max(
        _rel(indirect_utility(u, p, lam * budget), lam * indirect_utility(u, p, budget))
        for lam in scales
    )
    scale_e = max(
        _rel(expenditure(u, p, lam * level), lam * expenditure(u, p, level))
        for lam in scales
    )
    violations["indirect_utility_scaling"] = scale_v
    violations["expenditure_scaling"] = scale_e
    return IdentitySuiteReport(violations=violations, tol=tol)


def shephard_check(
    u: UtilityFunction,
    p,
    target: float,
    h: float = DEFAULT_FD_STEP,
) -> float:
    """Max relative gap between de/dp_j (central differences) and h_j(p, target).

    The expenditure gradient equals the Hicksian demand for single-valued
    (strictly concave) families; linear buyers are rejected because their
    expenditure function has kinks where the demand is set-valued.
    """
    if not _strictly_concave(u):
        raise UnsupportedFamilyError("linear expenditure has a set-valued subgradient")
    p = as_prices(p).values
    hicks = hicksian_demand(u, p, target).quantities
    worst = 0.0
    for j in range(p.size):
        step = h * p[j]
        hi = p.copy()
        lo = p.copy()
        hi[j] += step
        lo[j] -= step
        deriv = (expenditure(u, hi, target) - expenditure(u, lo, target)) / (2.0 * step)
        worst = max(worst, abs(deriv - hicks[j]) / max(abs(hicks[j]), 1.0))
    return worst
