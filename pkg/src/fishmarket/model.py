"""Core market data types, validation, and (de)serialization.

A market instance is a set of buyers, each with a budget and a utility
function drawn from the linear / Cobb-Douglas / Leontief / CES families,
plus a per-good supply vector (all ones by default).  All utility
functions are homogeneous of degree 1, so the CES form carries the outer
1/rho exponent and Cobb-Douglas exponents are normalized to sum to one.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp


class MarketFormatError(ValueError):
    """A market document violates the schema or a model invariant."""


class UnsupportedFamilyError(ValueError):
    """Operation undefined for this utility family (e.g. non-differentiable)."""


class Family(enum.Enum):
    LINEAR = "linear"
    COBB_DOUGLAS = "cobb_douglas"
    LEONTIEF = "leontief"
    CES = "ces"


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class UtilityFunction:
    """A degree-1 homogeneous utility function over m goods.

    family        one of Family
    valuations    length-m non-negative weights, at least one positive;
                  Cobb-Douglas weights are normalized to sum to 1
    rho           CES curvature, rho <= 1 and rho != 0.  The rho -> 1, 0,
                  -inf limits are the dedicated LINEAR / COBB_DOUGLAS /
                  LEONTIEF variants; CES arithmetic is never used there.
    """

    family: Family
    valuations: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        v = np.array(self.valuations, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise MarketFormatError("valuations must be a non-empty vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise MarketFormatError("valuations must be finite and non-negative")
        if not np.any(v > 0):
            raise MarketFormatError("valuations need at least one positive entry")
        if self.family is Family.CES:
            if self.rho is None or not np.isfinite(self.rho):
                raise MarketFormatError("CES utility requires a finite rho")
            if self.rho == 0.0:
                raise MarketFormatError(
                    "CES with rho = 0 is the Cobb-Douglas limit; "
                    "use the cobb_douglas family"
                )
            if self.rho > 1.0:
                raise MarketFormatError(
                    "CES requires rho <= 1; rho = 1 is the linear family"
                )
            if self.rho == 1.0:
                raise MarketFormatError(
                    "CES with rho = 1 is the linear limit; use the linear family"
                )
        elif self.rho is not None:
            raise MarketFormatError(f"rho is only meaningful for CES, got {self.family}")
        if self.family is Family.COBB_DOUGLAS:
            v = v / v.sum()
        object.__setattr__(self, "valuations", _readonly(v))

    @property
    def n_goods(self) -> int:
        return self.valuations.size

    @property
    def sigma(self) -> float:
        """Elasticity of substitution: 1/(1-rho) for CES, by-convention
        values for the limit families (linear -> inf, Cobb-Douglas -> 1,
        Leontief -> 0)."""
        if self.family is Family.CES:
            return 1.0 / (1.0 - self.rho)
        if self.family is Family.LINEAR:
            return float("inf")
        if self.family is Family.COBB_DOUGLAS:
            return 1.0
        return 0.0

    def value(self, x) -> float:
        """Evaluate u(x) for a non-negative bundle x."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.valuations.shape:
            raise ValueError("bundle dimension mismatch")
        if np.any(x < 0):
            raise ValueError("bundle must be non-negative")
        v = self.valuations
        if self.family is Family.LINEAR:
            return float(v @ x)
        if self.family is Family.LEONTIEF:
            pos = v > 0
            return float(np.min(x[pos] / v[pos]))
        if self.family is Family.COBB_DOUGLAS:
            pos = v > 0
            if np.any(x[pos] == 0):
                return 0.0
            return float(np.exp(np.sum(v[pos] * np.log(x[pos]))))
        # CES, in log space: x_j^rho overflows for rho << 0 at plain precision
        pos = v > 0
        rho = self.rho
        if np.any(x[pos] == 0):
            if rho < 0:
                return 0.0
            pos = pos & (x > 0)
            if not np.any(pos):
                return 0.0
        logterms = np.log(v[pos]) + rho * np.log(x[pos])
        return float(np.exp(logsumexp(logterms) / rho))


@dataclass(frozen=True)
class Buyer:
    utility: UtilityFunction
    budget: float

    def __post_init__(self):
        if not np.isfinite(self.budget) or self.budget <= 0:
            raise MarketFormatError("budget must be positive")


@dataclass(frozen=True)
class Market:
    """A Fisher market: n buyers with budgets, m divisible goods with supply."""

    buyers: tuple[Buyer, ...]
    supply: np.ndarray = None  # defaults to all ones

    def __post_init__(self):
        buyers = tuple(self.buyers)
        if not buyers:
            raise MarketFormatError("market needs at least one buyer")
        m = buyers[0].utility.n_goods
        if any(b.utility.n_goods != m for b in buyers):
            raise MarketFormatError("all buyers must value the same goods")
        supply = np.ones(m) if self.supply is None else np.array(self.supply, dtype=float)
        if supply.shape != (m,):
            raise MarketFormatError("supply length must match the good count")
        if not np.all(np.isfinite(supply)) or np.any(supply <= 0):
            raise MarketFormatError("supply entries must be positive")
        object.__setattr__(self, "buyers", buyers)
        object.__setattr__(self, "supply", _readonly(supply))

    @property
    def n_buyers(self) -> int:
        return len(self.buyers)

    @property
    def n_goods(self) -> int:
        return self.buyers[0].utility.n_goods

    @property
    def budgets(self) -> np.ndarray:
        return np.array([b.budget for b in self.buyers])

    def families(self) -> set[Family]:
        return {b.utility.family for b in self.buyers}


@dataclass(frozen=True)
class PriceVector:
    """Strictly positive per-good prices."""

    values: np.ndarray

    def __post_init__(self):
        p = np.array(self.values, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("prices must be a non-empty vector")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValueError("prices must be finite and strictly positive")
        object.__setattr__(self, "values", _readonly(p))

    def __len__(self) -> int:
        return self.values.size


def as_prices(p) -> PriceVector:
    return p if isinstance(p, PriceVector) else PriceVector(np.asarray(p, dtype=float))


@dataclass(frozen=True)
class Allocation:
    """n x m matrix of non-negative quantities, one row per buyer."""

    matrix: np.ndarray

    def __post_init__(self):
        x = np.array(self.matrix, dtype=float)
        if x.ndim != 2:
            raise ValueError("allocation must be a matrix")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ValueError("allocation entries must be finite and non-negative")
        object.__setattr__(self, "matrix", _readonly(x))


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-good slack supply_j - sum_i x_ij; feasible iff all slacks >= -tol."""

    slack: np.ndarray
    feasible: bool
    tol: float


def validate_allocation(market: Market, alloc: Allocation, tol: float = 1e-9) -> FeasibilityReport:
    x = alloc.matrix
    if x.shape != (market.n_buyers, market.n_goods):
        raise ValueError(
            f"allocation shape {x.shape} does not match market "
            f"({market.n_buyers} buyers, {market.n_goods} goods)"
        )
    slack = market.supply - x.sum(axis=0)
    return FeasibilityReport(slack=_readonly(slack), feasible=bool(np.all(slack >= -tol)), tol=tol)


# ---------------------------------------------------------------------------
# Market-spec document format
#
# {"goods": m, "supply": [..] (optional),
#  "buyers": [{"family": "linear|cobb_douglas|leontief|ces",
#              "valuations": [..], "rho": r (CES only), "budget": b}, ...]}
# ---------------------------------------------------------------------------

_FAMILY_BY_NAME = {f.value: f for f in Family}


def _parse_buyer(entry, m: int, idx: int) -> Buyer:
    if not isinstance(entry, dict):
        raise MarketFormatError(f"buyer {idx}: expected an object")
    try:
        family = _FAMILY_BY_NAME[entry["family"]]
    except KeyError:
        raise MarketFormatError(
            f"buyer {idx}: family must be one of {sorted(_FAMILY_BY_NAME)}"
        ) from None
    if "valuations" not in entry or "budget" not in entry:
        raise MarketFormatError(f"buyer {idx}: valuations and budget are required")
    valuations = entry["valuations"]
    if len(valuations) != m:
        raise MarketFormatError(
            f"buyer {idx}: {len(valuations)} valuations for a {m}-good market"
        )
    rho = entry.get("rho")
    if family is not Family.CES and rho is not None:
        raise MarketFormatError(f"buyer {idx}: rho is only valid for the ces family")
    try:
        utility = UtilityFunction(family=family, valuations=valuations, rho=rho)
        return Buyer(utility=utility, budget=float(entry["budget"]))
    except MarketFormatError as exc:
        raise MarketFormatError(f"buyer {idx}: {exc}") from None


def market_from_dict(doc: dict) -> Market:
    if not isinstance(doc, dict):
        raise MarketFormatError("market document must be an object")
    if "goods" not in doc or "buyers" not in doc:
        raise MarketFormatError("market document needs 'goods' and 'buyers'")
    m = doc["goods"]
    if not isinstance(m, int) or m < 1:
        raise MarketFormatError("'goods' must be a positive integer")
    buyers_doc = doc["buyers"]
    if not isinstance(buyers_doc, list) or not buyers_doc:
        raise MarketFormatError("'buyers' must be a non-empty list")
    buyers = tuple(_parse_buyer(entry, m, i) for i, entry in enumerate(buyers_doc))
    supply = doc.get("supply")
    if supply is not None and len(supply) != m:
        raise MarketFormatError("supply length must equal 'goods'")
    unknown = set(doc) - {"goods", "supply", "buyers"}
    if unknown:
        raise MarketFormatError(f"unknown market fields: {sorted(unknown)}")
    return Market(buyers=buyers, supply=supply)


def market_to_dict(market: Market) -> dict:
    doc = {
        "goods": market.n_goods,
        "supply": list(market.supply),
        "buyers": [
            {
                "family": b.utility.family.value,
                "valuations": list(b.utility.valuations),
                **({"rho": b.utility.rho} if b.utility.family is Family.CES else {}),
                "budget": b.budget,
            }
            for b in market.buyers
        ],
    }
    return doc


def parse_market(document: str) -> Market:
    """Parse and validate a market-spec document (JSON text)."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MarketFormatError(f"not valid JSON: {exc}") from None
    return market_from_dict(doc)


def serialize_market(market: Market) -> str:
    return json.dumps(market_to_dict(market), indent=2)


def load_market(path) -> Market:
    with open(path) as fh:
        return parse_market(fh.read())
