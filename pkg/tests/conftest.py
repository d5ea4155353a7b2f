"""Shared seeded generators for random utilities and markets."""

from __future__ import annotations

import numpy as np
import pytest

from fishmarket.model import Buyer, Family, Market, UtilityFunction

STRICT_FAMILIES = (Family.COBB_DOUGLAS, Family.LEONTIEF, Family.CES)
ALL_FAMILIES = STRICT_FAMILIES + (Family.LINEAR,)


def random_utility(
    rng: np.random.Generator,
    m: int,
    families=STRICT_FAMILIES,
    rho_range: tuple[float, float] = (-6.0, 0.9),
) -> UtilityFunction:
    family = families[rng.integers(len(families))]
    valuations = rng.uniform(0.5, 3.0, size=m)
    rho = None
    if family is Family.CES:
        rho = float(rng.uniform(*rho_range))
        if abs(rho) < 0.05:  # the near-zero limit is the Cobb-Douglas family
            rho = 0.05 if rho >= 0 else -0.05
    return UtilityFunction(family=family, valuations=valuations, rho=rho)


def random_market(
    rng: np.random.Generator,
    n: int,
    m: int,
    families=STRICT_FAMILIES,
    rho_range: tuple[float, float] = (-6.0, 0.9),
) -> Market:
    buyers = tuple(
        Buyer(
            utility=random_utility(rng, m, families, rho_range),
            budget=float(rng.uniform(0.5, 3.0)),
        )
        for _ in range(n)
    )
    return Market(buyers=buyers)


def random_prices(rng: np.random.Generator, m: int, lo: float = 0.2, hi: float = 5.0) -> np.ndarray:
    return rng.uniform(lo, hi, size=m)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240803)
