"""Discrete tatonnement as mirror descent on the market potential.

The entropic rule multiplies each price by exp(z_j(p)/gamma); with the
squared-norm kernel it becomes the classic additive rule p + z/gamma
projected onto a positive floor.  gamma is the single effective step
parameter; the entropy-kernel scale c (default 6) enters only when
verifying the descent bound, whose divergence is c * KL(p* || p0).

Step-size policies:

    FIXED               a user-chosen gamma
    NAIVE_HORIZON(T)    exp(T/5) * (total budget) / min_j p0_j, the
                        horizon-dependent demand cap; run() restarts it
                        over doubling epochs when no horizon is known
    INFORMED_MIXED      10 * max_j [ (B/p0_j) * max(max_k d0_k,
                        max_l d0_l / d0_j) + max_k d0_j / d0_k ],
                        computable at t=0 for mixed markets
    FIVE_TIMES_MAX_DEMAND
                        the run-qualifying value 5 * max_{t,j} d_j^t is
                        unknowable up front, so this evaluates the
                        INFORMED_MIXED cap and the verification helpers
                        audit 5 * (max recorded demand) <= gamma post hoc
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .consumer import TieBreak, _budget_shares_raw
from .model import Market, as_prices
from .potentials import _potential_raw, aggregate_demand, excess_demand, potential

PRICE_FLOOR = 1e-12
CYCLE_REL_TOL = 1e-9

# Per-round price-change caps implied by gamma >= 5 * max demand.
RATIO_LO = float(np.exp(-0.2))
RATIO_HI = float(np.exp(0.2))


class Kernel(enum.Enum):
    ENTROPIC_KL = "entropic"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class KernelSpec:
    kind: Kernel = Kernel.ENTROPIC_KL
    scale: float = 6.0  # entropy-kernel scale c in c * KL
    floor: float = PRICE_FLOOR  # euclidean projection floor

    def __post_init__(self):
        if self.kind is Kernel.ENTROPIC_KL and self.scale <= 0:
            raise ValueError("entropy kernel scale must be positive")
        if self.floor <= 0:
            raise ValueError("price floor must be positive")


class Policy(enum.Enum):
    FIXED = "fixed"
    FIVE_TIMES_MAX_DEMAND = "five_times_max_demand"
    NAIVE_HORIZON = "naive_horizon"
    INFORMED_MIXED = "informed_mixed"


@dataclass(frozen=True)
class StepPolicy:
    kind: Policy
    gamma: float | None = None  # FIXED
    horizon: int | None = None  # NAIVE_HORIZON
    doubling: bool = True  # NAIVE_HORIZON without a trusted horizon

    def __post_init__(self):
        if self.kind is Policy.FIXED:
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("fixed policy needs gamma > 0")
        if self.kind is Policy.NAIVE_HORIZON:
            if self.horizon is None or self.horizon < 1:
                raise ValueError("naive-horizon policy needs a horizon >= 1")

    @staticmethod
    def fixed(gamma: float) -> "StepPolicy":
        return StepPolicy(kind=Policy.FIXED, gamma=gamma)

    @staticmethod
    def informed_mixed() -> "StepPolicy":
        return StepPolicy(kind=Policy.INFORMED_MIXED)

    @staticmethod
    def five_times_max_demand() -> "StepPolicy":
        return StepPolicy(kind=Policy.FIVE_TIMES_MAX_DEMAND)

    @staticmethod
    def naive_horizon(horizon: int, doubling: bool = True) -> "StepPolicy":
        return StepPolicy(kind=Policy.NAIVE_HORIZON, horizon=horizon, doubling=doubling)


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    CYCLE_DETECTED = "cycle_detected"


def step_entropic(market: Market, p, gamma: float, tie_break: TieBreak = TieBreak.LOWEST_INDEX):
    """One multiplicative update p_j * exp(z_j(p)/gamma); stays positive."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    p = as_prices(p).values
    z = excess_demand(market, p, tie_break)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite excess demand")
    return p * np.exp(z / gamma)


def step_euclidean(
    market: Market,
    p,
    gamma: float,
    floor: float = PRICE_FLOOR,
    tie_break: TieBreak = TieBreak.LOWEST_INDEX,
):
    """One additive update max(p_j + z_j(p)/gamma, floor)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    p = as_prices(p).values
    z = excess_demand(market, p, tie_break)
    return np.maximum(p + z / gamma, floor)


def _naive_gamma(market: Market, p, horizon: int) -> float:
    p = np.asarray(p, dtype=float)
    return float(np.exp(horizon / 5.0) * market.budgets.sum() / p.min())


def compute_gamma(market: Market, p0, policy: StepPolicy) -> float:
    """The policy's step parameter, from initial-state quantities only."""
    p0 = as_prices(p0).values
    if policy.kind is Policy.FIXED:
        return float(policy.gamma)
    if policy.kind is Policy.NAIVE_HORIZON:
        return _naive_gamma(market, p0, policy.horizon)
    # informed cap for mixed markets; also stands in for 5 * max demand
    d0 = aggregate_demand(market, p0)
    if np.any(d0 <= 0):
        raise ValueError(
            "informed step policy needs strictly positive initial demand for every good"
        )
    total_budget = market.budgets.sum()
    d_max = d0.max()
    per_good = (total_budget / p0) * np.maximum(d_max, d_max / d0) + d0 / d0.min()
    return float(10.0 * per_good.max())


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed record of one tatonnement run.

    Row t holds the state before step t: prices p^t, excess z(p^t), the
    potential value, the gamma in force for the step out of t, and the
    realized max_j |p^t_j - p^(t-1)_j| / p^(t-1)_j (zero at t=0).
    buyer_demands (steps x buyers x goods) is recorded only on request.
    """

    prices: np.ndarray
    excess: np.ndarray
    potential: np.ndarray
    gamma: np.ndarray
    max_rel_dp: np.ndarray
    status: Status
    tol: float
    kernel: KernelSpec
    epoch_starts: tuple[int, ...] = (0,)
    buyer_demands: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.prices.shape[0] - 1

    @property
    def final_prices(self) -> np.ndarray:
        return self.prices[-1]

    @property
    def final_residual(self) -> float:
        return float(np.abs(self.excess[-1]).max())

    def demands(self, supply: np.ndarray) -> np.ndarray:
        """Aggregate demand per record: z + supply."""
        return self.excess + np.asarray(supply)[None, :]

    def write_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def _detect_cycle(history: list[np.ndarray], p: np.ndarray, window: int) -> bool:
    """Has p revisited a vector seen within the window?

    The immediate predecessor only counts on exact equality; a slowly
    drifting run would otherwise look periodic at the 1e-9 tolerance.
    """
    t = len(history)
    lo = max(0, t - window)
    for s in range(lo, t - 1):
        q = history[s]
        if np.max(np.abs(p - q) / q) <= CYCLE_REL_TOL:
            return True
    return t >= 1 and bool(np.array_equal(history[-1], p))


def run(
    market: Market,
    p0,
    kernel: KernelSpec = KernelSpec(),
    policy: StepPolicy = StepPolicy.fixed(2.0),
    max_iters: int = 100_000,
    tol: float = 1e-6,
    cycle_window: int = 64,
    tie_break: TieBreak = TieBreak.LOWEST_INDEX,
    record_buyer_demands: bool = False,
) -> Trajectory:
    """Iterate the chosen rule from p0 until the excess demand is small.

    Terminates CONVERGED when ||z||_inf < tol, CYCLE_DETECTED when prices
    revisit a recent vector while still unconverged, MAX_ITERS otherwise.
    The run is a pure function of its arguments (no clock, no RNG).
    """
    p = as_prices(p0).values.copy()
    doubling = policy.kind is Policy.NAIVE_HORIZON and policy.doubling
    gamma = compute_gamma(market, p, policy)

    prices, excesses, potentials, gammas, rel_dps = [], [], [], [], []
    buyer_rows = [] if record_buyer_demands else None
    epoch_starts = [0]
    next_epoch, epoch_len = 0, 1
    status = Status.MAX_ITERS
    prev = None

    for t in range(max_iters + 1):
        if doubling and t == next_epoch:
            if t > 0:
                epoch_starts.append(t)
            gamma = _naive_gamma(market, p, epoch_len)
            next_epoch += epoch_len
            epoch_len *= 2
        ev = _potential_raw(market, p, tie_break)
        prices.append(p.copy())
        excesses.append(ev.excess)
        potentials.append(ev.value)
        gammas.append(gamma)
        rel_dps.append(0.0 if prev is None else float(np.max(np.abs(p - prev) / prev)))
        if buyer_rows is not None:
            buyer_rows.append(
                np.stack(
                    [
                        b.budget * _budget_shares_raw(b.utility, p, tie_break) / p
                        for b in market.buyers
                    ]
                )
            )
        if np.abs(ev.excess).max() < tol:
            status = Status.CONVERGED
            break
        if _detect_cycle(prices[:-1], p, cycle_window):
            status = Status.CYCLE_DETECTED
            break
        if t == max_iters:
            break
        prev = p
        with np.errstate(over="ignore"):
            if kernel.kind is Kernel.ENTROPIC_KL:
                p = p * np.exp(ev.excess / gamma)
            else:
                p = np.maximum(p + ev.excess / gamma, kernel.floor)
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            # numerical blow-up (a wildly undersized gamma): keep the record
            # truncated at the last finite state
            break

    return Trajectory(
        prices=np.array(prices),
        excess=np.array(excesses),
        potential=np.array(potentials),
        gamma=np.array(gammas),
        max_rel_dp=np.array(rel_dps),
        status=status,
        tol=tol,
        kernel=kernel,
        epoch_starts=tuple(epoch_starts),
        buyer_demands=np.array(buyer_rows) if buyer_rows is not None else None,
    )


def nonconverged(traj: Trajectory) -> bool:
    """Non-convergence classification: an observed cycle, or running out of
    iterations while the residual is still an order of magnitude over tol."""
    if traj.status is Status.CYCLE_DETECTED:
        return True
    return traj.status is Status.MAX_ITERS and traj.final_residual > 10.0 * traj.tol


# ---------------------------------------------------------------------------
# Verification of the step-size guarantees on recorded trajectories
# ---------------------------------------------------------------------------


def generalized_kl(x: np.ndarray, y: np.ndarray, scale: float = 1.0) -> float:
    """scale * sum_j [x_j log(x_j/y_j) - x_j + y_j] for positive vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(scale * np.sum(x * np.log(x / y) - x + y))


def qualifying_gamma_audit(traj: Trajectory, market: Market) -> tuple[bool, float]:
    """Check 5 * max(peak recorded demand, peak supply) <= min gamma used.

    The supply term is implicit in the 5x-max-demand rule: over an entire
    run the peak demand can never stay below the supply scale (prices
    would fall forever and demand would blow up), but a finite record can,
    and the per-round excess is bounded below by -supply."""
    peak = max(traj.demands(market.supply).max(), market.supply.max())
    return bool(5.0 * peak <= traj.gamma.min() * (1 + 1e-12)), float(peak)


@dataclass(frozen=True)
class DescentBoundReport:
    """Potential gap against the gamma * D(p* || p0) / t guarantee."""

    applicable: bool
    reason: str
    gap: np.ndarray | None = None
    bound: np.ndarray | None = None
    violations: int = 0
    envelope_violations: int = 0
    worst_margin: float = float("-inf")


def verify_descent_bound(traj: Trajectory, market: Market, p_star, rel_tol: float = 1e-6) -> DescentBoundReport:
    """Per-step check gap_t <= gamma * c * KL(p* || p0) / t, plus the same
    for the running-best gap.  Applicable only to constant-gamma entropic
    runs whose gamma passes the 5x-max-demand audit."""
    if traj.kernel.kind is not Kernel.ENTROPIC_KL:
        return DescentBoundReport(False, "bound stated for the entropic kernel only")
    if np.ptp(traj.gamma) != 0:
        return DescentBoundReport(False, "gamma varied during the run (doubling epochs)")
    ok, peak = qualifying_gamma_audit(traj, market)
    if not ok:
        return DescentBoundReport(
            False, f"gamma {traj.gamma[0]:.6g} < 5 * max recorded demand {peak:.6g}"
        )
    p_star = as_prices(p_star).values
    gamma = float(traj.gamma[0])
    divergence = generalized_kl(p_star, traj.prices[0], scale=traj.kernel.scale)
    phi_star = potential(market, p_star).value
    t = np.arange(1, traj.prices.shape[0])
    gap = traj.potential[1:] - phi_star
    bound = gamma * divergence / t
    slack = rel_tol * (1.0 + np.abs(bound))
    violations = int(np.sum(gap > bound + slack))
    envelope = np.minimum.accumulate(gap)
    env_violations = int(np.sum(envelope > bound + slack))
    worst = float(np.max(gap - bound)) if gap.size else float("-inf")
    return DescentBoundReport(
        True, "ok", gap=gap, bound=bound,
        violations=violations, envelope_violations=env_violations, worst_margin=worst,
    )


@dataclass(frozen=True)
class StepLemmaReport:
    """Per-step inequalities implied by a qualifying gamma.

    price_ratio_violations     p^{t+1}/p^t outside [e^{-1/5}, e^{1/5}]
    kl_quadratic_violations    (dp_j)^2 / p_j > (9/2) KL(p_j + dp_j || p_j)
    cross_term_violations      per-buyer weighted cross bound
                               (1/b_i) sum_jk x_ij x_ik |dp_j||dp_k|
                               > sum_l (x_il / p_l) dp_l^2
    """

    applicable: bool
    reason: str
    price_ratio_violations: int = 0
    kl_quadratic_violations: int = 0
    cross_term_violations: int = 0
    worst_price_ratio: float = 1.0
    max_rel_change: float = 0.0

    @property
    def all_hold(self) -> bool:
        return self.applicable and not (
            self.price_ratio_violations
            or self.kl_quadratic_violations
            or self.cross_term_violations
        )


def verify_step_lemmas(traj: Trajectory, rel_slack: float = 1e-12) -> StepLemmaReport:
    """Verify the per-round inequalities on a recorded entropic trajectory.

    Needs buyer demands, so the run must have been recorded with
    record_buyer_demands=True.  Budgets are recovered from the records as
    p . x_i (the demand exhausts the budget), so no market is needed.
    """
    if traj.kernel.kind is not Kernel.ENTROPIC_KL:
        return StepLemmaReport(False, "entropic trajectories only")
    if traj.buyer_demands is None:
        return StepLemmaReport(False, "run was not recorded with buyer demands")
    n_steps = traj.prices.shape[0] - 1
    ratio_bad = kl_bad = cross_bad = 0
    worst_ratio = 1.0
    for t in range(n_steps):
        p, p_next = traj.prices[t], traj.prices[t + 1]
        dp = p_next - p
        ratio = p_next / p
        dev = float(np.max(np.maximum(ratio / RATIO_HI, RATIO_LO / ratio)))
        worst_ratio = max(worst_ratio, dev)
        if np.any(ratio > RATIO_HI * (1 + rel_slack)) or np.any(ratio < RATIO_LO / (1 + rel_slack)):
            ratio_bad += 1
        # per-coordinate KL(p' || p) = p * ((1+r) log1p(r) - r) with r = dp/p;
        # forming log(p'/p) directly cancels the quadratic term once r ~ 1e-8,
        # while log1p chokes when a collapsing price rounds r to exactly -1
        r = dp / p
        with np.errstate(divide="ignore", invalid="ignore"):
            stable = p * ((1.0 + r) * np.log1p(r) - r)
            direct = p_next * np.log(p_next / p) - dp
        kl_each = np.where(np.abs(r) < 0.5, stable, direct)
        if np.any(dp**2 / p > 4.5 * kl_each * (1 + rel_slack) + 1e-300):
            kl_bad += 1
        demands = traj.buyer_demands[t]
        budgets = demands @ p
        for i in range(demands.shape[0]):
            x = demands[i]
            lhs = float(np.abs(dp @ x)) ** 2 / budgets[i]
            rhs = float(np.sum(x / p * dp**2))
            if lhs > rhs * (1 + 1e-9) + 1e-300:
                cross_bad += 1
    return StepLemmaReport(
        True,
        "ok",
        price_ratio_violations=ratio_bad,
        kl_quadratic_violations=kl_bad,
        cross_term_violations=cross_bad,
        worst_price_ratio=worst_ratio,
        max_rel_change=float(traj.max_rel_dp.max()),
    )


def _complement_type(market: Market) -> bool:
    """All buyers in the gross-complements families (Leontief, Cobb-Douglas,
    CES with rho < 0), so every cross-price effect is weakly downward."""
    from .model import Family

    for b in market.buyers:
        fam = b.utility.family
        if fam is Family.LINEAR:
            return False
        if fam is Family.CES and b.utility.rho > 0:
            return False
    return True


@dataclass(frozen=True)
class DemandBoundReport:
    """Trajectory demand against the cap set by initial-state quantities:

        max_t d_j^t <= 2 (B / p0_j) max(max_k d0_k, max_l d0_l / d0_j)
                       + 2 max_k d0_j / d0_k
    """

    applicable: bool
    reason: str
    bound: np.ndarray | None = None
    peak_demand: np.ndarray | None = None
    violations: int = 0
    ratio_violations: int | None = None  # complements-only per-step check
    worst_slack: float = float("inf")


def verify_demand_bounds(traj: Trajectory, market: Market, rel_slack: float = 1e-12) -> DemandBoundReport:
    if float(traj.max_rel_dp.max()) > 0.25 * (1 + rel_slack):
        return DemandBoundReport(False, "a step moved some price by more than 1/4")
    demands = traj.demands(market.supply)
    d0 = demands[0]
    if np.any(d0 <= 0):
        return DemandBoundReport(False, "zero initial demand for some good")
    total_budget = market.budgets.sum()
    p0 = traj.prices[0]
    bound = 2.0 * (total_budget / p0) * np.maximum(d0.max(), d0.max() / d0) + 2.0 * d0 / d0.min()
    peak = demands.max(axis=0)
    violations = int(np.sum(peak > bound * (1 + rel_slack)))
    worst_slack = float(np.min(bound - peak))
    ratio_violations = None
    if _complement_type(market):
        ratios = demands[1:] / demands[:-1]
        ratio_violations = int(
            np.sum(np.any((ratios > RATIO_HI * (1 + 1e-9)) | (ratios < RATIO_LO / (1 + 1e-9)), axis=1))
        )
    return DemandBoundReport(
        True,
        "ok",
        bound=bound,
        peak_demand=peak,
        violations=violations,
        ratio_violations=ratio_violations,
        worst_slack=worst_slack,
    )


# ---------------------------------------------------------------------------
# Trajectory CSV: t, p_1..p_m, z_1..z_m, phi, gamma_t, max_rel_dp, status
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(traj: Trajectory, path, meta: str | None = None) -> None:
    m = traj.prices.shape[1]
    cols = (
        ["t"]
        + [f"p_{j + 1}" for j in range(m)]
        + [f"z_{j + 1}" for j in range(m)]
        + ["phi", "gamma_t", "max_rel_dp", "status"]
    )
    last = traj.prices.shape[0] - 1
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        fh.write(",".join(cols) + "\n")
        for t in range(last + 1):
            row = (
                [str(t)]
                + [_fmt(x) for x in traj.prices[t]]
                + [_fmt(x) for x in traj.excess[t]]
                + [_fmt(traj.potential[t]), _fmt(traj.gamma[t]), _fmt(traj.max_rel_dp[t])]
                + [traj.status.value if t == last else ""]
            )
            fh.write(",".join(row) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    rows = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    m = sum(1 for c in header if c.startswith("p_"))
    status = Status.MAX_ITERS
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append([float(x) for x in parts[1 : 1 + 2 * m + 3]])
        if parts[-1]:
            status = Status(parts[-1])
    data = np.array(rows)
    return Trajectory(
        prices=data[:, :m],
        excess=data[:, m : 2 * m],
        potential=data[:, 2 * m],
        gamma=data[:, 2 * m + 1],
        max_rel_dp=data[:, 2 * m + 2],
        status=status,
        tol=float("nan"),
        kernel=KernelSpec(),
    )
