"""End-to-end solver for the rate-constrained AoII minimization problem.

The multiplier lambda prices each transmission; the priced problem is solved
in closed form by the lagrangian module, its achieved rate C(lambda) is exact
via the rate module, and C is non-increasing in lambda (it depends on lambda
only through the integer threshold, so it is piecewise constant and the
binary search terminates at a jump).  When no pure threshold meets the budget
exactly, the final policy randomizes per slot between the two adjacent
thresholds; the randomization weight is tuned on the exact mixed chain so the
achieved rate equals the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq

from .errors import BoundednessError, SolverError, ThresholdSearchError
from .lagrangian import SeriesConfig, g_for_threshold, g_wait, optimal_threshold
from .model import validate_boundedness
from .rate import achieved_rate, mixed_chain_analysis
from .sim import FixedThreshold, MixedThreshold, NeverTransmit

REGIME_NEVER_TRANSMIT = "never-transmit"
REGIME_PURE_THRESHOLD = "pure-threshold"
REGIME_MIXED = "mixed"

_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class CmdpSolution:
    """Solved policy and its predicted long-run performance.

    regime "never-transmit": waiting is optimal (mu >= alpha); thresholds and
    rates are None and predicted_aoii equals the waiting-policy cost.
    regime "pure-threshold": the lambda* threshold meets the budget by itself.
    regime "mixed": per-slot randomization between n_low = n_high - 1 and
    n_high with probability rho_high on the larger threshold; the predicted
    rate equals the budget by construction.
    """

    regime: str
    lambda_star: float
    n_high: Optional[int]
    n_low: Optional[int]
    rho_high: Optional[float]
    rate_high: Optional[float]
    rate_low: Optional[float]
    predicted_rate: float
    predicted_aoii: float
    diagnostics: dict


def mixture_rate(rho_high: float, rate_high: float, rate_low: float) -> float:
    """Linear mixing identity rho*rate_high + (1-rho)*rate_low."""
    for name, value in (("rho_high", rho_high), ("rate_high", rate_high), ("rate_low", rate_low)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return rho_high * rate_high + (1.0 - rho_high) * rate_low


def solution_policy(sol: CmdpSolution):
    """Simulation policy realizing a solved CMDP solution."""
    if sol.regime == REGIME_NEVER_TRANSMIT:
        return NeverTransmit()
    if sol.regime == REGIME_PURE_THRESHOLD:
        return FixedThreshold(sol.n_high)
    return MixedThreshold(sol.n_low, sol.rho_high)


def _check_trace(trace) -> None:
    by_lam = sorted(trace)
    for (l0, n0, c0), (l1, n1, c1) in zip(by_lam, by_lam[1:]):
        if n1 < n0 or c1 > c0 + _MONOTONE_SLACK:
            raise SolverError(
                "monotonicity violated along the multiplier search: "
                f"lambda {l0}->{l1} gave n0 {n0}->{n1}, rate {c0}->{c1}"
            )


def solve_cmdp(
    R: float,
    source,
    channel,
    penalty,
    cfg: SeriesConfig = SeriesConfig(),
    lambda_tol: float = 1e-6,
    tail_tol: float = 1e-12,
) -> CmdpSolution:
    """Minimize the average AoII penalty subject to a long-run transmission
    rate of at most R.

    The multiplier search brackets [0, lambda_hi] by doubling until the rate
    is feasible, then bisects to width lambda_tol and returns the feasible
    endpoint (the smallest bracketed multiplier whose threshold meets the
    budget).  Any budget R > 0 is feasible since waiting never transmits.
    """
    if not 0.0 < R <= 1.0:
        raise ValueError(f"rate budget must lie in (0, 1], got {R}")
    if not lambda_tol > 0.0:
        raise ValueError(f"lambda_tol must be positive, got {lambda_tol}")
    if not validate_boundedness(source, channel, penalty):
        raise BoundednessError(
            "the boundedness certificate failed: the average AoII of the "
            "always-transmit policy is not demonstrably finite"
        )

    if source.mu >= source.alpha:
        return CmdpSolution(
            regime=REGIME_NEVER_TRANSMIT,
            lambda_star=0.0,
            n_high=None,
            n_low=None,
            rho_high=None,
            rate_high=None,
            rate_low=None,
            predicted_rate=0.0,
            predicted_aoii=g_wait(source, penalty, cfg),
            diagnostics={"lambda_trace": (), "lambda_iterations": 0},
        )

    trace: list[tuple[float, int, float]] = []

    def evaluate(lam: float) -> tuple[int, float]:
        n0 = optimal_threshold(lam, source, channel, penalty, cfg)
        rate = achieved_rate(n0, source, channel, tail_tol).rate
        trace.append((lam, n0, rate))
        return n0, rate

    def diagnostics() -> dict:
        return {
            "lambda_trace": tuple(trace),
            "lambda_iterations": len(trace),
        }

    n0_zero, rate_zero = evaluate(0.0)
    if rate_zero <= R:
        aoii = g_for_threshold(n0_zero, 0.0, source, channel, penalty, cfg)
        return CmdpSolution(
            regime=REGIME_PURE_THRESHOLD,
            lambda_star=0.0,
            n_high=n0_zero,
            n_low=None,
            rho_high=None,
            rate_high=rate_zero,
            rate_low=None,
            predicted_rate=rate_zero,
            predicted_aoii=aoii,
            diagnostics=diagnostics(),
        )

    lo = 0.0
    hi = 1.0
    n0_hi, rate_hi = evaluate(hi)
    doublings = 0
    while rate_hi > R:
        doublings += 1
        if doublings > 64:
            raise ThresholdSearchError("multiplier bracket exceeded 64 doublings")
        lo, hi = hi, 2.0 * hi
        n0_hi, rate_hi = evaluate(hi)
    while hi - lo > lambda_tol:
        mid = 0.5 * (lo + hi)
        n0_mid, rate_mid = evaluate(mid)
        if rate_mid <= R:
            hi, n0_hi, rate_hi = mid, n0_mid, rate_mid
        else:
            lo = mid
    _check_trace(trace)

    lambda_star = hi
    n_high, rate_high = n0_hi, rate_hi
    if n_high == 1:
        # cannot mix below the smallest threshold; the budget is already met
        aoii = g_for_threshold(n_high, 0.0, source, channel, penalty, cfg)
        return CmdpSolution(
            REGIME_PURE_THRESHOLD, lambda_star, n_high, None, None,
            rate_high, None, rate_high, aoii, diagnostics(),
        )
    n_low = n_high - 1
    rate_low = achieved_rate(n_low, source, channel, tail_tol).rate
    if rate_low <= R:
        # float-degenerate jump: the smaller threshold is already feasible
        aoii = g_for_threshold(n_low, 0.0, source, channel, penalty, cfg)
        return CmdpSolution(
            REGIME_PURE_THRESHOLD, lambda_star, n_low, None, None,
            rate_low, None, rate_low, aoii, diagnostics(),
        )

    # The per-slot randomized chain's rate is a Moebius function of the
    # transmit probability at AoII = n_low, not the linear mixture of the two
    # pure rates, so the weight is root-solved on the exact chain.  The linear
    # mixing identity only seeds the bracket.
    def rate_gap(rho: float) -> float:
        return mixed_chain_analysis(n_low, n_high, rho, source, channel, penalty, tail_tol)[0] - R

    gap_low, gap_high = rate_gap(0.0), rate_gap(1.0)
    if abs(gap_high) < 1e-15:
        rho_high = 1.0
    elif abs(gap_low) < 1e-15:
        rho_high = 0.0
    else:
        rho_high = float(brentq(rate_gap, 0.0, 1.0, xtol=1e-14, rtol=8.9e-16))
    predicted_rate, predicted_aoii = mixed_chain_analysis(
        n_low, n_high, rho_high, source, channel, penalty, tail_tol
    )
    diag = diagnostics()
    diag["rho_linear_seed"] = (rate_low - R) / (rate_low - rate_high)
    return CmdpSolution(
        regime=REGIME_MIXED,
        lambda_star=lambda_star,
        n_high=n_high,
        n_low=n_low,
        rho_high=rho_high,
        rate_high=rate_high,
        rate_low=rate_low,
        predicted_rate=predicted_rate,
        predicted_aoii=predicted_aoii,
        diagnostics=diag,
    )
