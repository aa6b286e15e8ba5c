"""Exact transmission rate and stationary distribution of threshold policies.

The threshold-n0 chain regenerates at (0, 0).  Its stationary distribution
factorizes through the multipliers m(h, r) that trace the state (n0+h, r)
back to (n0, 0):

    m(h, r) = m(h-r, 0) * prod_{j<r} gamma1(j)          for 0 <= r <= h,
    m(h, 0) = sum_{k<h} gamma2(k) m(h-k-1, 0) prod_{j<k} gamma1(j),
    m(0, 0) = 1,

with q_{n0+h,r} = (1-alpha)(1-mu)^(n0-1) m(h,r) q00 above the threshold and
q_{k,0} = (1-alpha)(1-mu)^(k-1) q00 on the waiting ramp 1 <= k <= n0.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import numpy as np

from .errors import TruncationError
from .model import gamma

_MASS_FLOOR = 1e-300  # skip stationary entries that underflowed to zero


def _gamma_arrays(source, channel, n: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = [gamma(source, channel, r) for r in range(n)]
    return np.array([p.gamma1 for p in pairs]), np.array([p.gamma2 for p in pairs])


@dataclass(frozen=True)
class MTable:
    """Multipliers m(h, r) in factored form: m0[h] = m(h, 0) and
    gamma1_prefix[r] = prod_{j<r} gamma1(j) (accumulated in log space so deep
    products underflow cleanly to zero instead of raising)."""

    h_max: int
    m0: np.ndarray
    gamma1_prefix: np.ndarray

    def entry(self, h: int, r: int) -> float:
        if h < 0 or r < 0 or h > self.h_max:
            raise ValueError(f"(h, r) out of range: {(h, r)}")
        if r > h:
            return 0.0
        return float(self.m0[h - r] * self.gamma1_prefix[r])

    def layer_sums(self) -> np.ndarray:
        """sum_r m(h, r) for each h; a convolution of m0 with the prefix products."""
        return np.convolve(self.m0, self.gamma1_prefix)[: self.h_max + 1]


def m_table(source, channel, h_max: int) -> MTable:
    if h_max < 0:
        raise ValueError(f"h_max must be nonnegative, got {h_max}")
    g1, g2 = _gamma_arrays(source, channel, max(h_max, 1))
    prefix = np.ones(h_max + 1)
    if h_max >= 1:
        with np.errstate(divide="ignore"):
            prefix[1:] = np.exp(np.cumsum(np.log(g1[:h_max])))
    m0 = np.zeros(h_max + 1)
    m0[0] = 1.0
    coef = g2[:h_max] * prefix[:h_max]
    for h in range(1, h_max + 1):
        m0[h] = float(coef[:h] @ m0[h - 1 :: -1])
    return MTable(h_max, m0, prefix)


@dataclass(frozen=True)
class RateAnalysis:
    """Stationary summary of the threshold-n0 chain.

    ``stationary`` maps (delta, r) to probability over the truncated support;
    the estimated mass beyond the truncation horizon is reported separately so
    the map plus ``truncation_mass`` sums to one.
    """

    n0: int
    q00: float
    rate: float
    stationary: dict[tuple[int, int], float]
    truncation_mass: float


def achieved_rate(
    n0: int,
    source,
    channel,
    tail_tol: float = 1e-12,
    h_ceiling: int = 262_144,
) -> RateAnalysis:
    """Exact transmission rate C of the threshold-n0 policy plus its stationary law.

    The h-layers above the threshold are accumulated until the estimated
    stationary mass of the remaining tail (geometric extrapolation of the
    layer sums) falls below tail_tol; q00 is then computed from the completed
    double sum, so the materialized distribution plus the declared tail is
    normalized exactly.
    """
    if n0 < 1:
        raise ValueError(f"threshold must be >= 1, got {n0}")
    if source.mu >= 1.0:
        raise ValueError("mu must be below 1")
    alpha, mu = source.alpha, source.mu
    omm = 1.0 - mu
    pref_n0 = omm ** (n0 - 1)
    ramp = (1.0 - pref_n0) / mu  # sum_{k=1}^{n0-1} (1-mu)^(k-1)

    h_max = 128
    while True:
        table = m_table(source, channel, h_max)
        layers = table.layer_sums()
        ratio = layers[-1] / layers[-2] if layers[-2] > 0.0 else 0.0
        if 0.0 <= ratio < 1.0:
            tail_layers = layers[-1] * ratio / (1.0 - ratio)
            partial = float(layers.sum())
            q00_cand = 1.0 / (1.0 + (1.0 - alpha) * (ramp + pref_n0 * (partial + tail_layers)))
            scaled_tail = q00_cand * (1.0 - alpha) * pref_n0 * tail_layers
            if isfinite(scaled_tail) and scaled_tail < tail_tol:
                break
        if h_max >= h_ceiling:
            raise TruncationError(
                f"stationary layers not below tail_tol={tail_tol} within h={h_ceiling}"
            )
        h_max *= 2

    total = partial + tail_layers
    q00 = 1.0 / (1.0 + (1.0 - alpha) * (ramp + pref_n0 * total))
    scale = q00 * (1.0 - alpha) * pref_n0
    rate = scale * total

    stationary: dict[tuple[int, int], float] = {(0, 0): q00}
    for k in range(1, n0):
        stationary[(k, 0)] = q00 * (1.0 - alpha) * omm ** (k - 1)
    m0, prefix = table.m0, table.gamma1_prefix
    for h in range(h_max + 1):
        for r in range(h + 1):
            mass = scale * m0[h - r] * prefix[r]
            if mass >= _MASS_FLOOR:
                stationary[(n0 + h, r)] = mass
    return RateAnalysis(n0, q00, rate, stationary, scale * tail_layers)


def mixed_chain_analysis(
    n_low: int,
    n_high: int | None,
    rho_high: float,
    source,
    channel,
    penalty,
    tail_tol: float = 1e-12,
    step_ceiling: int = 5_000_000,
) -> tuple[float, float]:
    """Exact long-run (transmission rate, average penalty) of the per-slot
    randomized two-threshold policy.

    Each slot the policy draws threshold n_high with probability rho_high,
    n_low otherwise, and transmits iff the AoII reaches the drawn value; with
    adjacent thresholds this randomizes the action only at AoII = n_low.  The
    chain regenerates at (0, 0) and the AoII equals the excursion depth, so
    expected occupancies per renewal cycle are propagated exactly over the
    transmission count and the averages follow from renewal reward.
    """
    if n_low < 1:
        raise ValueError(f"n_low must be >= 1, got {n_low}")
    if n_high is None:
        n_high = n_low + 1
    if n_high <= n_low:
        raise ValueError(f"n_high must exceed n_low, got {(n_low, n_high)}")
    if not 0.0 <= rho_high <= 1.0:
        raise ValueError(f"rho_high must lie in [0, 1], got {rho_high}")
    alpha, mu = source.alpha, source.mu

    g1 = np.empty(0)
    g2 = np.empty(0)

    def ensure(n: int):
        nonlocal g1, g2
        if g1.size < n:
            a1, a2 = _gamma_arrays(source, channel, max(n, 2 * g1.size, 64))
            g1, g2 = a1, a2

    # Occupancies per renewal cycle: one visit to (0,0), then alive mass w[r]
    # at depth t has AoII t until the first reset ends the cycle.
    length = 1.0
    cost = float(penalty(0))
    transmissions = 0.0
    w = np.array([1.0 - alpha])
    t = 1
    prev_alive = 1.0
    while True:
        alive = float(w.sum())
        if alive <= 0.0:
            break
        ratio = min(alive / prev_alive, 1.0 - 1e-12) if t > max(n_high, 2) else 1.0 - 1e-12
        f_t = penalty(t)
        if t > n_high and alive * max(1.0, f_t) * ratio / (1.0 - ratio) ** 2 < tail_tol:
            length += alive
            cost += f_t * alive
            transmissions += alive  # above n_high the policy always transmits
            break
        if t >= step_ceiling:
            raise TruncationError(
                f"mixed-chain occupancies not below tail_tol={tail_tol} within {step_ceiling} slots"
            )
        if t >= n_high:
            tau = 1.0
        elif t >= n_low:
            tau = 1.0 - rho_high
        else:
            tau = 0.0
        length += alive
        cost += f_t * alive
        transmissions += tau * alive
        k = w.size
        ensure(k)
        new = np.empty(k + 1)
        new[0] = (1.0 - tau) * (1.0 - mu) * alive + tau * float(w @ g2[:k])
        new[1:] = w * (tau * g1[:k])
        nz = np.nonzero(new >= _MASS_FLOOR)[0]
        w = new[: nz[-1] + 1] if nz.size else new[:1]
        prev_alive = alive
        t += 1
    return transmissions / length, cost / length
