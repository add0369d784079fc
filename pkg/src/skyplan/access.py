"""Minimum-total-power allocation under RSMA, FDMA, and TDMA.

Every user k has a fixed linear channel gain g_k and a required rate
R_k (bit/s) on a shared uplink of bandwidth W with noise density n0.

* RSMA admits the full multiple-access rate region: for every nonempty
  user subset S, sum(R_k, k in S) <= W log2(1 + sum(g_k P_k, k in S)
  / (W n0)).  In received powers q_k = g_k P_k those constraints form a
  contra-polymatroid, and min sum(P_k) = min sum(q_k / g_k) is a linear
  program whose optimum sits on the vertex generated by decoding users
  in descending gain order (the user decoded last sees no interference,
  so the weakest channel gets the cheapest slot).  ``rsma_brute_force``
  enumerates all decoding orders as an independent check.

* FDMA/TDMA split bandwidth/time into shares b_k summing to one.  Both
  per-user power curves P_k(b_k) are strictly convex and decreasing, so
  the optimum equalizes the marginal power reduction -dP_k/db_k across
  users; we bisect on that common marginal until the shares sum to one.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .channel import exp2m1
from .errors import ValidationError

LN2 = math.log(2.0)

SHARE_SUM_TOL = 1e-9       # |sum(b) - 1| at the returned solution
MARGINAL_MAX_ITERS = 10_000
_REGION_CHECK_MAX_USERS = 12


class Scheme(str, enum.Enum):
    RSMA = "rsma"
    FDMA = "fdma"
    TDMA = "tdma"


@dataclass(frozen=True)
class UserDemand:
    """One uplink user: linear channel gain and required rate in bit/s."""

    gain: float
    rate: float

    def __post_init__(self):
        if not (self.gain > 0 and math.isfinite(self.gain)):
            raise ValidationError(f"gain must be finite and > 0, got {self.gain}")
        if self.rate < 0 or not math.isfinite(self.rate):
            raise ValidationError(f"rate must be finite and >= 0, got {self.rate}")


@dataclass(frozen=True)
class AccessSolution:
    """Per-user powers plus the structure that achieves them.

    ``shares`` are bandwidth (FDMA) or time (TDMA) fractions and an
    all-ones placeholder for RSMA.  ``decode_order`` lists user indices
    in SIC decoding sequence (first decoded first; the last entry is
    decoded interference-free); it is None for FDMA/TDMA.
    """

    scheme: Scheme
    powers: tuple[float, ...]
    shares: tuple[float, ...]
    decode_order: tuple[int, ...] | None
    total_power: float


def _safe_exp(x: float) -> float:
    return math.inf if x > 709.0 else math.exp(x)


def _check_users(users: Sequence[UserDemand]) -> None:
    if len(users) == 0:
        raise ValidationError("user list must be nonempty")


# ---------------------------------------------------------------------------
# RSMA
# ---------------------------------------------------------------------------

def _vertex_powers(order: Sequence[int], gains: Sequence[float],
                   rate_over_w: Sequence[float], noise_power: float) -> list[float]:
    """Received-power vertex for one SIC decoding order, mapped to transmit powers.

    Walking the order backwards, each user needs
    q = N0 * 2^(sum of later rates / W) * (2^(own rate / W) - 1),
    which meets every suffix-subset constraint with equality.
    """
    powers = [0.0] * len(gains)
    later_rate_sum = 0.0
    for idx in reversed(order):
        scale = _safe_exp(later_rate_sum * LN2)
        q = noise_power * scale * exp2m1(rate_over_w[idx])
        powers[idx] = q / gains[idx]
        later_rate_sum += rate_over_w[idx]
    return powers


def solve_rsma(users: Sequence[UserDemand], bandwidth: float, noise_density: float) -> AccessSolution:
    """Globally minimal total power meeting every RSMA subset-rate constraint.

    Decoding in descending gain order (ties by ascending index) is
    optimal: swapping two adjacent users changes the total by
    (2^(r_i/W)-1)(2^(r_j/W)-1) N0 (1/g_first - 1/g_second) scaled by the
    common suffix, which is minimized by putting the larger gain first.
    """
    _check_users(users)
    n0w = noise_density * bandwidth
    gains = [u.gain for u in users]
    rate_over_w = [u.rate / bandwidth for u in users]
    order = sorted(range(len(users)), key=lambda i: (-gains[i], i))
    powers = _vertex_powers(order, gains, rate_over_w, n0w)
    return AccessSolution(
        scheme=Scheme.RSMA,
        powers=tuple(powers),
        shares=(1.0,) * len(users),
        decode_order=tuple(order),
        total_power=math.fsum(powers),
    )


def rsma_brute_force(users: Sequence[UserDemand], bandwidth: float,
                     noise_density: float) -> AccessSolution:
    """Exhaustive search over all decoding-order vertices (oracle, K <= ~8)."""
    _check_users(users)
    n0w = noise_density * bandwidth
    gains = [u.gain for u in users]
    rate_over_w = [u.rate / bandwidth for u in users]
    best_total = math.inf
    best_order = None
    best_powers = None
    for order in itertools.permutations(range(len(users))):
        powers = _vertex_powers(order, gains, rate_over_w, n0w)
        total = math.fsum(powers)
        if total < best_total:
            best_total = total
            best_order = order
            best_powers = powers
    return AccessSolution(
        scheme=Scheme.RSMA,
        powers=tuple(best_powers),
        shares=(1.0,) * len(users),
        decode_order=tuple(best_order),
        total_power=best_total,
    )


# ---------------------------------------------------------------------------
# FDMA / TDMA
# ---------------------------------------------------------------------------
#
# With kappa = R ln2 / W and C = W n0 / g:
#   FDMA: P(b) = C b (e^(kappa/b) - 1),  -P'(b) = C (1 + e^u (u - 1)), u = kappa/b
#   TDMA: P(b) = C (e^(kappa/b) - 1),    -P'(b) = C e^u u^2 / kappa
# Both marginals decrease strictly from +inf (b -> 0) to 0 (b -> inf), so for
# a target marginal lambda the share is found by inverting in u.

def _fdma_share(lam: float, c: float, kappa: float) -> float:
    """Share b with -P'(b) = lam for the FDMA power curve."""
    v = lam / c
    if v >= 2.0:
        # Solve u + ln(u - 1) = ln(v - 1); concave increasing in u > 1.
        s = math.log(v - 1.0)
        u = max(1.5, s)
        for _ in range(100):
            f = u + math.log(u - 1.0) - s
            step = f / (1.0 + 1.0 / (u - 1.0))
            nxt = u - step
            if nxt <= 1.0:
                nxt = (u + 1.0) / 2.0
            if abs(nxt - u) <= 1e-15 * nxt:
                u = nxt
                break
            u = nxt
    else:
        # Solve e^u (u - 1) + 1 = v; convex increasing, and since
        # h(u) >= u^2/2 the start u0 = sqrt(2v) lies above the root.
        # Below u ~ 1e-4 the closed form cancels; use the series
        # h(u) = u^2/2 + u^3/3 + u^4/8 + ...
        u = math.sqrt(2.0 * v)
        for _ in range(100):
            if u < 1e-4:
                f = u * u * (0.5 + u * (1.0 / 3.0 + u / 8.0)) - v
            else:
                f = _safe_exp(u) * (u - 1.0) + 1.0 - v
            nxt = u - f / (u * _safe_exp(u))
            if nxt <= 0.0:
                nxt = u / 2.0
            if abs(nxt - u) <= 1e-15 * nxt:
                u = nxt
                break
            u = nxt
    return kappa / u


def _tdma_share(lam: float, c: float, kappa: float) -> float:
    """Share b with -P'(b) = lam for the TDMA power curve."""
    # Solve u + 2 ln u = s = ln(lam kappa / c); concave increasing.
    s = math.log(lam) + math.log(kappa) - math.log(c)
    if s > 2.0:
        u = s - 2.0 * math.log(s)
    elif s < -2.0:
        u = math.exp(s / 2.0)
    else:
        u = 1.0
    for _ in range(100):
        f = u + 2.0 * math.log(u) - s
        nxt = u - f / (1.0 + 2.0 / u)
        if nxt <= 0.0:
            nxt = u / 2.0
        if abs(nxt - u) <= 1e-15 * nxt:
            u = nxt
            break
        u = nxt
    return kappa / u


def _orthogonal_power(c: float, kappa: float, b: float, time_domain: bool) -> float:
    expo = kappa / b
    if expo > 709.0:
        return math.inf
    base = math.expm1(expo)
    return c * base if time_domain else c * b * base


def _solve_orthogonal(users: Sequence[UserDemand], bandwidth: float,
                      noise_density: float, time_domain: bool) -> AccessSolution:
    _check_users(users)
    n = len(users)
    scheme = Scheme.TDMA if time_domain else Scheme.FDMA
    active = [i for i, u in enumerate(users) if u.rate > 0]
    shares = [0.0] * n
    powers = [0.0] * n

    if not active:
        # No demand: powers are zero; split shares uniformly to keep sum(b) = 1.
        return AccessSolution(scheme, tuple(powers), tuple(1.0 / n for _ in range(n)),
                              None, 0.0)

    cs = {i: bandwidth * noise_density / users[i].gain for i in active}
    kappas = {i: users[i].rate * LN2 / bandwidth for i in active}
    share_of = _tdma_share if time_domain else _fdma_share

    if len(active) == 1:
        i = active[0]
        shares[i] = 1.0
        powers[i] = _orthogonal_power(cs[i], kappas[i], 1.0, time_domain)
        return AccessSolution(scheme, tuple(powers), tuple(shares), None,
                              math.fsum(powers))

    def share_sum(lam: float) -> float:
        return math.fsum(share_of(lam, cs[i], kappas[i]) for i in active)

    # Marginal of the first active user at an equal split seeds the bracket.
    i0 = active[0]
    b0 = 1.0 / len(active)
    u0 = kappas[i0] / b0
    if time_domain:
        lam = cs[i0] * _safe_exp(u0) * u0 * u0 / kappas[i0]
    else:
        lam = cs[i0] * (1.0 + _safe_exp(u0) * (u0 - 1.0))
    lam_lo = lam_hi = lam
    for _ in range(MARGINAL_MAX_ITERS):
        if share_sum(lam_lo) >= 1.0:
            break
        lam_lo /= 16.0
    for _ in range(MARGINAL_MAX_ITERS):
        if share_sum(lam_hi) <= 1.0:
            break
        lam_hi *= 16.0

    total = share_sum(lam)
    for _ in range(MARGINAL_MAX_ITERS):
        lam = math.sqrt(lam_lo * lam_hi)
        total = share_sum(lam)
        if abs(total - 1.0) <= SHARE_SUM_TOL:
            break
        if total >= 1.0:
            lam_lo = lam
        else:
            lam_hi = lam

    for i in active:
        shares[i] = share_of(lam, cs[i], kappas[i]) / total
        powers[i] = _orthogonal_power(cs[i], kappas[i], shares[i], time_domain)
    return AccessSolution(scheme, tuple(powers), tuple(shares), None,
                          math.fsum(powers))


def solve_fdma(users: Sequence[UserDemand], bandwidth: float,
               noise_density: float) -> AccessSolution:
    """Minimal total power with bandwidth fractions b_k:
    P_k = (2^(R_k / (W b_k)) - 1) W n0 b_k / g_k."""
    return _solve_orthogonal(users, bandwidth, noise_density, time_domain=False)


def solve_tdma(users: Sequence[UserDemand], bandwidth: float,
               noise_density: float) -> AccessSolution:
    """Minimal total power with time fractions b_k:
    P_k = (2^(R_k / (W b_k)) - 1) W n0 / g_k."""
    return _solve_orthogonal(users, bandwidth, noise_density, time_domain=True)


def solve(scheme: Scheme | str, users: Sequence[UserDemand], bandwidth: float,
          noise_density: float) -> AccessSolution:
    scheme = Scheme(scheme)
    if scheme is Scheme.RSMA:
        return solve_rsma(users, bandwidth, noise_density)
    if scheme is Scheme.FDMA:
        return solve_fdma(users, bandwidth, noise_density)
    return solve_tdma(users, bandwidth, noise_density)


# ---------------------------------------------------------------------------
# Verification and comparison
# ---------------------------------------------------------------------------

def orthogonal_grid_oracle(users: Sequence[UserDemand], bandwidth: float,
                           noise_density: float, time_domain: bool,
                           step: float = 1e-4) -> float:
    """Two-user FDMA/TDMA optimum by exhaustive grid search over b1 (oracle)."""
    import numpy as np

    if len(users) != 2:
        raise ValidationError("grid oracle is defined for exactly two users")
    b1 = np.arange(step, 1.0, step)
    b2 = 1.0 - b1
    total = np.zeros_like(b1)
    for user, b in ((users[0], b1), (users[1], b2)):
        c = bandwidth * noise_density / user.gain
        kappa = user.rate * LN2 / bandwidth
        expo = np.minimum(kappa / b, 700.0)
        p = c * np.expm1(expo)
        if not time_domain:
            p = p * b
        total = total + p
    return float(total.min())


def _capacity(bandwidth: float, noise_power: float, received: float) -> float:
    return bandwidth * math.log2(1.0 + received / noise_power)


def brute_force_region_check(solution: AccessSolution, users: Sequence[UserDemand],
                             bandwidth: float, noise_density: float,
                             rel_tol: float = 1e-9) -> bool:
    """Re-evaluate every rate-region constraint of the solution's scheme.

    Exponential in the user count for RSMA, hence capped at 12 users.
    """
    k = len(users)
    if k > _REGION_CHECK_MAX_USERS:
        raise ValidationError(f"region check limited to {_REGION_CHECK_MAX_USERS} users")
    if len(solution.powers) != k or len(solution.shares) != k:
        return False

    def slack(x: float) -> float:
        return rel_tol * max(1.0, abs(x))

    if any(p < -1e-12 or not math.isfinite(p) for p in solution.powers):
        return False
    if abs(solution.total_power - math.fsum(solution.powers)) > slack(solution.total_power):
        return False

    n0w = noise_density * bandwidth
    if solution.scheme is Scheme.RSMA:
        for size in range(1, k + 1):
            for subset in itertools.combinations(range(k), size):
                need = math.fsum(users[i].rate for i in subset)
                got = _capacity(bandwidth, n0w,
                                math.fsum(users[i].gain * solution.powers[i] for i in subset))
                if need - got > slack(need):
                    return False
        return True

    shares = solution.shares
    if abs(math.fsum(shares) - 1.0) > SHARE_SUM_TOL:
        return False
    if any(b < -1e-12 for b in shares):
        return False
    for i, user in enumerate(users):
        b = shares[i]
        if b <= 0.0:
            if user.rate > 0.0:
                return False
            continue
        received = user.gain * solution.powers[i]
        if solution.scheme is Scheme.FDMA:
            got = b * _capacity(bandwidth, n0w * b, received)
        else:
            got = b * _capacity(bandwidth, n0w, received)
        if user.rate - got > slack(user.rate):
            return False
    return True


@dataclass(frozen=True)
class SchemeComparison:
    scheme: Scheme
    total_power: float
    pct_saved_by_rsma: float


def compare_schemes(users: Sequence[UserDemand], bandwidth: float,
                    noise_density: float) -> list[SchemeComparison]:
    """Totals of all three solvers plus the power RSMA saves against each.

    ``pct_saved_by_rsma`` for scheme X is 100 (P_X - P_RSMA) / P_X, so
    the RSMA row always reads 0.
    """
    _check_users(users)
    totals = {
        Scheme.RSMA: solve_rsma(users, bandwidth, noise_density).total_power,
        Scheme.FDMA: solve_fdma(users, bandwidth, noise_density).total_power,
        Scheme.TDMA: solve_tdma(users, bandwidth, noise_density).total_power,
    }
    rsma = totals[Scheme.RSMA]
    rows = []
    for scheme in (Scheme.RSMA, Scheme.FDMA, Scheme.TDMA):
        total = totals[scheme]
        pct = 0.0 if total <= 0 else 100.0 * (total - rsma) / total
        rows.append(SchemeComparison(scheme, total, pct))
    return rows
