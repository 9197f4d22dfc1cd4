"""Right-hand sides of the expected-gradient-norm guarantees.

Both bounds hold for the output x_hat drawn with probability
eta_k / sum_t eta_t from x^0..x^{K-1}. The Lyapunov weights that appear in
them (gamma_0, alpha_0, theta_0) are evaluated at their smallest admissible
values; they have no role in the algorithms themselves.
"""

from __future__ import annotations

from .errors import InvalidArgument
from .schedule import DistSchedule, ParamSchedule


def _eta_sum(schedule, K: int) -> float:
    if K < 1:
        raise InvalidArgument("K must be >= 1")
    return sum(schedule.eta(k) for k in range(K))


def theoretical_bound(delta0: float, G0: float, schedule: ParamSchedule, K: int) -> float:
    """2 D0 / S + (n - b0)(4 gamma0 + 2 alpha0 b0) G0 / (n b0 S), S = sum eta_k.

    gamma0 = eta_0 / (2 lam_1),  alpha0 = 2 n lam_1 eta_0 / b_1^2.
    """
    if not schedule.theoretical:
        raise InvalidArgument("bound only holds for a theoretical schedule")
    S = _eta_sum(schedule, K)
    n, b0 = schedule.n, schedule.batch(0)
    first = 2.0 * delta0 / S
    if b0 == n:
        return first
    eta0, lam1, b1 = schedule.eta(0), schedule.lam(1), schedule.batch(1)
    gamma0 = eta0 / (2.0 * lam1)
    alpha0 = 2.0 * n * lam1 * eta0 / b1**2
    return first + (n - b0) * (4.0 * gamma0 + 2.0 * alpha0 * b0) * G0 / (n * b0 * S)


def theoretical_bound_dist(delta0: float, G0p: float, schedule: DistSchedule, K: int) -> float:
    """2 D0 / S + (nm - s0 b0) eta_0 theta0 G0' / (nm s0 b0 S).

    theta0 = nm / ((nm - 1) lam_1) + 4 nm lam_1 s0 b0 / (s1 b1)^2.
    """
    if not schedule.theoretical:
        raise InvalidArgument("bound only holds for a theoretical schedule")
    S = _eta_sum(schedule, K)
    nm = schedule.n * schedule.m
    sb0 = schedule.clients(0) * schedule.batch(0)
    first = 2.0 * delta0 / S
    if sb0 == nm:
        return first
    lam1 = schedule.lam(1)
    sb1 = schedule.clients(1) * schedule.batch(1)
    theta0 = nm / ((nm - 1) * lam1) + 4.0 * nm * lam1 * sb0 / sb1**2
    return first + (nm - sb0) * schedule.eta(0) * theta0 * G0p / (nm * sb0 * S)
