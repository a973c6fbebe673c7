"""Closed-form Bellman solution, Bellman residual checks, tail and drift bounds.

Functions accept float or ``Fraction`` probabilities. With rationals the
Bellman residual and the MATP gap are computed exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .model import AgeVector, ChannelParams, as_ages, step_age, SlotOutcome
from .policies import MatpParams, ma_decide

ValueFn = Callable[[AgeVector], float]
RATIO_TOL = 1e-12
TIE_RTOL = 1e-9


def analytic_lambda(params: ChannelParams):
    """Optimal long-run peak age: sum of 1/p_i."""
    if min(params.probs) <= 0:
        raise ValueError("success probabilities must be positive")
    return sum(1 / p for p in params.probs)


def analytic_v(h, params: ChannelParams):
    """Differential cost-to-go sum_j h_j / p_j."""
    h = as_ages(h)
    h.check_dims(params)
    return sum(a / p for a, p in zip(h.ages, params.probs))


@dataclass(frozen=True)
class BellmanSolution:
    params: ChannelParams
    lambda_star: float

    def value(self, h) -> float:
        return analytic_v(h, self.params)

    __call__ = value


def bellman_solution(params: ChannelParams) -> BellmanSolution:
    return BellmanSolution(params, analytic_lambda(params))


def bellman_rhs(h, params: ChannelParams, v: ValueFn | None = None, costs=None):
    """Right-hand side of the average-cost Bellman equation at state ``h``.

    Evaluates min_i {p_i v(h reset at i) + (1 - p_i) v(h + 1) + g_i} + max_i h_i
    term by term, without using the linear form of ``v``. ``costs`` are the
    optional per-action penalties g_i. Returns ``(value, argmin)``; actions whose
    bracket is within a relative 1e-9 of the minimum count as tied and the
    lowest index wins.
    """
    h = as_ages(h)
    h.check_dims(params)
    if v is None:
        v = lambda s: analytic_v(s, params)  # noqa: E731
    n = params.n_ues
    v_fail = v(step_age(h, SlotOutcome(0, False)))
    q = []
    for i, p in enumerate(params.probs):
        term = p * v(step_age(h, SlotOutcome(i, True))) + (1 - p) * v_fail
        if costs is not None:
            term = term + costs[i]
        q.append(term)
    q_min = min(q)
    scale = max(abs(x) for x in q)
    tol = TIE_RTOL * float(scale)
    argmin = next(i for i in range(n) if q[i] - q_min <= tol)
    return q_min + max(h.ages), argmin


@dataclass
class BellmanCheck:
    n_states: int
    max_abs_residual: float
    max_rel_residual: float
    argmin_matches_max_age: bool


def verify_bellman_identity(params: ChannelParams, sample_states: Iterable) -> BellmanCheck:
    """Compare the Bellman RHS under ``analytic_v`` against lambda* + V(h) state by state."""
    lam = analytic_lambda(params)
    n = 0
    max_abs = 0.0
    max_rel = 0.0
    agree = True
    for h in sample_states:
        h = as_ages(h)
        rhs, argmin = bellman_rhs(h, params)
        lhs = lam + analytic_v(h, params)
        res = abs(rhs - lhs)
        max_abs = max(max_abs, float(res))
        max_rel = max(max_rel, float(res / abs(lhs)))
        agree = agree and argmin == ma_decide(h)
        n += 1
    if n == 0:
        raise ValueError("need at least one sample state")
    return BellmanCheck(n, max_abs, max_rel, agree)


def matp_bellman_gap(h, params: ChannelParams, matp: MatpParams):
    """|T V(h) - (lambda** + V(h))| for the penalised Bellman operator T.

    V is the unpenalised closed form and lambda** = sum 1/p_j + beta; the gap
    never exceeds beta * p_0.
    """
    rhs, _ = bellman_rhs(h, params, costs=matp.costs)
    lam2 = analytic_lambda(params) + matp.beta
    return abs(rhs - (lam2 + analytic_v(h, params)))


@dataclass(frozen=True)
class TailBoundConstants:
    c_prime: float
    c: float


def tail_constants(params: ChannelParams) -> TailBoundConstants:
    """Constants of the MA peak-age tail bound P(max h >= k) <= c k^N (1-p_min)^k.

    The per-UE constant is (1-p_min) / ((N-1)! (p_max+p_min-1)) * (r^N - 1) with
    r = p_max / (1-p_min). Since p_max+p_min-1 = (1-p_min)(r-1) this equals
    sum_{j<N} r^j / (N-1)!, which is evaluated directly; it stays finite at
    r = 1 where it takes the value N / (N-1)!. For N = 1 it is 1. The union
    bound over UEs gives c = N c'.
    """
    n = params.n_ues
    p_min = float(params.p_min)
    p_max = float(params.p_max)
    fact = math.factorial(n - 1)
    if p_min >= 1:
        # (1 - p_min)^k vanishes; keep the r = 1 value so the bound stays finite
        c_prime = n / fact
    else:
        r = p_max / (1 - p_min)
        if abs(r - 1) <= RATIO_TOL:
            c_prime = n / fact
        else:
            c_prime = math.fsum(r ** j for j in range(n)) / fact
    return TailBoundConstants(c_prime, n * c_prime)


def tail_upper_bound(k: int, params: ChannelParams) -> float:
    """MA tail bound, valid for thresholds k >= 2N; clamped to [0, 1]."""
    n = params.n_ues
    if k < 2 * n:
        raise ValueError(f"tail upper bound needs k >= 2N = {2 * n}, got {k}")
    p_min = float(params.p_min)
    if p_min >= 1:
        return 0.0
    c = tail_constants(params).c
    log_b = math.log(c) + n * math.log(k) + k * math.log1p(-p_min)
    return min(1.0, math.exp(log_b))


def tail_lower_bound(k: int, params: ChannelParams) -> float:
    """Policy-universal lower bound (1 - p_min)^k on P(max h >= k)."""
    if k < 1:
        raise ValueError(f"tail lower bound needs k >= 1, got {k}")
    return min(1.0, max(0.0, (1 - float(params.p_min)) ** k))


def ld_exponent_target(params: ChannelParams) -> float:
    """-log(1 - p_min); ``math.inf`` when p_min = 1."""
    p_min = float(params.p_min)
    if p_min >= 1:
        return math.inf
    return -math.log1p(-p_min)


def drift_upper_bound(h, params: ChannelParams) -> float:
    h = as_ages(h)
    h.check_dims(params)
    n = params.n_ues
    return 1 - float(params.p_min) / n ** 2 * sum(h.ages)


def one_step_drift(h, params: ChannelParams, ue: int) -> float:
    """E[h_avg(t+1) - h_avg(t)] when ``ue`` is scheduled, from the two delivery branches."""
    h = as_ages(h)
    n = params.n_ues
    p = float(params.probs[ue])
    now = sum(h.ages) / n
    ok = sum(step_age(h, SlotOutcome(ue, True)).ages) / n
    lost = sum(step_age(h, SlotOutcome(ue, False)).ages) / n
    return p * (ok - now) + (1 - p) * (lost - now)


def exact_ma_drift(h, params: ChannelParams) -> float:
    h = as_ages(h)
    return one_step_drift(h, params, ma_decide(h))
