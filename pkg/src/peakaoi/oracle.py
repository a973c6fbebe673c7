"""Exact numerical oracle on a truncated age space.

Ages saturate at ``h_max`` so the kernel stays stochastic. States are the
lexicographically ordered grid {1..h_max}^N; tables returned by the solvers
are shaped ``(h_max,) * N`` and indexed by ``age - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import analytic_lambda
from .model import AgeVector, ChannelParams
from .policies import SchedulingPolicy

MAX_UES = 4
MAX_H = 100
MAX_STATES = 4_000_000


class IterationLimitError(RuntimeError):
    def __init__(self, iterations, span):
        super().__init__(f"no convergence after {iterations} iterations (span {span:.3e})")
        self.iterations = iterations
        self.span = span


def default_h_max(params: ChannelParams) -> int:
    return max(2, math.ceil(10 * float(analytic_lambda(params))))


@dataclass
class TruncatedMdp:
    params: ChannelParams
    h_max: int
    ages: np.ndarray = field(init=False, repr=False)
    cost: np.ndarray = field(init=False, repr=False)
    next_fail: np.ndarray = field(init=False, repr=False)
    next_success: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.params.n_ues
        if self.h_max < 2:
            raise ValueError("h_max must be >= 2")
        if n > MAX_UES or self.h_max > MAX_H or self.h_max ** n > MAX_STATES:
            raise ValueError(
                f"truncated MDP too large (N={n}, h_max={self.h_max}); "
                f"limits are N <= {MAX_UES}, h_max <= {MAX_H}, {MAX_STATES} states"
            )
        shape = (self.h_max,) * n
        grid = np.indices(shape).reshape(n, -1).T + 1
        self.ages = grid
        self.cost = grid.max(axis=1).astype(np.float64)
        bumped = np.minimum(grid + 1, self.h_max)
        self.next_fail = self.index_of(bumped)
        succ = np.empty((n, grid.shape[0]), dtype=np.int64)
        for i in range(n):
            reset = bumped.copy()
            reset[:, i] = 1
            succ[i] = self.index_of(reset)
        self.next_success = succ

    @property
    def n_states(self) -> int:
        return self.ages.shape[0]

    @property
    def shape(self):
        return (self.h_max,) * self.params.n_ues

    def index_of(self, ages) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(ages).T - 1), self.shape)

    def q_values(self, v: np.ndarray) -> np.ndarray:
        """Per-action expected continuation plus stage cost, shape (N, S)."""
        p = self.params.as_array()[:, None]
        return self.cost + p * v[self.next_success] + (1 - p) * v[self.next_fail]


@dataclass
class RviResult:
    lambda_est: float
    v_table: np.ndarray
    greedy_policy: np.ndarray
    iterations: int
    span: float


def _span(x):
    return float(x.max() - x.min())


def relative_value_iteration(mdp: TruncatedMdp, tol: float = 1e-8,
                             max_iters: int = 200_000, tie_tol: float = 1e-6) -> RviResult:
    """Relative value iteration with a span-seminorm stopping rule.

    The greedy policy breaks near-ties (within ``tie_tol`` relative to the
    largest |Q| at that state) towards the lowest index.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.zeros(mdp.n_states)
    span = math.inf
    for it in range(1, max_iters + 1):
        tv = mdp.q_values(v).min(axis=0)
        diff = tv - v
        span = _span(diff)
        v = tv - tv[0]
        if span < tol:
            lam = 0.5 * (diff.max() + diff.min())
            break
    else:
        raise IterationLimitError(max_iters, span)

    q = mdp.q_values(v)
    q_min = q.min(axis=0)
    scale = np.maximum(1.0, np.abs(q).max(axis=0))
    tied = q - q_min <= tie_tol * scale
    greedy = np.argmax(tied, axis=0)
    return RviResult(float(lam), v.reshape(mdp.shape), greedy.reshape(mdp.shape), it, span)


def action_matrix(mdp: TruncatedMdp, policy: SchedulingPolicy) -> np.ndarray:
    if not policy.stationary:
        raise TypeError(f"policy {policy.name!r} is not stationary")
    pi = np.empty((mdp.params.n_ues, mdp.n_states))
    for s, ages in enumerate(mdp.ages):
        pi[:, s] = policy.action_probs(AgeVector(tuple(ages)), mdp.params)
    return pi


def policy_evaluation(mdp: TruncatedMdp, policy: SchedulingPolicy, tol: float = 1e-8,
                      max_iters: int = 200_000) -> float:
    """Average cost of a stationary policy on the truncated chain."""
    pi = action_matrix(mdp, policy)
    v = np.zeros(mdp.n_states)
    span = math.inf
    for _ in range(max_iters):
        tv = (pi * mdp.q_values(v)).sum(axis=0)
        diff = tv - v
        span = _span(diff)
        v = tv - tv[0]
        if span < tol:
            return float(0.5 * (diff.max() + diff.min()))
    raise IterationLimitError(max_iters, span)
