"""Monte Carlo driver: replications, metrics, aggregation, tail and drift estimators."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .analytics import analytic_lambda, drift_upper_bound, exact_ma_drift
from .model import AgeVector, ChannelParams, SlotOutcome, draw_delivery, peak_age, step_age
from .policies import PF_INIT_RATE, PF_VARIANTS, POLICY_NAMES, MatpParams, make_policy


@dataclass(frozen=True)
class SimConfig:
    params: ChannelParams
    policy: str = "ma"
    beta: float = 0.0
    epsilon: float = 0.1
    pf_variant: str = "paper"
    pf_init: float = PF_INIT_RATE
    slots: int = 100_000
    runs: int = 100
    seed: int = 0
    tail_ks: tuple = ()
    burn_in: int = 0
    drift_probe: bool = False

    def __post_init__(self):
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.pf_variant not in PF_VARIANTS:
            raise ValueError(f"unknown PF variant {self.pf_variant!r}")
        if self.slots < 1 or self.runs < 1:
            raise ValueError("slots and runs must be >= 1")
        if not 0 <= self.burn_in < self.slots:
            raise ValueError("burn_in must lie in [0, slots)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.pf_init <= 0:
            raise ValueError("pf_init must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        ks = tuple(sorted(set(int(k) for k in self.tail_ks))) or default_tail_ks(self.params)
        if ks[0] < 1:
            raise ValueError("tail thresholds must be >= 1")
        object.__setattr__(self, "tail_ks", ks)

    @property
    def measured_slots(self) -> int:
        return self.slots - self.burn_in


def default_tail_ks(params: ChannelParams) -> tuple:
    top = max(2 * params.n_ues, math.ceil(4 * float(analytic_lambda(params))))
    return tuple(range(1, top + 1))


@dataclass
class RunMetrics:
    replication: int
    time_avg_peak_aoi: float
    per_ue_throughput: tuple
    ue1_throughput: float
    objective_with_penalty: float
    tail_empirical: dict
    max_age_seen: int
    drift_samples: tuple | None = field(default=None, repr=False)
    config_key: str = field(default="", repr=False)


def replication_streams(seed: int, replication: int):
    """(delivery, policy) PCG64 generators owned by one replication."""
    ss = np.random.SeedSequence(seed, spawn_key=(replication,))
    d, p = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(d)), np.random.Generator(np.random.PCG64(p))


def _raw_run(config: SimConfig, replication: int, record_states: bool):
    g_del, g_pol = replication_streams(config.seed, replication)
    probs = config.params.as_array()
    u_del = g_del.random(config.slots)
    if config.policy == "rp":
        u_pol = g_pol.random(config.slots)
    else:
        u_pol = np.empty(0)
    costs = np.asarray(MatpParams.build(config.beta, config.params).costs, dtype=np.float64)
    return _kernel.run_slots(
        probs, _kernel.POLICY_CODES[config.policy], costs, float(config.epsilon),
        config.pf_variant == "ewma", float(config.pf_init), config.burn_in,
        u_del, u_pol, record_states,
    )


def _reference_raw(config: SimConfig, replication: int, record_states: bool):
    """Slot loop built from the model and policy objects, one draw at a time."""
    params = config.params
    g_del, g_pol = replication_streams(config.seed, replication)
    policy = make_policy(config.policy, params, beta=config.beta, epsilon=config.epsilon,
                         pf_variant=config.pf_variant, pf_init=config.pf_init)
    h = AgeVector.initial(params.n_ues)
    peaks = np.empty(config.slots, np.int64)
    successes = np.zeros(params.n_ues, np.int64)
    misses = 0
    states = []
    for t in range(config.slots):
        if record_states:
            states.append(h.ages)
        peaks[t] = peak_age(h)
        ue = policy.decide(h, params, g_pol)
        outcome = SlotOutcome(ue, draw_delivery(params, ue, g_del))
        if t >= config.burn_in:
            successes[ue] += outcome.delivered
            misses += not outcome.received(0)
        h = step_age(h, outcome)
        policy.observe(outcome)
    if record_states:
        states.append(h.ages)
    states = np.asarray(states, np.int64).reshape(-1, params.n_ues)
    return peaks, successes, misses, int(peaks.max()), states


def _metrics(config, replication, raw) -> RunMetrics:
    peaks, successes, misses, max_age, states = raw
    b = config.burn_in
    kept = peaks[b:]
    m = kept.size
    avg_peak = float(kept.mean())
    ge = np.bincount(kept)[::-1].cumsum()[::-1]
    tail = {k: (float(ge[k]) / m if k < ge.size else 0.0) for k in config.tail_ks}
    thr = tuple(float(s) / m for s in successes)
    drift = None
    if config.drift_probe:
        sums = states[b:].sum(axis=1)
        drift = (sums[:-1], np.diff(sums) / config.params.n_ues)
    return RunMetrics(
        replication=replication,
        time_avg_peak_aoi=avg_peak,
        per_ue_throughput=thr,
        ue1_throughput=thr[0],
        objective_with_penalty=avg_peak + config.beta * (misses / m),
        tail_empirical=tail,
        max_age_seen=int(max_age),
        drift_samples=drift,
        config_key=repr(config),
    )


def simulate_run(config: SimConfig, replication: int) -> RunMetrics:
    """One replication of T slots: decide, draw delivery, record, age update, observe."""
    raw = _raw_run(config, replication, config.drift_probe)
    return _metrics(config, replication, raw)


def simulate_run_reference(config: SimConfig, replication: int) -> RunMetrics:
    raw = _reference_raw(config, replication, config.drift_probe)
    return _metrics(config, replication, raw)


def simulate(config: SimConfig, workers: int = 1, replications=None) -> list:
    """All replications, returned in replication order regardless of ``workers``."""
    reps = list(range(config.runs)) if replications is None else list(replications)
    if workers <= 1:
        return [simulate_run(config, r) for r in reps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: simulate_run(config, r), reps))


def _mean_se(values):
    vals = [float(v) for v in values]
    n = len(vals)
    mean = math.fsum(vals) / n
    if n < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class AggregateMetrics:
    n_runs: int
    time_avg_peak_aoi: float
    time_avg_peak_aoi_se: float
    ue1_throughput: float
    ue1_throughput_se: float
    objective_with_penalty: float
    objective_with_penalty_se: float
    per_ue_throughput: tuple
    per_ue_throughput_se: tuple
    tail_empirical: dict
    tail_empirical_se: dict
    max_age_seen: int
    runs: list = field(repr=False, compare=False, default_factory=list)


def aggregate(runs) -> AggregateMetrics:
    """Pointwise mean and standard error across replications.

    Means use exactly rounded summation, so the result does not depend on
    the order of ``runs``.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("nothing to aggregate")
    keys = {r.config_key for r in runs}
    if len(keys) > 1:
        raise ValueError("cannot aggregate runs from different configurations")
    ks = list(runs[0].tail_empirical)
    if any(list(r.tail_empirical) != ks for r in runs):
        raise ValueError("tail estimates use different threshold grids")
    n_ues = len(runs[0].per_ue_throughput)
    if any(len(r.per_ue_throughput) != n_ues for r in runs):
        raise ValueError("runs disagree on the number of UEs")

    peak = _mean_se(r.time_avg_peak_aoi for r in runs)
    ue1 = _mean_se(r.ue1_throughput for r in runs)
    obj = _mean_se(r.objective_with_penalty for r in runs)
    thr = [_mean_se(r.per_ue_throughput[i] for r in runs) for i in range(n_ues)]
    tail = {k: _mean_se(r.tail_empirical[k] for r in runs) for k in ks}
    return AggregateMetrics(
        n_runs=len(runs),
        time_avg_peak_aoi=peak[0],
        time_avg_peak_aoi_se=peak[1],
        ue1_throughput=ue1[0],
        ue1_throughput_se=ue1[1],
        objective_with_penalty=obj[0],
        objective_with_penalty_se=obj[1],
        per_ue_throughput=tuple(m for m, _ in thr),
        per_ue_throughput_se=tuple(s for _, s in thr),
        tail_empirical={k: v[0] for k, v in tail.items()},
        tail_empirical_se={k: v[1] for k, v in tail.items()},
        max_age_seen=max(r.max_age_seen for r in runs),
        runs=runs,
    )


class EstimationError(ValueError):
    pass


def estimate_ld_exponent(tail: dict, k_window=None) -> float:
    """Least-squares slope of -log P(peak >= k) against k.

    ``k_window`` is an inclusive ``(k_lo, k_hi)`` pair; thresholds with zero
    frequency are dropped and at least three must remain.
    """
    if k_window is None:
        lo, hi = -math.inf, math.inf
    else:
        lo, hi = k_window
    pts = [(k, f) for k, f in sorted(tail.items()) if lo <= k <= hi and f > 0]
    if len(pts) < 3:
        raise EstimationError(f"need >= 3 positive tail points in window, got {len(pts)}")
    k = np.array([p[0] for p in pts], dtype=np.float64)
    y = -np.log(np.array([p[1] for p in pts]))
    slope, _ = np.polyfit(k, y, 1)
    return float(slope)


def tail_window(tail: dict, min_freq: float) -> tuple:
    """Inclusive range of thresholds, from the smallest k upward, whose frequency exceeds ``min_freq``."""
    ks = sorted(tail)
    good = []
    for k in ks:
        if tail[k] > min_freq:
            good.append(k)
        elif good:
            break
    if not good:
        raise EstimationError(f"no tail frequency above {min_freq}")
    return good[0], good[-1]


def ld_fit_window(tail: dict, min_freq: float = 1e-4, k_min: int = 1) -> tuple:
    """Upper half of the well-estimated tail, never starting below ``k_min``.

    The tail decays like k^(N-1) (1-p_min)^k, so the fitted slope converges
    to the exponent only as k grows; the low half of the range is dropped.
    """
    lo, hi = tail_window(tail, min_freq)
    lo = max(lo, k_min, math.ceil(hi / 2))
    if hi - lo < 2:
        raise EstimationError(f"window [{lo}, {hi}] holds fewer than 3 thresholds")
    return lo, hi


@dataclass
class DriftGroup:
    state: tuple
    count: int
    mean: float
    stderr: float
    bound: float
    exact: float
    total: float = field(default=0.0, repr=False)
    total_sq: float = field(default=0.0, repr=False)

    @property
    def state_sum(self) -> int:
        return sum(self.state)


@dataclass
class DriftSumGroup:
    """Observations pooled over all visited states with the same age sum."""
    state_sum: int
    count: int
    mean: float
    stderr: float
    bound: float


def _pooled(g_list, bound) -> DriftSumGroup:
    c = sum(g.count for g in g_list)
    s1 = math.fsum(g.total for g in g_list)
    s2 = math.fsum(g.total_sq for g in g_list)
    mean = s1 / c
    se = math.sqrt(max(0.0, (s2 - c * mean * mean) / (c - 1)) / c) if c > 1 else math.nan
    return DriftSumGroup(g_list[0].state_sum, c, mean, se, bound)


@dataclass
class DriftReport:
    """Per-state groups plus the same data pooled by age sum.

    The bound depends on the state only through its age sum, so the bound
    checks run on the pooled groups; per-state groups are kept for the
    comparison against the exact expectation.
    """
    params: ChannelParams
    groups: list
    z: float
    min_count: int

    @property
    def sum_groups(self) -> list:
        by_sum = {}
        for g in self.groups:
            by_sum.setdefault(g.state_sum, []).append(g)
        return [_pooled(gs, gs[0].bound) for _, gs in sorted(by_sum.items())]

    @property
    def tested(self) -> list:
        return [g for g in self.sum_groups if g.count >= self.min_count]

    @property
    def tested_states(self) -> list:
        return [g for g in self.groups if g.count >= self.min_count]

    @property
    def violations(self) -> list:
        """Pooled groups whose mean drift exceeds the bound by more than z standard errors."""
        return [g for g in self.tested if g.mean - g.bound > self.z * g.stderr + 1e-12]

    @property
    def negative_region(self) -> list:
        n = self.params.n_ues
        thresh = 2 * n * n / float(self.params.p_min)
        return [g for g in self.tested if g.state_sum >= thresh]

    @property
    def negative_region_violations(self) -> list:
        return [g for g in self.negative_region if g.mean > -1 + self.z * g.stderr + 1e-12]


def _group_rows(rows: np.ndarray):
    """np.unique over rows, via a packed int64 key when the ages fit."""
    base = int(rows.max()) + 1
    n = rows.shape[1]
    if n * math.log2(base) >= 62:
        uniq, inv, cnt = np.unique(rows, axis=0, return_inverse=True, return_counts=True)
        return uniq, inv.reshape(-1), cnt
    weights = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
    keys, inv, cnt = np.unique(rows @ weights, return_inverse=True, return_counts=True)
    uniq = np.empty((keys.size, n), np.int64)
    rem = keys.copy()
    for j in range(n - 1, -1, -1):
        uniq[:, j] = rem % base
        rem //= base
    return uniq, inv.reshape(-1), cnt


def probe_drift(config: SimConfig, z: float = 3.0, min_count: int = 1000,
                replications=None) -> DriftReport:
    """Group observed one-slot changes of the mean age by visited state under MA.

    Each group's mean is compared with the drift upper bound at that state
    and with the exact two-branch expectation.
    """
    if config.policy != "ma":
        raise ValueError("drift probing is defined for the MA policy")
    n = config.params.n_ues
    reps = range(config.runs) if replications is None else replications
    acc = {}
    for r in reps:
        states = _raw_run(config, r, True)[4][config.burn_in:]
        sums = states.sum(axis=1)
        delta = np.diff(sums) / n
        uniq, inv, cnt = _group_rows(states[:-1])
        s1 = np.bincount(inv, weights=delta)
        s2 = np.bincount(inv, weights=delta * delta)
        for row, c, a, b in zip(map(tuple, uniq.tolist()), cnt, s1, s2):
            prev = acc.get(row, (0, 0.0, 0.0))
            acc[row] = (prev[0] + int(c), prev[1] + a, prev[2] + b)

    groups = []
    for state in sorted(acc):
        c, s1, s2 = acc[state]
        mean = s1 / c
        if c > 1:
            var = max(0.0, (s2 - c * mean * mean) / (c - 1))
            se = math.sqrt(var / c)
        else:
            se = math.nan
        groups.append(DriftGroup(state, c, mean, se,
                                 drift_upper_bound(state, config.params),
                                 exact_ma_drift(state, config.params), s1, s2))
    return DriftReport(config.params, groups, z, min_count)
