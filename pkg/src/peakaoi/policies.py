"""Scheduling policies: MA, MW, RP, PF and MATP.

All argmax rules break ties towards the lowest UE index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AgeVector, ChannelParams, SlotOutcome

POLICY_NAMES = ("ma", "mw", "rp", "pf", "matp")
PF_INIT_RATE = 0.01
PF_VARIANTS = ("paper", "ewma")


def _argmax(scores) -> int:
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def ma_decide(h: AgeVector) -> int:
    return _argmax(h.ages)


def mw_decide(h: AgeVector, params: ChannelParams) -> int:
    return _argmax([float(p) * (a * a) for p, a in zip(params.probs, h.ages)])


def rp_decide(params: ChannelParams, rng: np.random.Generator) -> int:
    n = params.n_ues
    return min(int(rng.random() * n), n - 1)


@dataclass
class PfState:
    rates: list
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if min(self.rates) <= 0:
            raise ValueError("PF rates must be positive")


def pf_decide(state: PfState, params: ChannelParams) -> int:
    return _argmax([float(p) / r for p, r in zip(params.probs, state.rates)])


def pf_observe(state: PfState, outcome: SlotOutcome, variant: str = "paper") -> PfState:
    """Update smoothed rates with this slot's throughput y_i in {0, 1}.

    ``"paper"`` is the additive rule R += eps * y. ``"ewma"`` is the
    exponentially weighted form R = (1 - eps) R + eps * y applied to every UE.
    """
    eps = state.epsilon
    if variant == "paper":
        rates = list(state.rates)
        if outcome.delivered:
            rates[outcome.scheduled_ue] += eps
    elif variant == "ewma":
        rates = [
            (1 - eps) * r + eps * (1.0 if outcome.received(i) else 0.0)
            for i, r in enumerate(state.rates)
        ]
    else:
        raise ValueError(f"unknown PF variant {variant!r}")
    return PfState(rates, eps)


@dataclass(frozen=True)
class MatpParams:
    beta: float
    costs: tuple

    @classmethod
    def build(cls, beta: float, params: ChannelParams) -> "MatpParams":
        """g_0 = beta (1 - p_0) for the throughput UE, beta for everyone else."""
        if beta < 0:
            raise ValueError("beta must be non-negative")
        costs = [beta] * params.n_ues
        costs[0] = beta * (1 - params.probs[0])
        return cls(beta, tuple(costs))


def matp_decide(h: AgeVector, matp: MatpParams) -> int:
    return _argmax([a - g for a, g in zip(h.ages, matp.costs)])


class SchedulingPolicy:
    """Decision rule shared by the simulator and the MDP oracle."""

    name = ""
    stationary = True

    def decide(self, h: AgeVector, params: ChannelParams, rng=None) -> int:
        raise NotImplementedError

    def observe(self, outcome: SlotOutcome):
        pass

    def reset(self):
        pass

    def action_probs(self, h: AgeVector, params: ChannelParams) -> np.ndarray:
        # deterministic stationary rules put all mass on decide()
        out = np.zeros(params.n_ues)
        out[self.decide(h, params)] = 1.0
        return out


class MaxAge(SchedulingPolicy):
    name = "ma"

    def decide(self, h, params, rng=None):
        return ma_decide(h)


class MaxWeight(SchedulingPolicy):
    name = "mw"

    def decide(self, h, params, rng=None):
        return mw_decide(h, params)


class Randomized(SchedulingPolicy):
    name = "rp"

    def decide(self, h, params, rng=None):
        return rp_decide(params, rng)

    def action_probs(self, h, params):
        return np.full(params.n_ues, 1.0 / params.n_ues)


class ProportionalFair(SchedulingPolicy):
    name = "pf"
    stationary = False

    def __init__(self, n_ues: int, epsilon: float = 0.1, variant: str = "paper",
                 init_rate: float = PF_INIT_RATE):
        if variant not in PF_VARIANTS:
            raise ValueError(f"unknown PF variant {variant!r}")
        self.n_ues = n_ues
        self.epsilon = epsilon
        self.variant = variant
        self.init_rate = init_rate
        self.reset()

    def reset(self):
        self.state = PfState([self.init_rate] * self.n_ues, self.epsilon)

    def decide(self, h, params, rng=None):
        return pf_decide(self.state, params)

    def observe(self, outcome):
        self.state = pf_observe(self.state, outcome, self.variant)

    def action_probs(self, h, params):
        raise TypeError("PF depends on its rate history and has no stationary action map")


class MaxAgeThroughput(SchedulingPolicy):
    name = "matp"

    def __init__(self, matp: MatpParams):
        self.matp = matp

    def decide(self, h, params, rng=None):
        return matp_decide(h, self.matp)


def make_policy(name: str, params: ChannelParams, beta: float = 0.0,
                epsilon: float = 0.1, pf_variant: str = "paper",
                pf_init: float = PF_INIT_RATE) -> SchedulingPolicy:
    if name == "ma":
        return MaxAge()
    if name == "mw":
        return MaxWeight()
    if name == "rp":
        return Randomized()
    if name == "pf":
        return ProportionalFair(params.n_ues, epsilon, pf_variant, pf_init)
    if name == "matp":
        return MaxAgeThroughput(MatpParams.build(beta, params))
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
