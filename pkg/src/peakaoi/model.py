"""Channel model, age state and single-slot dynamics.

UE indices are 0-based; index 0 is the throughput-constrained UE (UE1 in
1-based reporting).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """Per-UE success probabilities of independent binary erasure channels.

    ``probs`` entries may be floats or ``fractions.Fraction``; the analytic
    helpers stay exact when given rationals.
    """

    probs: tuple
    n_ues: int = field(init=False)
    p_min: float = field(init=False)
    p_max: float = field(init=False)

    def __post_init__(self):
        probs = tuple(self.probs)
        if not probs:
            raise ValueError("need at least one UE")
        for p in probs:
            if not 0 < p <= 1:
                raise ValueError(f"success probability {p!r} outside (0, 1]")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "n_ues", len(probs))
        object.__setattr__(self, "p_min", min(probs))
        object.__setattr__(self, "p_max", max(probs))

    def as_array(self) -> np.ndarray:
        return np.asarray([float(p) for p in self.probs], dtype=np.float64)


@dataclass(frozen=True)
class AgeVector:
    ages: tuple

    def __post_init__(self):
        ages = tuple(int(a) for a in self.ages)
        if not ages:
            raise ValueError("empty age vector")
        if min(ages) < 1:
            raise ValueError(f"ages must be >= 1, got {ages}")
        object.__setattr__(self, "ages", ages)

    def __len__(self):
        return len(self.ages)

    def __getitem__(self, i):
        return self.ages[i]

    def __iter__(self):
        return iter(self.ages)

    @classmethod
    def initial(cls, n_ues: int) -> "AgeVector":
        return cls((1,) * n_ues)

    def check_dims(self, params: ChannelParams):
        if len(self.ages) != params.n_ues:
            raise ValueError(
                f"age vector has {len(self.ages)} entries, channel has {params.n_ues} UEs"
            )


@dataclass(frozen=True)
class SlotOutcome:
    scheduled_ue: int
    delivered: bool

    def received(self, ue: int) -> bool:
        """y_i(t): UE ``ue`` got a packet this slot."""
        return self.delivered and self.scheduled_ue == ue


def step_age(h: AgeVector, outcome: SlotOutcome) -> AgeVector:
    """Advance ages by one slot; a delivered UE resets to 1, the rest grow by 1."""
    ue = outcome.scheduled_ue
    if not 0 <= ue < len(h):
        raise IndexError(f"scheduled UE {ue} out of range for {len(h)} UEs")
    ages = [a + 1 for a in h.ages]
    if outcome.delivered:
        ages[ue] = 1
    return AgeVector(tuple(ages))


def draw_delivery(params: ChannelParams, ue: int, rng: np.random.Generator) -> bool:
    # one uniform per call; the compiled engine consumes the same stream
    if not 0 <= ue < params.n_ues:
        raise IndexError(f"UE {ue} out of range for {params.n_ues} UEs")
    return bool(rng.random() < float(params.probs[ue]))


def peak_age(h: AgeVector) -> int:
    return max(h.ages)


def sample_channel(
    n_ues: int,
    seed: int,
    p_floor: float = 0.05,
    p1: float | None = None,
) -> ChannelParams:
    """Draw i.i.d. uniform(0, 1) success probabilities, redrawing any below ``p_floor``.

    ``p1`` pins the probability of UE index 0 after sampling.
    """
    if n_ues < 1:
        raise ValueError("n_ues must be >= 1")
    if not 0 <= p_floor < 1:
        raise ValueError("p_floor must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    probs = []
    while len(probs) < n_ues:
        p = float(rng.random())
        if p > p_floor:
            probs.append(p)
    if p1 is not None:
        probs[0] = float(p1)
    return ChannelParams(tuple(probs))


def as_ages(h: AgeVector | Sequence[int]) -> AgeVector:
    return h if isinstance(h, AgeVector) else AgeVector(tuple(h))
