"""Peak age-of-information scheduling over binary erasure channels."""
from .model import AgeVector, ChannelParams, SlotOutcome, draw_delivery, peak_age, sample_channel, step_age
from .policies import make_policy
from .engine import SimConfig, aggregate, simulate, simulate_run

__all__ = [
    "AgeVector", "ChannelParams", "SlotOutcome", "draw_delivery", "peak_age",
    "sample_channel", "step_age", "make_policy", "SimConfig", "aggregate",
    "simulate", "simulate_run",
]
