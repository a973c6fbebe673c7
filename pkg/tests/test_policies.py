from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from peakaoi.model import AgeVector, ChannelParams, SlotOutcome
from peakaoi.policies import (MatpParams, PfState, ProportionalFair, make_policy, ma_decide,
                              matp_decide, mw_decide, pf_decide, pf_observe, rp_decide)

H = AgeVector
ages = st.lists(st.integers(1, 500), min_size=1, max_size=10)


def test_ma_examples():
    assert ma_decide(H((3, 1, 2))) == 0
    assert ma_decide(H((5, 5, 2))) == 0
    assert ma_decide(H((1, 1, 1, 9))) == 3


def test_mw_examples():
    assert mw_decide(H((2, 3)), ChannelParams((0.9, 0.2))) == 0
    assert mw_decide(H((2, 2)), ChannelParams((0.5, 0.5))) == 0
    assert mw_decide(H((1, 10)), ChannelParams((0.99, 0.01))) == 1


def test_rp_examples():
    rng = np.random.default_rng(0)
    assert all(rp_decide(ChannelParams((0.4,)), rng) == 0 for _ in range(100))
    p = ChannelParams((0.5,) * 4)
    rng = np.random.default_rng(2024)
    counts = np.bincount([rp_decide(p, rng) for _ in range(100_000)], minlength=4)
    assert np.all(np.abs(counts / 100_000 - 0.25) < 0.01)
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    assert [rp_decide(p, a) for _ in range(200)] == [rp_decide(p, b) for _ in range(200)]


def test_pf_decide_examples():
    assert pf_decide(PfState([0.2, 0.05]), ChannelParams((0.6, 0.3))) == 1
    assert pf_decide(PfState([1, 1]), ChannelParams((0.5, 0.5))) == 0
    assert pf_decide(PfState([0.9, 0.1]), ChannelParams((0.9, 0.1))) == 0


def test_pf_observe_examples():
    s = PfState([0.5, 0.5], 0.1)
    assert pf_observe(s, SlotOutcome(0, True)).rates == pytest.approx([0.6, 0.5])
    assert pf_observe(s, SlotOutcome(0, False)).rates == [0.5, 0.5]
    s = PfState([0.5, 0.01], 0.1)
    for _ in range(10):
        s = pf_observe(s, SlotOutcome(1, True))
    assert s.rates[1] == pytest.approx(1.01)


def test_pf_ewma_variant():
    s = PfState([0.5, 0.5], 0.1)
    out = pf_observe(s, SlotOutcome(1, True), variant="ewma")
    assert out.rates == pytest.approx([0.45, 0.55])
    with pytest.raises(ValueError):
        pf_observe(s, SlotOutcome(1, True), variant="nope")


def test_matp_examples():
    p = ChannelParams((0.8, 0.5, 0.5))
    m = MatpParams.build(5, p)
    assert m.costs == pytest.approx((1.0, 5, 5))
    assert matp_decide(H((4, 7, 2)), m) == 0
    big = MatpParams.build(1e6, p)
    assert matp_decide(H((1, 999, 998)), big) == 0


@given(ages, st.integers(0, 1000))
def test_ma_shift_invariant(a, c):
    assert ma_decide(H(tuple(a))) == ma_decide(H(tuple(x + c for x in a)))


# dyadic beta and p1 keep h - g exact, so ties survive the shift
@given(ages, st.integers(0, 1000), st.integers(0, 64), st.integers(1, 8))
def test_matp_shift_invariant(a, c, beta8, p8):
    p = ChannelParams((p8 / 8,) + (0.5,) * (len(a) - 1))
    m = MatpParams.build(beta8 / 8, p)
    assert matp_decide(H(tuple(a)), m) == matp_decide(H(tuple(x + c for x in a)), m)


@given(ages, st.data(), st.integers(-6, 0))
def test_mw_scale_invariant(a, data, e):
    probs = data.draw(st.lists(st.floats(0.05, 1.0), min_size=len(a), max_size=len(a)))
    scale = 2.0 ** e
    before = mw_decide(H(tuple(a)), ChannelParams(tuple(probs)))
    after = mw_decide(H(tuple(a)), ChannelParams(tuple(p * scale for p in probs)))
    assert before == after


@given(ages, st.floats(0.01, 1.0))
def test_matp_zero_beta_is_max_age(a, p1):
    p = ChannelParams((p1,) + (0.5,) * (len(a) - 1))
    assert matp_decide(H(tuple(a)), MatpParams.build(0.0, p)) == ma_decide(H(tuple(a)))


@given(ages, st.sampled_from(["ma", "mw", "rp", "pf", "matp"]), st.integers(0, 2**31))
def test_decide_returns_valid_index(a, name, seed):
    n = len(a)
    p = ChannelParams(tuple(np.linspace(0.1, 1.0, n)))
    policy = make_policy(name, p, beta=3.0)
    ue = policy.decide(H(tuple(a)), p, np.random.default_rng(seed))
    assert 0 <= ue < n


@given(st.lists(st.tuples(st.integers(0, 3), st.booleans()), max_size=200))
def test_pf_rates_non_decreasing(outcomes):
    pf = ProportionalFair(4, epsilon=0.1)
    prev = list(pf.state.rates)
    for ue, ok in outcomes:
        pf.observe(SlotOutcome(ue, ok))
        assert all(b >= a for a, b in zip(prev, pf.state.rates))
        prev = list(pf.state.rates)


def test_stationary_action_probs():
    p = ChannelParams((0.5, 0.5, 0.5))
    h = H((2, 7, 3))
    assert list(make_policy("ma", p).action_probs(h, p)) == [0, 1, 0]
    assert np.allclose(make_policy("rp", p).action_probs(h, p), 1 / 3)
    with pytest.raises(TypeError):
        make_policy("pf", p).action_probs(h, p)


def test_matp_costs_exact_with_fractions():
    p = ChannelParams((Fraction(4, 5), Fraction(1, 2)))
    m = MatpParams.build(Fraction(5), p)
    assert m.costs == (Fraction(1), Fraction(5))


def test_unknown_policy():
    with pytest.raises(ValueError):
        make_policy("xx", ChannelParams((0.5,)))
