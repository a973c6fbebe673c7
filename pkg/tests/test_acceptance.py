"""Acceptance suite: one test per headline criterion, each logging a PASS/FAIL line."""
import math
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from peakaoi.analytics import (analytic_lambda, ld_exponent_target, matp_bellman_gap,
                               tail_lower_bound, tail_upper_bound, verify_bellman_identity)
from peakaoi.engine import (SimConfig, aggregate, estimate_ld_exponent, ld_fit_window,
                            probe_drift, simulate)
from peakaoi.model import AgeVector, ChannelParams, sample_channel
from peakaoi.oracle import TruncatedMdp, relative_value_iteration
from peakaoi.policies import MatpParams, ma_decide

pytestmark = pytest.mark.acceptance


def record(log, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    print(line)
    log.append(line)
    assert passed, line


@pytest.fixture(scope="module")
def tail_run():
    cfg = SimConfig(ChannelParams((0.5, 0.5)), policy="ma", slots=1_000_000, runs=10,
                    seed=2024, tail_ks=tuple(range(1, 41)))
    return cfg, aggregate(simulate(cfg, workers=4))


def test_optimal_value_reproduction(acceptance_log):
    sizes = [2, 5, 10, 20, 2, 5, 10, 20, 2, 5]
    worst, details = 0.0, []
    for seed, n in enumerate(sizes):
        params = sample_channel(n, seed=seed, p_floor=0.05)
        agg = aggregate(simulate(SimConfig(params, slots=100_000, runs=100, seed=seed), workers=4))
        lam = float(analytic_lambda(params))
        rel = abs(agg.time_avg_peak_aoi - lam) / lam
        worst = max(worst, rel)
        details.append(f"N={n}:{rel:.4f}")
    record(acceptance_log, "optimal value reproduction", worst <= 0.02,
           f"max rel error {worst:.4%} over 10 instances (tol 2%) [{' '.join(details)}]")


def test_bellman_identity_exactness(acceptance_log):
    rng = np.random.default_rng(11)
    total, worst_rel, argmin_ok = 0, 0.0, True
    per_n = 10_000 // 7 + 1
    for n in range(2, 9):
        params = ChannelParams(tuple(rng.uniform(0.05, 1.0, n)))
        small = rng.integers(1, 11, size=(per_n // 2, n))
        large = rng.integers(1, 10_001, size=(per_n - per_n // 2, n))
        states = [AgeVector(tuple(int(a) for a in row)) for row in np.vstack([small, large])]
        res = verify_bellman_identity(params, states)
        total += res.n_states
        worst_rel = max(worst_rel, res.max_rel_residual)
        argmin_ok = argmin_ok and res.argmin_matches_max_age
    record(acceptance_log, "Bellman identity exactness",
           total >= 10_000 and worst_rel <= 1e-9 and argmin_ok,
           f"{total} states, N=2..8, max rel residual {worst_rel:.2e} (tol 1e-9), "
           f"argmin == age argmax: {argmin_ok}")


def test_oracle_agreement(acceptance_log):
    parts, ok = [], True
    for probs, h_max, expected in (((0.5, 0.5), 60, 4.0), ((0.8, 0.4), 80, 3.75)):
        mdp = TruncatedMdp(ChannelParams(probs), h_max)
        rvi = relative_value_iteration(mdp)
        rel = abs(rvi.lambda_est - expected) / expected
        interior = np.flatnonzero(mdp.ages.max(axis=1) <= h_max // 2)
        bad = sum(1 for s in interior
                  if rvi.greedy_policy.flat[s] != ma_decide(AgeVector(tuple(mdp.ages[s]))))
        ok = ok and rel <= 0.01 and bad == 0
        parts.append(f"p={probs}: lambda {rvi.lambda_est:.6f} vs {expected} "
                     f"(rel {rel:.2e}), {bad}/{interior.size} interior mismatches")
    record(acceptance_log, "oracle agreement", ok, "; ".join(parts))


def test_tail_sandwich(acceptance_log, tail_run):
    cfg, agg = tail_run
    bad = []
    for k in range(4, 21):
        f, se = agg.tail_empirical[k], agg.tail_empirical_se[k]
        lo, hi = tail_lower_bound(k, cfg.params), tail_upper_bound(k, cfg.params)
        if not (lo - 3 * se <= f <= hi + 3 * se):
            bad.append(k)
    f20 = agg.tail_empirical[20]
    record(acceptance_log, "tail sandwich", not bad,
           f"k=4..20, {len(bad)} violations {bad}; at k=20 lower "
           f"{tail_lower_bound(20, cfg.params):.3g} <= {f20:.3g} <= upper "
           f"{tail_upper_bound(20, cfg.params):.3g}")


def test_ld_exponent(acceptance_log, tail_run):
    cfg, agg = tail_run
    target = ld_exponent_target(cfg.params)
    window = ld_fit_window(agg.tail_empirical, 1e-4, k_min=2 * cfg.params.n_ues)
    est = estimate_ld_exponent(agg.tail_empirical, window)
    rel = abs(est - target) / target
    assert all(agg.tail_empirical[k] > 1e-4 for k in range(window[0], window[1] + 1))
    record(acceptance_log, "LD exponent", rel <= 0.15,
           f"slope {est:.4f} vs {target:.4f} over k={window[0]}..{window[1]} "
           f"(rel {rel:.3f}, tol 0.15)")


@pytest.mark.parametrize("probs", [(0.5, 0.5), (0.9, 0.5, 0.3)])
def test_drift_inequality(acceptance_log, probs):
    params = ChannelParams(probs)
    rep = probe_drift(SimConfig(params, policy="ma", slots=1_000_000, runs=10, seed=77))
    ok = bool(rep.tested) and bool(rep.negative_region) and not rep.violations \
        and not rep.negative_region_violations
    worst = max(g.mean - g.bound for g in rep.tested)
    record(acceptance_log, f"drift inequality p={probs}", ok,
           f"{len(rep.tested)} groups tested, {len(rep.violations)} bound violations, "
           f"{len(rep.negative_region)} negative-region groups with "
           f"{len(rep.negative_region_violations)} above -1 (+3 se); "
           f"max(mean - bound) {worst:.3f}")


def _rational_instance(rng, n):
    return ChannelParams(tuple(Fraction(int(rng.integers(1, 21)), 20) for _ in range(n)))


def test_matp_gap_bound(acceptance_log):
    rng = np.random.default_rng(5)
    total, worst_ratio, ok = 0, 0, True
    instances = [_rational_instance(rng, n) for n in (2, 3, 4, 6)]
    for beta in (0, 1, 10, 100):
        count = 0
        for i in range(10_000):
            params = instances[i % len(instances)]
            matp = MatpParams.build(Fraction(beta), params)
            h = AgeVector(tuple(int(a) for a in rng.integers(1, 60, params.n_ues)))
            gap = matp_bellman_gap(h, params, matp)
            bound = beta * params.probs[0]
            ok = ok and gap <= bound
            if bound:
                worst_ratio = max(worst_ratio, gap / bound)
            count += 1
        total += count
    record(acceptance_log, "MATP approximation bound", ok,
           f"{total} exact rational evaluations over beta in {{0,1,10,100}}, "
           f"max gap/(beta p1) = {float(worst_ratio):.4f} (must be <= 1, no tolerance)")


def test_matp_throughput_saturation(acceptance_log):
    params = sample_channel(20, seed=0, p1=0.8)
    betas = [10.0 ** e for e in range(-2, 7)]
    res = []
    for b in betas:
        # same seed at every beta: common random numbers across the sweep
        agg = aggregate(simulate(SimConfig(params, policy="matp", beta=b, slots=100_000,
                                           runs=100, seed=0), workers=4))
        res.append((agg.ue1_throughput, agg.ue1_throughput_se))
    drops = [j for j in range(len(res) - 1)
             if res[j + 1][0] < res[j][0] - max(res[j][1], res[j + 1][1])]
    final = res[-1][0]
    ok = not drops and abs(final - 0.8) <= 0.02 * 0.8
    record(acceptance_log, "MATP throughput saturation", ok,
           f"ue1 throughput {' '.join(f'{t:.4f}' for t, _ in res)}; "
           f"{len(drops)} drops beyond 1 se; at beta=1e6 {final:.4f} (target 0.8 +/- 2%)")


def test_policy_ordering(acceptance_log):
    params = sample_channel(10, seed=3)
    out = {}
    for policy in ("ma", "mw", "rp"):
        agg = aggregate(simulate(SimConfig(params, policy=policy, slots=100_000, runs=100,
                                           seed=1), workers=4))
        out[policy] = (agg.time_avg_peak_aoi, agg.time_avg_peak_aoi_se)

    def gap(a, b):
        return (out[b][0] - out[a][0]) / math.hypot(out[a][1], out[b][1])

    g1, g2 = gap("ma", "mw"), gap("mw", "rp")
    record(acceptance_log, "policy ordering", g1 > 1 and g2 > 1,
           f"MA {out['ma'][0]:.3f} <= MW {out['mw'][0]:.3f} <= RP {out['rp'][0]:.3f}; "
           f"gaps {g1:.1f} and {g2:.1f} combined se (need > 1)")


def test_determinism(acceptance_log, tmp_path):
    files = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        cmd = [sys.executable, "-m", "peakaoi.cli", "simulate", "--policy", "pf",
               "--sample-probs", "--n-ues", "6", "--slots", "20000", "--runs", "8",
               "--seed", "42", "--tail-ks", "1:12", "--output", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        files.append(out)
    same = files[0].read_bytes() == files[1].read_bytes()
    same_tail = all((tmp_path / f"{n}_tail.csv").exists() for n in ("first", "second")) and \
        (tmp_path / "first_tail.csv").read_bytes() == (tmp_path / "second_tail.csv").read_bytes()
    record(acceptance_log, "determinism", same and same_tail,
           f"two separate processes, identical config and seed: results identical {same}, "
           f"tail tables identical {same_tail}")
