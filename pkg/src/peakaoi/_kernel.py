"""Compiled single-replication slot loop.

Mirrors ``model.step_age`` / ``model.draw_delivery`` and the policy rules in
``policies``; ``engine.simulate_run_reference`` runs the same loop through
those objects and must agree bit for bit.
"""
import numba
import numpy as np

MA, MW, RP, PF, MATP = 0, 1, 2, 3, 4
POLICY_CODES = {"ma": MA, "mw": MW, "rp": RP, "pf": PF, "matp": MATP}


@numba.njit(cache=True, nogil=True)
def run_slots(probs, code, costs, epsilon, pf_ewma, pf_init, burn_in,
              u_deliver, u_policy, record_states):
    n = probs.size
    t_total = u_deliver.size
    h = np.ones(n, np.int64)
    rates = np.full(n, pf_init)
    peaks = np.empty(t_total, np.int64)
    successes = np.zeros(n, np.int64)
    ue1_misses = 0
    max_age = 1
    if record_states:
        states = np.empty((t_total + 1, n), np.int64)
    else:
        states = np.empty((0, n), np.int64)

    for t in range(t_total):
        if record_states:
            states[t, :] = h
        peak = h[0]
        for i in range(1, n):
            if h[i] > peak:
                peak = h[i]
        peaks[t] = peak
        if peak > max_age:
            max_age = peak

        ue = 0
        if code == MA:
            for i in range(1, n):
                if h[i] > h[ue]:
                    ue = i
        elif code == MW:
            best = probs[0] * (h[0] * h[0])
            for i in range(1, n):
                s = probs[i] * (h[i] * h[i])
                if s > best:
                    best = s
                    ue = i
        elif code == RP:
            ue = min(int(u_policy[t] * n), n - 1)
        elif code == PF:
            best = probs[0] / rates[0]
            for i in range(1, n):
                s = probs[i] / rates[i]
                if s > best:
                    best = s
                    ue = i
        else:
            best = h[0] - costs[0]
            for i in range(1, n):
                s = h[i] - costs[i]
                if s > best:
                    best = s
                    ue = i

        delivered = u_deliver[t] < probs[ue]
        if t >= burn_in:
            if delivered:
                successes[ue] += 1
            if not (delivered and ue == 0):
                ue1_misses += 1

        for i in range(n):
            h[i] += 1
        if delivered:
            h[ue] = 1

        if code == PF:
            if pf_ewma:
                for i in range(n):
                    y = 1.0 if (delivered and i == ue) else 0.0
                    rates[i] = (1 - epsilon) * rates[i] + epsilon * y
            elif delivered:
                rates[ue] += epsilon

    if record_states:
        states[t_total, :] = h
    return peaks, successes, ue1_misses, max_age, states
