"""Command-line entry point: ``peakaoi <subcommand> [flags]``.

Exit codes: 0 success, 1 a verification check failed, 2 usage error,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

import numpy as np

from . import configfile, outputs
from .analytics import (analytic_lambda, ld_exponent_target, matp_bellman_gap,
                        tail_lower_bound, tail_upper_bound, verify_bellman_identity)
from .engine import (EstimationError, SimConfig, aggregate, estimate_ld_exponent,
                     ld_fit_window, probe_drift, simulate)
from .model import AgeVector, ChannelParams, sample_channel
from .oracle import IterationLimitError, TruncatedMdp, default_h_max, policy_evaluation, relative_value_iteration
from .policies import PF_VARIANTS, POLICY_NAMES, MatpParams, MaxAge, ma_decide

SUBCOMMANDS = ("simulate", "sweep", "verify-bellman", "verify-oracle", "verify-bounds")
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s) -> tuple:
    return tuple(float(x) for x in str(s).split(",") if x.strip())


def _ks(s) -> tuple:
    out = []
    for part in str(s).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _names(s) -> tuple:
    return tuple(x.strip().lower() for x in str(s).split(",") if x.strip())


def _opt(conv):
    def inner(s):
        if s is None or (isinstance(s, str) and not s.strip()):
            return None
        return conv(s)
    return inner


@dataclass(frozen=True)
class ExperimentSpec:
    subcommand: str
    policy: tuple = ("ma",)
    n_ues: int | None = None
    probs: tuple | None = None
    sample_probs: bool = False
    p_floor: float = 0.05
    p1: float | None = None
    slots: int = 100_000
    runs: int = 100
    beta: float = 0.0
    epsilon: float = 0.1
    pf_variant: str = "paper"
    seed: int = 0
    tail_ks: tuple = ()
    burn_in: int = 0
    sweep_n: tuple = ()
    sweep_beta: tuple = ()
    samples: int = 1000
    h_max: int | None = None
    tol: float = 1e-8
    workers: int = 1
    output: str | None = None
    format: str = "csv"
    verbose: bool = False

    def config_items(self) -> dict:
        d = asdict(self)
        d.pop("subcommand")
        return d

    def to_config_text(self) -> str:
        return configfile.dump(self.config_items())


CONVERTERS = {
    "policy": _names,
    "n_ues": _opt(int),
    "probs": _opt(_floats),
    "sample_probs": _bool,
    "p_floor": float,
    "p1": _opt(float),
    "slots": int,
    "runs": int,
    "beta": float,
    "epsilon": float,
    "pf_variant": str,
    "seed": int,
    "tail_ks": _ks,
    "burn_in": int,
    "sweep_n": _ks,
    "sweep_beta": _floats,
    "samples": int,
    "h_max": _opt(int),
    "tol": float,
    "workers": int,
    "output": _opt(str),
    "format": str,
    "verbose": _bool,
}
assert set(CONVERTERS) == {f.name for f in fields(ExperimentSpec)} - {"subcommand"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    a = common.add_argument
    a("--config", default=S, help="key = value file; explicit flags take precedence")
    a("--policy", default=S, help=f"one of {','.join(POLICY_NAMES)} (comma list for sweep)")
    a("--n-ues", default=S)
    a("--probs", default=S, help="comma-separated success probabilities")
    a("--sample-probs", action="store_true", default=S,
      help="draw probabilities i.i.d. uniform(0,1) from --seed")
    a("--p-floor", default=S, help="resample sampled probabilities at or below this value")
    a("--p1", default=S, help="pin the probability of UE1 after sampling")
    a("--slots", default=S)
    a("--runs", default=S)
    a("--beta", default=S)
    a("--epsilon", default=S)
    a("--pf-variant", default=S, choices=PF_VARIANTS)
    a("--seed", default=S)
    a("--tail-ks", default=S, help="thresholds k, e.g. 4:20 or 1,2,5")
    a("--burn-in", default=S)
    a("--sweep-n", default=S, help="sweep axis over N, e.g. 2,5,10,20")
    a("--sweep-beta", default=S, help="sweep axis over beta")
    a("--samples", default=S)
    a("--h-max", default=S)
    a("--tol", default=S)
    a("--workers", default=S)
    a("--output", default=S)
    a("--format", default=S, choices=("csv", "json"))
    a("--verbose", action="store_true", default=S)

    parser = argparse.ArgumentParser(prog="peakaoi", description="Peak-AoI scheduling experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _validate(spec: ExperimentSpec):
    def need(cond, msg):
        if not cond:
            raise UsageError(msg)

    need(spec.policy, "--policy must not be empty")
    for p in spec.policy:
        need(p in POLICY_NAMES, f"unknown policy {p!r}")
    if spec.subcommand != "sweep":
        need(len(spec.policy) == 1, "only sweep accepts several policies")
    need(spec.pf_variant in PF_VARIANTS, f"unknown PF variant {spec.pf_variant!r}")
    need(spec.format in ("csv", "json"), f"unknown format {spec.format!r}")
    need(spec.slots >= 1, "--slots must be >= 1")
    need(spec.runs >= 1, "--runs must be >= 1")
    need(0 <= spec.burn_in < spec.slots, "--burn-in must lie in [0, slots)")
    need(spec.beta >= 0, "--beta must be >= 0")
    need(0 < spec.epsilon <= 1, "--epsilon must lie in (0, 1]")
    need(0 <= spec.p_floor < 1, "--p-floor must lie in [0, 1)")
    need(spec.seed >= 0, "--seed must be >= 0")
    need(spec.samples >= 1, "--samples must be >= 1")
    need(spec.tol > 0, "--tol must be positive")
    need(spec.workers >= 1, "--workers must be >= 1")
    need(spec.h_max is None or spec.h_max >= 2, "--h-max must be >= 2")
    need(all(k >= 1 for k in spec.tail_ks), "--tail-ks entries must be >= 1")
    need(all(b >= 0 for b in spec.sweep_beta), "--sweep-beta entries must be >= 0")
    need(all(n >= 1 for n in spec.sweep_n), "--sweep-n entries must be >= 1")
    if spec.p1 is not None:
        need(0 < spec.p1 <= 1, "--p1 must lie in (0, 1]")
    if spec.probs is not None:
        need(not spec.sample_probs, "--probs and --sample-probs are exclusive")
        need(all(0 < p <= 1 for p in spec.probs), "--probs entries must lie in (0, 1]")
        need(len(spec.probs) >= 1, "--probs is empty")
        if spec.n_ues is not None:
            need(spec.n_ues == len(spec.probs),
                 f"--n-ues {spec.n_ues} does not match {len(spec.probs)} probabilities")
        need(not spec.sweep_n, "--sweep-n needs --sample-probs")
    if spec.n_ues is not None:
        need(spec.n_ues >= 1, "--n-ues must be >= 1")
    if spec.subcommand == "sweep":
        need(bool(spec.sweep_n) != bool(spec.sweep_beta),
             "sweep needs exactly one of --sweep-n or --sweep-beta")
        if spec.sweep_n:
            need(spec.sample_probs, "--sweep-n needs --sample-probs")
        else:
            need(spec.probs is not None or (spec.sample_probs and spec.n_ues is not None),
                 "give --probs, or --sample-probs with --n-ues")
    else:
        need(not spec.sweep_n and not spec.sweep_beta, "sweep axes are only valid for sweep")
        need(spec.probs is not None or (spec.sample_probs and spec.n_ues is not None),
             "give --probs, or --sample-probs with --n-ues")


def spec_from_mapping(subcommand: str, values: dict) -> ExperimentSpec:
    kwargs = {}
    for key, raw in values.items():
        if key not in CONVERTERS:
            raise UsageError(f"unknown setting {key!r}")
        try:
            kwargs[key] = CONVERTERS[key](raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r} ({exc})") from None
    spec = ExperimentSpec(subcommand, **kwargs)
    _validate(spec)
    return spec


def parse_args(argv=None) -> ExperimentSpec:
    """Parse argv into a validated spec; usage problems exit with status 2."""
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    subcommand = ns.pop("subcommand")
    values = {}
    if "config" in ns:
        path = ns.pop("config")
        try:
            values.update(configfile.load(path))
        except OSError as exc:
            print(f"peakaoi: cannot read config {path}: {exc}", file=sys.stderr)
            raise SystemExit(EXIT_IO)
        except ValueError as exc:
            parser.error(str(exc))
    values.update(ns)
    try:
        return spec_from_mapping(subcommand, values)
    except UsageError as exc:
        parser.error(str(exc))


def resolve_channel(spec: ExperimentSpec, n_ues: int | None = None) -> ChannelParams:
    if spec.probs is not None:
        probs = list(spec.probs)
        if spec.p1 is not None:
            probs[0] = spec.p1
        return ChannelParams(tuple(probs))
    return sample_channel(n_ues or spec.n_ues, spec.seed, spec.p_floor, spec.p1)


def sim_config(spec: ExperimentSpec, params: ChannelParams, policy: str, beta=None,
               tail_ks=None) -> SimConfig:
    return SimConfig(
        params=params, policy=policy, beta=spec.beta if beta is None else beta,
        epsilon=spec.epsilon, pf_variant=spec.pf_variant, slots=spec.slots,
        runs=spec.runs, seed=spec.seed, tail_ks=spec.tail_ks if tail_ks is None else tail_ks,
        burn_in=spec.burn_in,
    )


def _result_row(cfg: SimConfig, agg) -> dict:
    return {
        "policy": cfg.policy,
        "n_ues": cfg.params.n_ues,
        "slots": cfg.slots,
        "runs": cfg.runs,
        "seed": cfg.seed,
        "beta": cfg.beta,
        "epsilon": cfg.epsilon,
        "time_avg_peak_aoi": agg.time_avg_peak_aoi,
        "stderr": agg.time_avg_peak_aoi_se,
        "analytic_lambda": float(analytic_lambda(cfg.params)),
        "ue1_throughput": agg.ue1_throughput,
        "objective_eq7": agg.objective_with_penalty,
    }


def _tail_rows(cfg: SimConfig, agg) -> list:
    n = cfg.params.n_ues
    rows = []
    for k in cfg.tail_ks:
        upper = tail_upper_bound(k, cfg.params) if (cfg.policy == "ma" and k >= 2 * n) else None
        rows.append({"k": k, "empirical": agg.tail_empirical[k],
                     "lower_bound": tail_lower_bound(k, cfg.params), "upper_bound": upper})
    return rows


def _replication_rows(agg) -> list:
    return [{"replication": r.replication, "time_avg_peak_aoi": r.time_avg_peak_aoi,
             "ue1_throughput": r.ue1_throughput, "objective_eq7": r.objective_with_penalty,
             "per_ue_throughput": list(r.per_ue_throughput), "max_age_seen": r.max_age_seen}
            for r in agg.runs]


def _probs_meta(params: ChannelParams) -> str:
    return configfile.format_value(tuple(float(p) for p in params.probs))


def cmd_simulate(spec: ExperimentSpec):
    params = resolve_channel(spec)
    cfg = sim_config(spec, params, spec.policy[0])
    agg = aggregate(simulate(cfg, workers=spec.workers))
    meta = {"realized_probs": _probs_meta(params)}
    row = _result_row(cfg, agg)
    tail = _tail_rows(cfg, agg)
    reps = _replication_rows(agg) if spec.verbose else None
    outputs.write_result(spec, [row], tail, meta, reps)
    print(f"{cfg.policy}: peak-AoI {row['time_avg_peak_aoi']:.6g} +/- {row['stderr']:.2g} "
          f"(analytic optimum {row['analytic_lambda']:.6g})")
    return EXIT_OK


def cmd_sweep(spec: ExperimentSpec):
    rows, meta, reps = [], {}, []
    if spec.sweep_n:
        points = [(n, resolve_channel(spec, n), None) for n in spec.sweep_n]
    else:
        params = resolve_channel(spec)
        points = [(params.n_ues, params, b) for b in spec.sweep_beta]
    for n, params, beta in points:
        meta[f"realized_probs[n_ues={n}]"] = _probs_meta(params)
        for policy in spec.policy:
            cfg = sim_config(spec, params, policy, beta=beta)
            agg = aggregate(simulate(cfg, workers=spec.workers))
            rows.append(_result_row(cfg, agg))
            if spec.verbose:
                reps.extend({"policy": policy, "n_ues": n, "beta": cfg.beta, **r}
                            for r in _replication_rows(agg))
            print(f"{policy} N={n} beta={cfg.beta:g}: peak-AoI {agg.time_avg_peak_aoi:.6g} "
                  f"ue1 throughput {agg.ue1_throughput:.4f}")
    outputs.write_result(spec, rows, None, meta, reps if spec.verbose else None)
    return EXIT_OK


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


def _finish_checks(spec: ExperimentSpec, checks: list, meta: dict, tail=None) -> int:
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: {c.value:.6g} (threshold {c.threshold:.6g})")
    outputs.write_checks(spec, [asdict(c) for c in checks], meta, tail)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def random_states(n_ues: int, count: int, max_age: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    return [AgeVector(tuple(int(a) for a in row))
            for row in rng.integers(1, max_age + 1, size=(count, n_ues))]


def cmd_verify_bellman(spec: ExperimentSpec):
    params = resolve_channel(spec)
    max_age = spec.h_max or 100
    states = random_states(params.n_ues, spec.samples, max_age, spec.seed)
    res = verify_bellman_identity(params, states)
    checks = [
        Check("bellman_max_rel_residual", res.max_rel_residual, 1e-9, res.max_rel_residual <= 1e-9),
        Check("bellman_argmin_is_max_age", float(res.argmin_matches_max_age), 1.0,
              res.argmin_matches_max_age),
    ]
    if spec.beta > 0:
        # exact rational arithmetic: the gap bound is an exact inequality
        exact = ChannelParams(tuple(Fraction(p) for p in params.probs))
        beta = Fraction(spec.beta)
        matp = MatpParams.build(beta, exact)
        worst = max(matp_bellman_gap(h, exact, matp) for h in states)
        bound = beta * exact.probs[0]
        checks.append(Check("matp_gap_max", float(worst), float(bound), worst <= bound))
    meta = {"realized_probs": _probs_meta(params), "max_abs_residual": repr(res.max_abs_residual)}
    return _finish_checks(spec, checks, meta)


def cmd_verify_oracle(spec: ExperimentSpec):
    params = resolve_channel(spec)
    lam = float(analytic_lambda(params))
    h_max = spec.h_max or default_h_max(params)
    mdp = TruncatedMdp(params, h_max)
    rvi = relative_value_iteration(mdp, tol=spec.tol)
    rel = abs(rvi.lambda_est - lam) / lam
    interior = mdp.ages.max(axis=1) <= h_max // 2
    mismatches = sum(
        1 for s in np.flatnonzero(interior)
        if rvi.greedy_policy.flat[s] != ma_decide(AgeVector(tuple(mdp.ages[s])))
    )
    ma_value = policy_evaluation(mdp, MaxAge(), tol=spec.tol)
    checks = [
        Check("rvi_lambda_rel_error", rel, 0.01, rel <= 0.01),
        Check("greedy_vs_ma_interior_mismatches", float(mismatches), 0.0, mismatches == 0),
        Check("ma_evaluation_vs_rvi", abs(ma_value - rvi.lambda_est), 10 * spec.tol,
              abs(ma_value - rvi.lambda_est) <= 10 * spec.tol),
    ]
    meta = {"realized_probs": _probs_meta(params), "h_max": str(h_max),
            "lambda_est": repr(rvi.lambda_est), "analytic_lambda": repr(lam),
            "iterations": str(rvi.iterations)}
    return _finish_checks(spec, checks, meta)


def cmd_verify_bounds(spec: ExperimentSpec):
    params = resolve_channel(spec)
    n = params.n_ues
    ks = spec.tail_ks or tuple(range(2 * n, 2 * n + 17))
    cfg = sim_config(spec, params, "ma", tail_ks=ks)
    agg = aggregate(simulate(cfg, workers=spec.workers))
    checks = []
    low_bad = up_bad = 0
    for k in cfg.tail_ks:
        f, se = agg.tail_empirical[k], agg.tail_empirical_se[k]
        se = 0.0 if math.isnan(se) else se
        if f < tail_lower_bound(k, params) - 3 * se:
            low_bad += 1
        if k >= 2 * n and f > tail_upper_bound(k, params) + 3 * se:
            up_bad += 1
    checks.append(Check("tail_lower_violations", float(low_bad), 0.0, low_bad == 0))
    checks.append(Check("tail_upper_violations", float(up_bad), 0.0, up_bad == 0))

    target = ld_exponent_target(params)
    try:
        window = ld_fit_window(agg.tail_empirical, 1e-4, k_min=2 * n)
        est = estimate_ld_exponent(agg.tail_empirical, window)
        rel = abs(est - target) / target if math.isfinite(target) else math.inf
        checks.append(Check("ld_exponent_rel_error", rel, 0.15, rel <= 0.15))
    except EstimationError as exc:
        print(f"LD exponent not estimated: {exc}")
        checks.append(Check("ld_exponent_rel_error", math.nan, 0.15, False))

    report = probe_drift(cfg)
    checks.append(Check("drift_bound_violations", float(len(report.violations)), 0.0,
                        not report.violations))
    checks.append(Check("negative_drift_region_violations",
                        float(len(report.negative_region_violations)), 0.0,
                        not report.negative_region_violations))
    meta = {"realized_probs": _probs_meta(params), "ld_target": repr(target),
            "drift_groups_tested": str(len(report.tested)),
            "negative_region_groups": str(len(report.negative_region))}
    return _finish_checks(spec, checks, meta, _tail_rows(cfg, agg))


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify-bellman": cmd_verify_bellman,
    "verify-oracle": cmd_verify_oracle,
    "verify-bounds": cmd_verify_bounds,
}


def run_experiment(spec: ExperimentSpec) -> int:
    try:
        return COMMANDS[spec.subcommand](spec)
    except OSError as exc:
        print(f"peakaoi: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IterationLimitError as exc:
        print(f"peakaoi: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"peakaoi: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> int:
    try:
        spec = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run_experiment(spec)


if __name__ == "__main__":
    sys.exit(main())
