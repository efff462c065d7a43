"""Experiment configurations and the runners that turn them into files.

A configuration is a flat dict.  ``kind`` selects the runner:

``monte_carlo``
    Cartesian sweep over ``sigmas`` x filters x parameters; one metrics CSV
    per tuple plus ``summary.csv`` (overall accuracy per tuple).
``reference``
    Deterministic reference trajectories, fixed points, the sup-norm rate
    envelope and the belief bounds for a Gaussian grid.
``adaptation``
    Binary switch: measured and bounded adaptation times of Bayes and the
    alpha-beta HMM on the reference system, for several switch times.
"""

from __future__ import annotations

import itertools
import math
from pathlib import Path

import numpy as np

from . import dynamics, output
from .filters import FilterConfig
from .model import (
    GaussianGridModel,
    TruncatedGaussianModel,
    expected_llr,
    gaussian_identifiability,
    info_profile,
)
from .sim import EnvironmentSpec, MonteCarloConfig, measure_adaptation_time, monte_carlo_compare


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the key."""


SIM_ALPHAS = [0.001, 0.003, 0.01, 0.02, 0.04, 0.07, 0.1, 0.13, 0.16, 0.19]

PRESETS = {
    "fig-ne1": {
        "description": "M=5 Gaussian grid, sigma=0.5, beta=1, redraw every 10 steps: "
                       "alpha-beta HMM vs linearized accuracy over an alpha sweep",
        "kind": "monte_carlo",
        "family": "gaussian",
        "means": [1.0, 2.0, 3.0, 4.0, 5.0],
        "sigmas": [0.5],
        "environment": "periodic_redraw",
        "period": 10,
        "horizon": 10000,
        "runs": 1,
        "seed": 20240601,
        "filters": ["abhmm", "linearized_abhmm"],
        "alphas": SIM_ALPHAS,
        "betas": [1.0],
    },
    "fig-ne2-caption": {
        "description": "step-size sweep under observation variances 1 and 0.5",
        "kind": "monte_carlo",
        "family": "gaussian",
        "means": [1.0, 2.0, 3.0, 4.0, 5.0],
        "sigmas": [1.0, math.sqrt(0.5)],
        "environment": "periodic_redraw",
        "period": 10,
        "horizon": 10000,
        "runs": 1,
        "seed": 20240602,
        "filters": ["abhmm"],
        "alphas": [0.02, 0.05, 0.1],
        "betas": [0.25, 0.5, 1.0, 1.5, 2.0],
    },
    "fig-ne2-text": {
        "description": "step-size sweep under observation variances 1 and 2",
        "kind": "monte_carlo",
        "family": "gaussian",
        "means": [1.0, 2.0, 3.0, 4.0, 5.0],
        "sigmas": [1.0, math.sqrt(2.0)],
        "environment": "periodic_redraw",
        "period": 10,
        "horizon": 10000,
        "runs": 1,
        "seed": 20240602,
        "filters": ["abhmm"],
        "alphas": [0.02, 0.05, 0.1],
        "betas": [0.25, 0.5, 1.0, 1.5, 2.0],
    },
    "fig-ne3": {
        "description": "reference-system trajectories, fixed points, rate envelope and belief bounds",
        "kind": "reference",
        "M": 5,
        "sigma": 1.0,
        "alphas": [0.01, 0.05, 0.1],
        "betas": [0.5, 1.0, 2.0],
        "horizon": 100,
        "switch_time": 25,
        "switch_to": 4,
    },
    "fig-ne4": {
        "description": "truncated model, beta=alpha grid x sigma grid, 1000-run error probability",
        "kind": "monte_carlo",
        "family": "truncated_gaussian",
        "means": [1.0, 2.0, 3.0],
        "true_means": [0.0, 1.0, 2.0],
        "support": [-5.0, 5.0],
        "sigmas": [1.0, 2.0, 3.0],
        "environment": "constant",
        "state": 0,
        "horizon": 200,
        "runs": 1000,
        "seed": 20240604,
        "filters": ["abhmm"],
        "alphas": [0.01, 0.02, 0.05, 0.1],
        "beta_equals_alpha": True,
        "fixed_point": True,
    },
    "example-1": {
        "description": "binary switch: Bayes vs alpha-beta HMM adaptation time over switch times",
        "kind": "adaptation",
        "means": [0.0, 1.0],
        "sigma": 1.0,
        "alpha": 0.05,
        "beta": 1.0,
        "x0": 0.0,
        "T1_values": [10, 50, 200, 1000],
    },
}

BOUNDS_PRESETS = {
    "fig-2": {
        "description": "belief bounds over alpha and beta*d for M=5",
        "alphas": [round(0.005 + 0.01 * k, 3) for k in range(20)],
        "betas": [1.0],
        "d_mins": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        "d_ratios": [1.0, 2.0, 4.0],
        "Ms": [5],
        "Cs": [],
    },
}

KEYS = {
    "monte_carlo": {
        "preset", "kind", "family", "means", "true_means", "sigmas", "support",
        "environment", "state", "state_b", "switch_time", "period", "horizon", "runs",
        "seed", "filters", "alphas", "betas", "deltas", "h_values", "beta_equals_alpha",
        "fixed_point", "workers", "out", "description",
    },
    "reference": {
        "preset", "kind", "M", "sigma", "alphas", "betas", "horizon", "switch_time",
        "switch_to", "out", "description",
    },
    "adaptation": {
        "preset", "kind", "means", "sigma", "alpha", "beta", "x0", "T1_values", "out",
        "description",
    },
}


def resolve(config: dict) -> dict:
    """Merge a config over its preset and validate the keys."""
    config = dict(config)
    name = config.get("preset")
    base = {}
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"preset: unknown preset {name!r}")
        base = dict(PRESETS[name])
        base["preset"] = name
    merged = {**base, **config}
    kind = merged.get("kind", "monte_carlo")
    if kind not in KEYS:
        raise ConfigError(f"kind: unknown experiment kind {kind!r}")
    merged["kind"] = kind
    for key in merged:
        if key not in KEYS[kind]:
            raise ConfigError(f"{key}: unknown key for kind {kind!r}")
    merged.pop("description", None)
    return merged


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"{key}: required")
    return cfg[key]


def _models(cfg, sigma):
    family = cfg.get("family", "gaussian")
    means = _require(cfg, "means")
    true_means = cfg.get("true_means", means)
    try:
        if family == "gaussian":
            return GaussianGridModel(true_means, sigma), GaussianGridModel(means, sigma)
        if family == "truncated_gaussian":
            support = cfg.get("support", [-5.0, 5.0])
            return (TruncatedGaussianModel(true_means, sigma, support),
                    TruncatedGaussianModel(means, sigma, support))
    except ValueError as exc:
        raise ConfigError(f"means: {exc}") from exc
    raise ConfigError(f"family: unsupported family {family!r} for simulate")


def _environment(cfg):
    kind = cfg.get("environment", "constant")
    H = int(_require(cfg, "horizon"))
    try:
        if kind == "constant":
            return EnvironmentSpec.constant(int(cfg.get("state", 0)), H)
        if kind == "switch_at":
            return EnvironmentSpec.switch_at(int(cfg.get("state", 0)), int(cfg.get("state_b", 1)),
                                             int(_require(cfg, "switch_time")), H)
        if kind == "periodic_redraw":
            return EnvironmentSpec.periodic_redraw(int(cfg.get("period", 10)), H)
    except ValueError as exc:
        raise ConfigError(f"environment: {exc}") from exc
    raise ConfigError(f"environment: unknown environment {kind!r}")


def _filter_configs(cfg):
    out = []
    tie = bool(cfg.get("beta_equals_alpha", False))
    try:
        for variant in _require(cfg, "filters"):
            if variant in ("abhmm", "linearized_abhmm"):
                for a in _require(cfg, "alphas"):
                    for b in ([a] if tie else _require(cfg, "betas")):
                        out.append(FilterConfig(variant, alpha=float(a), beta=float(b)))
            elif variant == "asl":
                out += [FilterConfig("asl", delta=float(d)) for d in _require(cfg, "deltas")]
            elif variant == "equal_exit_hmm":
                out += [FilterConfig("equal_exit_hmm", h=float(h)) for h in _require(cfg, "h_values")]
            elif variant == "bayes":
                out.append(FilterConfig("bayes"))
            else:
                raise ConfigError(f"filters: unsupported variant {variant!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"filters: {exc}") from exc
    return out


def run_monte_carlo(cfg: dict, out_dir: Path) -> list[Path]:
    env = _environment(cfg)
    configs = _filter_configs(cfg)
    try:
        mc = MonteCarloConfig(int(cfg.get("runs", 1)), int(cfg.get("seed", 0)), env.horizon)
    except ValueError as exc:
        raise ConfigError(f"runs: {exc}") from exc
    M = len(_require(cfg, "means"))
    for c in configs:
        if c.alpha is not None and not 0 <= c.alpha <= 1.0 / M:
            raise ConfigError(f"alphas: alpha must be in [0, 1/M] for M={M}, got {c.alpha}")
    files = []
    summary = []
    for sigma in _require(cfg, "sigmas"):
        sigma = float(sigma)
        if not sigma > 0:
            raise ConfigError(f"sigmas: sigma must be > 0, got {sigma}")
        true_model, lik_model = _models(cfg, sigma)
        # filters sharing beta get the matching fixed point; only for constant truth
        fps = {}
        if cfg.get("fixed_point") and env.kind == "constant":
            prof = info_profile(true_model, lik_model, env.state)
            if env.state != 0:
                raise ConfigError("state: fixed_point gap needs the true state at index 0")
            for c in configs:
                if c.variant == "abhmm" and 0 < c.alpha < 1.0 / M:
                    fps[c.label] = dynamics.solve_fixed_point(c.alpha, c.beta, prof.d)
        groups = {}
        for c in configs:
            groups.setdefault(c.label in fps, []).append(c)
        results = []
        if groups.get(False):
            results += monte_carlo_compare(mc, env, true_model, lik_model, groups[False],
                                           workers=int(cfg.get("workers", 1)))
        for c in groups.get(True, []):
            results += monte_carlo_compare(mc, env, true_model, lik_model, [c], fps[c.label],
                                           workers=int(cfg.get("workers", 1)))
        results.sort(key=lambda s: [c.label for c in configs].index(s.label))
        for s in results:
            name = f"sigma={sigma:g}_{s.label}.csv"
            files.append(output.write_metrics_csv(s, out_dir / name))
            f = s.config["filter"]
            summary.append((sigma, f["variant"], f.get("alpha", ""), f.get("beta", ""),
                            f.get("delta", ""), f.get("h", ""), s.overall_accuracy,
                            float(s.p_e[-1]), "" if s.adaptation_time is None else s.adaptation_time,
                            name))
    files.append(output.write_rows(
        out_dir / "summary.csv",
        ("sigma", "variant", "alpha", "beta", "delta", "h", "overall_accuracy", "final_p_e",
         "adaptation_time", "file"),
        summary,
    ))
    return files


def run_reference(cfg: dict, out_dir: Path) -> list[Path]:
    M = int(_require(cfg, "M"))
    sigma = float(_require(cfg, "sigma"))
    H = int(_require(cfg, "horizon"))
    T1 = int(cfg.get("switch_time", H))
    target = int(cfg.get("switch_to", M - 1))
    model = GaussianGridModel.grid(M, sigma)
    d = gaussian_identifiability(0, sigma, M)
    drift_after = expected_llr(model, model, target, 0)
    traj_rows, env_rows, fp_rows = [], [], []
    for a, b in itertools.product(_require(cfg, "alphas"), _require(cfg, "betas")):
        a, b = float(a), float(b)
        try:
            fp = dynamics.solve_fixed_point(a, b, d)
        except ValueError as exc:
            raise ConfigError(f"alphas: {exc}") from exc
        rep = dynamics.bounds_report(a, b, d)
        fp_rows.append((a, b, *fp.x_inf, fp.mu_inf[0], rep.mu_lower, rep.mu_upper, rep.lam,
                        rep.gamma1, fp.iterations, fp.residual))
        # (a) switching trajectory in theta_0 coordinates
        x = np.zeros(M - 1)
        for i in range(H + 1):
            if i > 0:
                drift = -b * d if i <= T1 else b * drift_after
                x = dynamics.map_F(x, a, M) + drift
            traj_rows.append((a, b, i, *x, dynamics.beliefs_from_ratios(x)[0]))
        # (b) constant truth: distance to the fixed point vs the lambda envelope
        tr = dynamics.reference_trajectory(np.zeros(M - 1), a, b, d, H)
        gap = np.max(np.abs(tr - fp.x_inf), axis=1)
        eg = np.sum(np.abs(np.exp(tr) - np.exp(fp.x_inf)), axis=1)
        for i in range(H + 1):
            env_rows.append((a, b, i, gap[i], gap[0] * rep.lam**i, eg[i], eg[0] * rep.gamma1**i,
                             dynamics.beliefs_from_ratios(tr[i])[0]))
    xs = [f"x_{m}" for m in range(1, M)]
    return [
        output.write_rows(out_dir / "trajectories.csv", ("alpha", "beta", "step", *xs, "mu_0"), traj_rows),
        output.write_rows(out_dir / "envelope.csv",
                          ("alpha", "beta", "step", "gap_inf", "lambda_envelope", "gap_exp_l1",
                           "gamma1_envelope", "mu_0"), env_rows),
        output.write_rows(out_dir / "fixed_points.csv",
                          ("alpha", "beta", *[f"x_inf_{m}" for m in range(1, M)], "mu0_inf",
                           "mu_lower", "mu_upper", "lambda", "gamma1", "iterations", "residual"),
                          fp_rows),
    ]


def adaptation_table(means, sigma, alpha, beta, x0, T1_values):
    """Rows (T1, bayes_measured, bayes_lb, abhmm_measured, abhmm_lb)."""
    model = GaussianGridModel(means, sigma)
    if model.n_states != 2:
        raise ConfigError("means: adaptation experiment needs exactly 2 states")
    d_s1 = float(info_profile(model, model, 0).d[0])
    d_s2 = float(info_profile(model, model, 1).d[0])
    rows = []
    for T1 in T1_values:
        T1 = int(T1)
        horizon = 2 * T1 + 50 + int(x0 / d_s2 if x0 > 0 else 0)
        xb = dynamics.switch_reference_trajectory(x0, 0.0, 1.0, d_s1, d_s2, T1, horizon)
        xa = dynamics.switch_reference_trajectory(x0, alpha, beta, d_s1, d_s2, T1, horizon)
        bounds = dynamics.adaptation_times(alpha, beta, d_s1, d_s2, x0, T1)
        rows.append((T1, measure_adaptation_time(xb, T1), bounds.bayes_lb,
                     measure_adaptation_time(xa, T1), bounds.abhmm_lb))
    return rows


def run_adaptation(cfg: dict, out_dir: Path) -> list[Path]:
    rows = adaptation_table(_require(cfg, "means"), float(_require(cfg, "sigma")),
                            float(_require(cfg, "alpha")), float(_require(cfg, "beta")),
                            float(cfg.get("x0", 0.0)), _require(cfg, "T1_values"))
    return [output.write_rows(
        out_dir / "adaptation.csv",
        ("T1", "bayes_measured", "bayes_lower_bound", "abhmm_measured", "abhmm_bound"),
        [tuple("" if v is None else v for v in r) for r in rows],
    )]


RUNNERS = {"monte_carlo": run_monte_carlo, "reference": run_reference, "adaptation": run_adaptation}


def run(config: dict, out_dir) -> list[Path]:
    cfg = resolve(config)
    return RUNNERS[cfg["kind"]](cfg, Path(out_dir))


def bounds_grid(alphas, betas, d_mins, d_ratios, Ms, Cs=()):
    """One BoundsReport per valid tuple of the cartesian product.

    d is spread evenly between d_min and d_min * ratio; M = 2 only admits
    ratio 1, and other tuples for M = 2 are skipped.  Tuples whose alpha is
    outside (0, 1/M) are skipped too.
    """
    reports = []
    for a, b, dmin, r, M, C in itertools.product(alphas, betas, d_mins, d_ratios, Ms, list(Cs) or [math.inf]):
        M = int(M)
        if M == 2 and r != 1:
            continue
        if not 0 < a < 1.0 / M:
            continue
        d = np.linspace(dmin, dmin * r, M - 1)
        reports.append(dynamics.bounds_report(float(a), float(b), d, float(C)))
    return reports
