"""Deterministic reference dynamics of the alpha-beta HMM log-belief ratios.

The stochastic recursion ``x_i = F(x_{i-1}) + beta * LLR_i`` is compared to
the reference system ``x_i = F(x_{i-1}) - beta * d`` obtained by replacing the
log-likelihood ratio with its mean.  This module evaluates ``F``, iterates the
reference system, solves for its fixed point and computes the closed-form
contraction rates and belief bounds that depend on (alpha, beta, d, C).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np


class ConvergenceError(ArithmeticError):
    pass


class BoundUnavailable(ValueError):
    pass


def _check_alpha(alpha, M, allow_zero=False):
    lo_ok = alpha >= 0 if allow_zero else alpha > 0
    if not (lo_ok and alpha < 1.0 / M):
        rng = "[0, 1/M)" if allow_zero else "(0, 1/M)"
        raise ValueError(f"alpha must be in {rng} for M={M}, got {alpha!r}")


def _as_d(d):
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.ndim != 1:
        raise ValueError("d must be a vector")
    if not np.all(d > 0):
        raise ValueError(f"identifiability d must be all-positive, got {d}")
    return d


def map_F(x, alpha: float, M: int | None = None) -> np.ndarray:
    """Nonlinear part of the log-belief-ratio recursion.

    F_m(x) = log[(1-aM) e^{x_m} + a + a sum_n e^{x_n}]
             - log[1 - aM + a + a sum_n e^{x_n}]

    Evaluated with log-sum-exp; ``x`` may carry leading batch axes.  alpha = 0
    is accepted and gives the identity map (the Bayes reference system).
    """
    x = np.asarray(x, dtype=float)
    M = x.shape[-1] + 1 if M is None else M
    if x.shape[-1] != M - 1:
        raise ValueError(f"x has {x.shape[-1]} components, expected M-1 = {M - 1}")
    _check_alpha(alpha, M, allow_zero=True)
    if alpha == 0:
        return x.copy()
    return _map_F(x, math.log(alpha), math.log1p(-alpha * M))


def _map_F(x, log_a, log_keep):
    # log(a + a sum e^{x_n}) = log a + log(1 + sum e^{x_n}), shifted by max(0, x)
    top = np.maximum(np.max(x, axis=-1, keepdims=True), 0.0)
    lse = top + np.log(np.exp(-top) + np.sum(np.exp(x - top), axis=-1, keepdims=True))
    shared = log_a + lse
    num = np.logaddexp(log_keep + x, shared)
    den = np.logaddexp(log_keep, shared)
    return num - den


def reference_step(x, alpha: float, beta: float, d) -> np.ndarray:
    """x_next = F(x) - beta * d."""
    x = np.asarray(x, dtype=float)
    d = _as_d(d)
    if x.shape[-1] != d.size:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]} components, d has {d.size}")
    return map_F(x, alpha, d.size + 1) - beta * d


def reference_trajectory(x0, alpha: float, beta: float, d, steps: int) -> np.ndarray:
    """Rows x_0 .. x_steps of the reference system."""
    d = _as_d(d)
    out = np.empty((steps + 1, d.size))
    out[0] = np.broadcast_to(np.asarray(x0, dtype=float), d.shape)
    if steps == 0:
        return out
    out[1] = reference_step(out[0], alpha, beta, d)  # validates once
    if alpha == 0:
        out[1:] = out[0] - np.arange(1, steps + 1)[:, None] * (beta * d)
        return out
    log_a, log_keep, drift = math.log(alpha), math.log1p(-alpha * (d.size + 1)), beta * d
    for i in range(2, steps + 1):
        out[i] = _map_F(out[i - 1], log_a, log_keep) - drift
    return out


def switch_reference_trajectory(x0: float, alpha: float, beta: float, d_s1: float, d_s2: float,
                                T1: int, horizon: int) -> np.ndarray:
    """Binary reference system whose drift flips from -beta d_s1 to +beta d_s2 after T1.

    Returns x_0 .. x_horizon with x = log mu(theta_1)/mu(theta_0).
    """
    out = np.empty(horizon + 1)
    out[0] = x0
    for i in range(1, horizon + 1):
        drift = -beta * d_s1 if i <= T1 else beta * d_s2
        out[i] = map_F(np.array([out[i - 1]]), alpha, 2)[0] + drift
    return out


def beliefs_from_ratios(x) -> np.ndarray:
    """Belief vector (mu_0, mu_1, ...) from log ratios against theta_0."""
    x = np.asarray(x, dtype=float)
    logw = np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1)
    w = np.exp(logw - np.max(logw, axis=-1, keepdims=True))
    return w / np.sum(w, axis=-1, keepdims=True)


@dataclass(frozen=True)
class FixedPointResult:
    x_inf: np.ndarray
    mu_inf: np.ndarray
    iterations: int
    residual: float

    def to_dict(self):
        return {
            "x_inf": self.x_inf.tolist(),
            "mu_inf": self.mu_inf.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
        }


def fixed_point_residual(x, alpha, beta, d) -> float:
    """Sup-norm of x - (F(x) - beta d)."""
    return float(np.max(np.abs(np.asarray(x) - reference_step(x, alpha, beta, d))))


def equilibrium_rhs(x, alpha, beta, d) -> np.ndarray:
    """Right side of the fixed-point characterization
    x_m = log[a / (a e^{b d_m} + (1 - aM)(e^{b d_m} - 1) mu_0)]."""
    d = _as_d(d)
    M = d.size + 1
    mu0 = beliefs_from_ratios(x)[0]
    ebd = np.exp(beta * d)
    return np.log(alpha / (alpha * ebd + (1 - alpha * M) * (ebd - 1) * mu0))


def solve_fixed_point(alpha: float, beta: float, d, tolerance: float = 1e-12,
                      max_iterations: int = 1_000_000, x0=None) -> FixedPointResult:
    """Iterate the reference system until successive iterates differ by < tolerance."""
    d = _as_d(d)
    M = d.size + 1
    _check_alpha(alpha, M)
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    x = np.zeros(d.size) if x0 is None else np.array(x0, dtype=float)
    log_a, log_keep, drift = math.log(alpha), math.log1p(-alpha * M), beta * d
    step = math.inf
    for it in range(1, max_iterations + 1):
        nxt = _map_F(x, log_a, log_keep) - drift
        step = float(np.max(np.abs(nxt - x)))
        x = nxt
        if step < tolerance:
            break
    else:
        raise ConvergenceError(
            f"fixed point not reached in {max_iterations} iterations (last step {step:.3g})"
        )
    return FixedPointResult(
        x_inf=x,
        mu_inf=beliefs_from_ratios(x),
        iterations=it,
        residual=fixed_point_residual(x, alpha, beta, d),
    )


def _mix_term(alpha, M):
    return 2 * alpha / (1 - alpha * M + 2 * alpha)


def theorem1_lambda(alpha: float, beta: float, d_min: float, x_bar_0: float, M: int) -> float:
    """Sup-norm contraction rate of the reference system toward its fixed point.

    lambda = 1 - min{2a/(1 - aM + 2a),
                     b d_min / (x_bar_0 - log(a/(1 - aM + a)) + b d_min)}
    with x_bar_0 = max(max_m x_{m,0}, 0).
    """
    _check_alpha(alpha, M)
    if not (beta > 0 and d_min > 0 and x_bar_0 >= 0):
        raise ValueError("need beta > 0, d_min > 0, x_bar_0 >= 0")
    bd = beta * d_min
    data_term = bd / (x_bar_0 - math.log(alpha / (1 - alpha * M + alpha)) + bd)
    return 1.0 - min(_mix_term(alpha, M), data_term)


def corollary1_gamma(alpha: float, beta: float, d_min: float, U: float, M: int) -> tuple[float, float]:
    """Contraction factors of ||exp(x_i) - exp(x_inf)||_1.

    ``gamma`` holds for any start with U = max(1, max_m exp(x_{m,0}));
    ``gamma1`` holds when the start dominates the fixed point (e.g. x_0 = 0).
    """
    _check_alpha(alpha, M)
    if U < 1:
        raise ValueError("U must be >= 1")
    keep = 1 - alpha * M
    base = math.exp(-beta * d_min) * keep / (keep + alpha) ** 2
    return base * (1 + 2 * alpha * U * (M - 1)), base


@dataclass(frozen=True)
class BeliefBounds:
    mu_lower: float
    mu_upper: float
    mu_lower_raw: float
    mu_upper_raw: float
    lower_vacuous: bool
    upper_clamped: bool


def theorem2_bounds(alpha: float, beta: float, d_min: float, d_max: float, M: int) -> BeliefBounds:
    """Bounds on the steady belief mu_0 of the reference system.

    A non-positive lower bound is reported as 0 with ``lower_vacuous`` set;
    an upper bound above 1 (or undefined because the lower one is vacuous)
    is reported as 1 with ``upper_clamped`` set.
    """
    _check_alpha(alpha, M)
    if not d_min > 0:
        raise ValueError(f"d_min must be > 0, got {d_min!r}")
    if d_max < d_min:
        raise ValueError("d_max must be >= d_min")
    keep = 1 - alpha * M
    em1_lo = math.expm1(beta * d_min)
    em1_hi = math.expm1(beta * d_max)
    # (keep e^{bd} - 1 + a) / (keep (e^{bd} - 1)) rewritten to avoid cancellation
    lower = 1.0 - alpha * (M - 1) / (keep * em1_lo)
    if lower > 0:
        upper = ((keep - alpha + alpha / lower) * (em1_hi + 1) - 1 + alpha) / (keep * em1_hi)
    else:
        upper = math.inf
    return BeliefBounds(
        mu_lower=max(lower, 0.0),
        mu_upper=min(upper, 1.0),
        mu_lower_raw=lower,
        mu_upper_raw=upper,
        lower_vacuous=lower <= 0,
        upper_clamped=upper > 1,
    )


def lemma5_lambda1(alpha: float, beta: float, d_min: float, C: float, M: int) -> float:
    """Rate of the expected sup-norm gap between the filter and the fixed point.

    lambda1 = 1 - min{2a/(1 - aM + 2a), b d_min / (2 log((1 - aM + a)/a) + b C)}.
    Returns 1.0 (vacuous) when d_min = 0.
    """
    _check_alpha(alpha, M)
    if not math.isfinite(C):
        raise BoundUnavailable("bound unavailable: C is not finite (unbounded support)")
    if C < 0 or d_min < 0:
        raise ValueError("C and d_min must be non-negative")
    if C < d_min:
        warnings.warn("C < d_min: the LLR bound is inconsistent with d", stacklevel=2)
    data_term = beta * d_min / (2 * math.log((1 - alpha * M + alpha) / alpha) + beta * C)
    return 1.0 - min(_mix_term(alpha, M), data_term)


def steady_gap_bound(beta: float, C: float, lambda1: float) -> float:
    """Asymptotic bound beta C / (1 - lambda1) on E||x_i - x_inf||_inf."""
    if lambda1 >= 1:
        return math.inf
    return beta * C / (1 - lambda1)


@dataclass(frozen=True)
class ErrorBound:
    steady: float
    decay_rate: float
    clamped: bool
    # beta = O(alpha), alpha -> 0 drives the steady value to 0
    small_alpha_regime: bool


def theorem3_error_bound(alpha: float, beta: float, C: float, fixed_point, d_min: float,
                         M: int | None = None) -> ErrorBound:
    """Steady-state error-probability bound min(1, b C / (-(1 - lambda1) x_bar_inf)).

    The transient O(lambda1^i) constant is unspecified, so only the steady
    value and the rate are returned; see :func:`fit_transient_constant`.
    """
    x_inf = fixed_point.x_inf if isinstance(fixed_point, FixedPointResult) else np.asarray(fixed_point)
    M = x_inf.size + 1 if M is None else M
    x_bar = float(np.max(x_inf))
    if x_bar >= 0:
        raise ValueError("fixed point not in correct-learning region")
    lam1 = lemma5_lambda1(alpha, beta, d_min, C, M)
    if lam1 >= 1:
        raw = math.inf
    else:
        raw = beta * C / (-(1 - lam1) * x_bar)
    return ErrorBound(
        steady=min(1.0, raw),
        decay_rate=lam1,
        clamped=raw > 1,
        small_alpha_regime=beta <= alpha,
    )


def fit_transient_constant(observed_at_1: float, lambda1: float, steady: float) -> float:
    """K such that K lambda1 + steady equals the observed value at i = 1 (K >= 0)."""
    return max(0.0, (observed_at_1 - steady) / lambda1)


def transient_envelope(steps, K: float, lambda1: float, steady: float) -> np.ndarray:
    """K lambda1^i + steady evaluated at ``steps``."""
    return K * np.power(lambda1, np.asarray(steps, dtype=float)) + steady


@dataclass(frozen=True)
class BoundsReport:
    alpha: float
    beta: float
    M: int
    d_min: float
    d_max: float
    C: float
    lam: float
    gamma: float
    gamma1: float
    mu_lower: float
    mu_upper: float
    mu0_inf: float
    x_bar_inf: float
    lambda1: float
    steady_gap_bound: float
    error_prob_steady: float
    mu_lower_vacuous: bool
    mu_upper_clamped: bool
    error_prob_clamped: bool

    def to_dict(self):
        return asdict(self)


def bounds_report(alpha: float, beta: float, d, C: float = math.inf, x0=None) -> BoundsReport:
    """Every closed-form rate and bound for one parameter tuple.

    C-dependent entries are ``nan`` when C is infinite.  ``x0`` defaults to
    the uniform prior (all log ratios zero).
    """
    d = _as_d(d)
    M = d.size + 1
    x0 = np.zeros(d.size) if x0 is None else np.asarray(x0, dtype=float)
    d_min, d_max = float(d.min()), float(d.max())
    fp = solve_fixed_point(alpha, beta, d)
    lam = theorem1_lambda(alpha, beta, d_min, max(float(x0.max()), 0.0), M)
    U = max(1.0, float(np.exp(x0).max()))
    gamma, gamma1 = corollary1_gamma(alpha, beta, d_min, U, M)
    tb = theorem2_bounds(alpha, beta, d_min, d_max, M)
    if math.isfinite(C):
        lam1 = lemma5_lambda1(alpha, beta, d_min, C, M)
        gap = steady_gap_bound(beta, C, lam1)
        eb = theorem3_error_bound(alpha, beta, C, fp, d_min, M)
        ep, ep_clamped = eb.steady, eb.clamped
    else:
        lam1 = gap = ep = math.nan
        ep_clamped = False
    return BoundsReport(
        alpha=alpha, beta=beta, M=M, d_min=d_min, d_max=d_max, C=C,
        lam=lam, gamma=gamma, gamma1=gamma1,
        mu_lower=tb.mu_lower, mu_upper=tb.mu_upper, mu0_inf=float(fp.mu_inf[0]),
        x_bar_inf=float(fp.x_inf.max()),
        lambda1=lam1, steady_gap_bound=gap, error_prob_steady=ep,
        mu_lower_vacuous=tb.lower_vacuous, mu_upper_clamped=tb.upper_clamped,
        error_prob_clamped=ep_clamped,
    )


@dataclass(frozen=True)
class AdaptationBounds:
    bayes_lb: float
    abhmm_lb: float
    x_s1_inf: float
    x_s2_inf: float
    lambda_s1: float
    lambda_s2: float


def adaptation_times(alpha: float, beta: float, d_s1: float, d_s2: float,
                     x_0: float, T1: int) -> AdaptationBounds:
    """Adaptation-time bounds after a binary switch at T1.

    Bayes: (d_s1 T1 - x_0) / d_s2, linear in T1.  alpha-beta HMM: the
    two-stage contraction estimate, which saturates as T1 grows.  The
    post-switch fixed point is the negated fixed point for drift d_s2 (F is
    odd for M = 2).  The stage-2 rate uses the actual reference value x_{T1}
    as its starting point.
    """
    if not (d_s1 > 0 and d_s2 > 0):
        raise ValueError("d_s1 and d_s2 must be positive")
    bayes = (d_s1 * T1 - x_0) / d_s2
    x_s1 = float(solve_fixed_point(alpha, beta, [d_s1]).x_inf[0])
    x_s2 = -float(solve_fixed_point(alpha, beta, [d_s2]).x_inf[0])
    lam_s1 = theorem1_lambda(alpha, beta, d_s1, max(x_0, 0.0), 2)
    x_T1 = switch_reference_trajectory(x_0, alpha, beta, d_s1, d_s2, T1, T1)[-1]
    # stage 2 in mirrored coordinates starts at -x_T1
    lam_s2 = theorem1_lambda(alpha, beta, d_s2, max(-x_T1, 0.0), 2)
    if lam_s1 >= 1 or lam_s2 >= 1:
        raise BoundUnavailable("bound unavailable: degenerate stage rate")
    denom = lam_s1**T1 * abs(x_0 - x_s1) + abs(x_s2 - x_s1)
    abhmm = math.log(abs(x_s2) / denom) / math.log(lam_s2)
    return AdaptationBounds(bayes, abhmm, x_s1, x_s2, lam_s1, lam_s2)
