"""Belief-update rules for discrete-state online filtering.

All rules work on normalized log-weights.  The ``*_update`` functions take a
log-prior of shape ``(..., M)`` and a log-likelihood array of the same shape,
so one call can advance a whole batch of independent filters (Monte Carlo
runs, a parameter sweep).  ``alpha``/``beta``/``delta`` broadcast against the
leading axes, e.g. ``alpha[:, None]`` for a sweep.

The ``*_step`` functions are the per-observation interface on :class:`Belief`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANTS = ("abhmm", "bayes", "equal_exit_hmm", "full_hmm", "linearized_abhmm", "asl")


class FilterNumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Belief:
    """Normalized belief stored as log-weights."""

    log_weights: np.ndarray

    @classmethod
    def uniform(cls, M: int) -> "Belief":
        return cls(np.full(M, -np.log(M)))

    @classmethod
    def from_probs(cls, probs) -> "Belief":
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
            raise ValueError("probabilities must be non-negative and sum to 1")
        with np.errstate(divide="ignore"):
            return cls(normalize_log(np.log(p)))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def M(self) -> int:
        return self.log_weights.shape[-1]


def normalize_log(logw: np.ndarray) -> np.ndarray:
    """Shift log-weights so their exponentials sum to one along the last axis."""
    top = np.max(logw, axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise FilterNumericError("posterior has zero total mass (all likelihoods vanish)")
    shifted = logw - top
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _check_loglik(loglik):
    loglik = np.asarray(loglik, dtype=float)
    if np.any(np.isnan(loglik)) or np.any(loglik == np.inf):
        raise FilterNumericError(f"non-finite log-likelihood {loglik!r}")
    return loglik


def _check_alpha(alpha, M, closed=True):
    a = np.asarray(alpha, dtype=float)
    ok = (a >= 0) & (a <= 1.0 / M) if closed else (a > 0) & (a < 1.0 / M)
    if not np.all(ok):
        rng = "[0, 1/M]" if closed else "(0, 1/M)"
        raise ValueError(f"alpha must be in {rng} for M={M}, got {alpha!r}")
    return a


def _check_beta(beta):
    b = np.asarray(beta, dtype=float)
    if not np.all(b > 0):
        raise ValueError(f"beta must be > 0, got {beta!r}")
    return b


def bayes_update(log_prior, loglik):
    return normalize_log(log_prior + _check_loglik(loglik))


def abhmm_update(log_prior, loglik, alpha, beta):
    """posterior ~ [(1 - alpha M) mu + alpha] * L^beta, in log domain.

    The mixing term is ``logaddexp(log(1 - alpha M) + log mu, log alpha)``,
    which reduces to ``log mu`` exactly at alpha = 0 and to ``log alpha`` at
    alpha = 1/M.
    """
    log_prior = np.asarray(log_prior, dtype=float)
    M = log_prior.shape[-1]
    a = _check_alpha(alpha, M)
    b = _check_beta(beta)
    loglik = _check_loglik(loglik)
    with np.errstate(divide="ignore"):
        log_keep = np.log1p(-a * M)
        log_a = np.log(a)
    mixed = np.logaddexp(np.add(log_keep, log_prior), log_a)
    # 0 * -inf is nan for zero-likelihood states; those stay at -inf
    tilted = np.where(np.isneginf(loglik), -np.inf, b * loglik)
    return normalize_log(mixed + tilted)


def full_hmm_update(log_prior, loglik, transition):
    """Predict with P^T then correct with L."""
    P = np.asarray(transition, dtype=float)
    prior = np.exp(np.asarray(log_prior, dtype=float))
    with np.errstate(divide="ignore"):
        predicted = np.log(prior @ P)
    return normalize_log(predicted + _check_loglik(loglik))


def linearized_abhmm_update(log_prior, loglik, alpha, beta):
    """posterior ~ mu^(1 - alpha M) * L^beta."""
    log_prior = np.asarray(log_prior, dtype=float)
    M = log_prior.shape[-1]
    a = _check_alpha(alpha, M)
    b = _check_beta(beta)
    if np.any(np.isneginf(log_prior)):
        raise ValueError("linearized update needs a strictly positive prior")
    loglik = _check_loglik(loglik)
    tilted = np.where(np.isneginf(loglik), -np.inf, b * loglik)
    return normalize_log((1.0 - a * M) * log_prior + tilted)


def asl_update(log_prior, loglik, delta):
    """Single-agent adaptive social learning: x <- (1 - delta) x + delta LLR."""
    d = np.asarray(delta, dtype=float)
    if not np.all((d > 0) & (d < 1)):
        raise ValueError(f"delta must be in (0, 1), got {delta!r}")
    log_prior = np.asarray(log_prior, dtype=float)
    if np.any(np.isneginf(log_prior)):
        raise ValueError("asl update needs a strictly positive prior")
    loglik = _check_loglik(loglik)
    tilted = np.where(np.isneginf(loglik), -np.inf, d * loglik)
    return normalize_log((1.0 - d) * log_prior + tilted)


def equal_exit_matrix(M: int, h: float) -> np.ndarray:
    """Transition matrix with 1 - h on the diagonal and h/(M-1) elsewhere."""
    if M < 2:
        raise ValueError("M must be >= 2")
    if not 0 < h < 1:
        raise ValueError(f"h must be in (0, 1), got {h!r}")
    P = np.full((M, M), h / (M - 1))
    np.fill_diagonal(P, 1.0 - h)
    return P


def check_transition(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12, rtol=0):
        raise ValueError("transition matrix must be row-stochastic")
    return P


# Per-observation interface -------------------------------------------------


def bayes_step(prior: Belief, observation, model) -> Belief:
    return Belief(bayes_update(prior.log_weights, model.log_likelihoods(observation)))


def abhmm_step(prior: Belief, observation, model, alpha: float, beta: float) -> Belief:
    return Belief(abhmm_update(prior.log_weights, model.log_likelihoods(observation), alpha, beta))


def full_hmm_step(prior: Belief, observation, model, transition) -> Belief:
    P = check_transition(transition)
    return Belief(full_hmm_update(prior.log_weights, model.log_likelihoods(observation), P))


def linearized_abhmm_step(prior: Belief, observation, model, alpha: float, beta: float) -> Belief:
    return Belief(
        linearized_abhmm_update(prior.log_weights, model.log_likelihoods(observation), alpha, beta)
    )


def asl_step(prior: Belief, observation, model, delta: float) -> Belief:
    return Belief(asl_update(prior.log_weights, model.log_likelihoods(observation), delta))


def belief_to_log_ratios(b) -> np.ndarray:
    """x_m = log mu(theta_m) - log mu(theta_0), m = 1..M-1."""
    logw = b.log_weights if isinstance(b, Belief) else np.asarray(b, dtype=float)
    if np.any(np.isneginf(logw[..., 0])):
        raise ValueError("reference state has zero mass")
    return logw[..., 1:] - logw[..., :1]


def log_ratios_to_belief(x) -> Belief:
    x = np.asarray(x, dtype=float)
    logw = np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1)
    return Belief(normalize_log(logw))


@dataclass(frozen=True)
class FilterConfig:
    """One filter variant and exactly the parameters it needs.

    ``equal_exit_hmm`` uses ``h``; ``full_hmm`` uses ``transition``;
    ``abhmm``/``linearized_abhmm`` use ``alpha``/``beta``; ``asl`` uses
    ``delta``.  ``bayes`` takes nothing.
    """

    variant: str
    alpha: float | None = None
    beta: float | None = None
    delta: float | None = None
    h: float | None = None
    transition: tuple | None = None

    _fields = {
        "abhmm": {"alpha", "beta"},
        "linearized_abhmm": {"alpha", "beta"},
        "bayes": set(),
        "asl": {"delta"},
        "equal_exit_hmm": {"h"},
        "full_hmm": {"transition"},
    }

    def __post_init__(self):
        if self.variant not in self._fields:
            raise ValueError(f"variant: unknown filter variant {self.variant!r}")
        need = self._fields[self.variant]
        for name in ("alpha", "beta", "delta", "h", "transition"):
            present = getattr(self, name) is not None
            if name in need and not present:
                raise ValueError(f"{name}: required for variant {self.variant!r}")
            if name not in need and present:
                raise ValueError(f"{name}: not used by variant {self.variant!r}")
        if self.beta is not None:
            _check_beta(self.beta)
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta!r}")
        if self.h is not None and not 0 < self.h < 1:
            raise ValueError(f"h must be in (0, 1), got {self.h!r}")
        if self.transition is not None:
            P = check_transition(self.transition)
            object.__setattr__(self, "transition", tuple(map(tuple, P.tolist())))

    @property
    def label(self) -> str:
        parts = [self.variant]
        for name in ("alpha", "beta", "delta", "h"):
            v = getattr(self, name)
            if v is not None:
                parts.append(f"{name}={v:g}")
        return "_".join(parts)

    def to_dict(self) -> dict:
        return {
            k: getattr(self, k)
            for k in ("variant", "alpha", "beta", "delta", "h", "transition")
            if getattr(self, k) is not None
        }

    def update(self, log_prior, loglik):
        """Advance log-weights of shape (..., M) by one observation."""
        v = self.variant
        if v == "abhmm":
            return abhmm_update(log_prior, loglik, self.alpha, self.beta)
        if v == "linearized_abhmm":
            return linearized_abhmm_update(log_prior, loglik, self.alpha, self.beta)
        if v == "bayes":
            return bayes_update(log_prior, loglik)
        if v == "asl":
            return asl_update(log_prior, loglik, self.delta)
        M = np.shape(log_prior)[-1]
        P = equal_exit_matrix(M, self.h) if v == "equal_exit_hmm" else np.array(self.transition)
        return full_hmm_update(log_prior, loglik, P)

    def step(self, prior: Belief, observation, model) -> Belief:
        return Belief(self.update(prior.log_weights, model.log_likelihoods(observation)))
