"""Environments, trajectories and Monte Carlo estimation of filter metrics.

Runs are processed in fixed-size chunks.  Each run owns a generator seeded
from ``(master_seed, run_index)`` via :class:`numpy.random.SeedSequence`
spawn keys, and per-chunk partial sums are reduced in chunk order, so a
result depends only on the configuration and never on ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FixedPointResult
from .filters import (
    Belief,
    FilterConfig,
    abhmm_update,
    asl_update,
    check_transition,
    linearized_abhmm_update,
)

CHUNK_RUNS = 200


@dataclass(frozen=True)
class EnvironmentSpec:
    """Schedule of the hidden true state over steps 1..horizon.

    ``kind`` is one of ``constant``, ``switch_at``, ``periodic_redraw``,
    ``markov``.  Build instances with the classmethods.
    """

    kind: str
    horizon: int
    state: int = 0
    state_b: int = 1
    T1: int = 0
    period: int = 1
    transition: tuple | None = None
    initial: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "switch_at", "periodic_redraw", "markov"):
            raise ValueError(f"environment: unknown kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.kind == "switch_at" and not 0 <= self.T1 < self.horizon:
            raise ValueError("switch time T1 must satisfy 0 <= T1 < horizon")
        if self.kind == "periodic_redraw" and self.period < 1:
            raise ValueError("period must be >= 1")
        if self.kind == "markov":
            P = check_transition(self.transition)
            init = np.asarray(self.initial, dtype=float)
            if init.shape != (P.shape[0],) or np.any(init < 0) or not math.isclose(init.sum(), 1.0, abs_tol=1e-12):
                raise ValueError("markov initial distribution must be normalized with length M")

    @classmethod
    def constant(cls, state: int, horizon: int):
        return cls("constant", horizon, state=state)

    @classmethod
    def switch_at(cls, state_a: int, state_b: int, T1: int, horizon: int):
        return cls("switch_at", horizon, state=state_a, state_b=state_b, T1=T1)

    @classmethod
    def periodic_redraw(cls, period: int, horizon: int):
        return cls("periodic_redraw", horizon, period=period)

    @classmethod
    def markov(cls, transition, initial, horizon: int):
        P = tuple(map(tuple, np.asarray(transition, dtype=float).tolist()))
        return cls("markov", horizon, transition=P, initial=tuple(map(float, initial)))

    def to_dict(self):
        out = {"kind": self.kind, "horizon": self.horizon}
        if self.kind == "constant":
            out["state"] = self.state
        elif self.kind == "switch_at":
            out.update(state=self.state, state_b=self.state_b, T1=self.T1)
        elif self.kind == "periodic_redraw":
            out["period"] = self.period
        else:
            out.update(transition=[list(r) for r in self.transition], initial=list(self.initial))
        return out


def generate_states(env: EnvironmentSpec, M: int, rng: np.random.Generator) -> np.ndarray:
    """True state at steps 1..horizon (array index i-1)."""
    H = env.horizon
    if env.kind == "constant":
        states = np.full(H, env.state)
    elif env.kind == "switch_at":
        steps = np.arange(1, H + 1)
        states = np.where(steps <= env.T1, env.state, env.state_b)
    elif env.kind == "periodic_redraw":
        # a fresh uniform draw at every multiple of the period; repeats allowed
        steps = np.arange(1, H + 1)
        draws = rng.integers(0, M, size=H // env.period + 1)
        states = draws[steps // env.period]
    else:
        P = np.array(env.transition)
        cdf = np.cumsum(P, axis=1)
        u = rng.random(H)
        states = np.empty(H, dtype=int)
        s = int(rng.choice(P.shape[0], p=np.array(env.initial)))
        for i in range(H):
            if i > 0:
                s = min(int(np.searchsorted(cdf[s], u[i], side="right")), P.shape[0] - 1)
            states[i] = s
    states = states.astype(int)
    if states.min() < 0 or states.max() >= M:
        raise ValueError(f"state index out of range for M={M}")
    return states


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    observations: np.ndarray

    def __len__(self):
        return self.states.size


def generate_trajectory(env: EnvironmentSpec, true_model, rng: np.random.Generator) -> Trajectory:
    states = generate_states(env, true_model.n_states, rng)
    return Trajectory(states, np.asarray(true_model.sample(states, rng)))


def run_seed(master_seed: int, run_index: int) -> np.random.Generator:
    """Generator for one run, a pure function of (master_seed, run_index)."""
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(run_index),))
    return np.random.Generator(np.random.PCG64(ss))


def run_filter(filter_config: FilterConfig, model, trajectory: Trajectory,
               initial_belief: Belief | None = None) -> np.ndarray:
    """Log-weight history of shape (horizon + 1, M); row 0 is the prior."""
    M = model.n_states
    prior = Belief.uniform(M) if initial_belief is None else initial_belief
    loglik = model.log_likelihoods(trajectory.observations)
    out = np.empty((len(trajectory) + 1, M))
    out[0] = prior.log_weights
    for i in range(len(trajectory)):
        out[i + 1] = filter_config.update(out[i], loglik[i])
    return out


def correct_learning_indicator(belief, true_state) -> np.ndarray | bool:
    """True iff the true state's belief strictly exceeds every other belief.

    Ties count as errors.  Accepts a :class:`Belief` or log-weights of shape
    (..., M) with ``true_state`` broadcastable to the leading shape.
    """
    logw = belief.log_weights if isinstance(belief, Belief) else np.asarray(belief, dtype=float)
    true_state = np.asarray(true_state)
    own = np.take_along_axis(logw, true_state[..., None], axis=-1)
    others = np.where(np.arange(logw.shape[-1]) == true_state[..., None], -np.inf, logw)
    res = own[..., 0] > others.max(axis=-1)
    return bool(res) if res.ndim == 0 else res


def measure_adaptation_time(history, T1: int):
    """Steps after T1 until the belief favors the post-switch state.

    ``history`` is either a 1-d series of log ratios x_i = log mu_new/mu_old
    (index 0 is the prior) or an (n, 2) array of log-weights.  Returns the
    smallest T >= 1 with x_{T1+T} > 0, or ``None`` if that never happens
    within the series.
    """
    h = np.asarray(history, dtype=float)
    if h.ndim == 2:
        if h.shape[1] != 2:
            raise ValueError("adaptation time needs a binary (M = 2) state space")
        h = h[:, 1] - h[:, 0]
    elif h.ndim != 1:
        raise ValueError("history must be a log-ratio series or an (n, 2) array")
    after = np.flatnonzero(h[T1 + 1:] > 0)
    return int(after[0]) + 1 if after.size else None


@dataclass(frozen=True)
class MonteCarloConfig:
    n_runs: int
    master_seed: int
    horizon: int

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass
class MetricsSeries:
    """Per-step averages over Monte Carlo runs, steps 1..horizon."""

    label: str
    n_runs: int
    accuracy: np.ndarray
    p_e: np.ndarray
    mean_belief_true: np.ndarray
    mean_gap: np.ndarray
    correct_counts: np.ndarray
    adaptation_time: float | None = None
    config: dict = field(default_factory=dict)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.accuracy.size + 1)

    @property
    def overall_accuracy(self) -> float:
        return float(self.correct_counts.sum() / (self.n_runs * self.accuracy.size))

    def binomial_se(self) -> np.ndarray:
        p = self.accuracy
        return np.sqrt(p * (1 - p) / self.n_runs)


def _others_index(states, M):
    """Indices of the non-true states per row, in increasing order."""
    idx = np.arange(M)
    mask = idx != states[..., None]
    return np.broadcast_to(idx, mask.shape)[mask].reshape(states.shape + (M - 1,))


def _stack_groups(configs):
    """Group configs whose updates can run as one stacked array operation.

    Returns ``(indices, update)`` pairs; ``update`` maps log-weights of shape
    (G, R, M) and log-likelihoods (R, M) to the next (G, R, M) stack.
    """
    groups = []
    by_variant = {}
    for j, cfg in enumerate(configs):
        if cfg.variant in ("abhmm", "linearized_abhmm", "asl"):
            by_variant.setdefault(cfg.variant, []).append(j)
        else:
            groups.append(([j], lambda logw, ll, cfg=cfg: cfg.update(logw, ll)))
    for variant, idx in by_variant.items():
        if variant == "asl":
            delta = np.array([configs[j].delta for j in idx])[:, None, None]
            groups.append((idx, lambda logw, ll, d=delta: asl_update(logw, ll, d)))
            continue
        alpha = np.array([configs[j].alpha for j in idx])[:, None, None]
        beta = np.array([configs[j].beta for j in idx])[:, None, None]
        fn = abhmm_update if variant == "abhmm" else linearized_abhmm_update
        groups.append((idx, lambda logw, ll, a=alpha, b=beta, fn=fn: fn(logw, ll, a, b)))
    return groups


def _simulate_chunk(runs, mc, env, true_model, likelihood_model, configs, x_inf, initial):
    R = len(runs)
    states = np.empty((R, mc.horizon), dtype=int)
    obs = None
    for k, r in enumerate(runs):
        traj = generate_trajectory(env, true_model, run_seed(mc.master_seed, r))
        if obs is None:
            obs = np.empty((R, mc.horizon), dtype=traj.observations.dtype)
        states[k] = traj.states
        obs[k] = traj.observations
    loglik = likelihood_model.log_likelihoods(obs)
    M = likelihood_model.n_states
    others = _others_index(states, M) if x_inf is not None else None
    switch = env.kind == "switch_at" and M == 2

    results = [None] * len(configs)
    for idx, update in _stack_groups(configs):
        G = len(idx)
        logw = np.broadcast_to(initial, (G, R, M)).copy()
        correct = np.zeros((G, mc.horizon), dtype=np.int64)
        belief_sum = np.zeros((G, mc.horizon))
        gap_sum = np.zeros((G, mc.horizon))
        ratio = np.empty((G, R, mc.horizon + 1)) if switch else None
        if switch:
            ratio[..., 0] = logw[..., env.state_b] - logw[..., env.state]
        for i in range(mc.horizon):
            logw = update(logw, loglik[:, i])
            s = states[:, i]
            correct[:, i] = np.count_nonzero(correct_learning_indicator(logw, s[None, :]), axis=-1)
            own = np.take_along_axis(logw, s[None, :, None], axis=-1)
            belief_sum[:, i] = np.sum(np.exp(own[..., 0]), axis=-1)
            if x_inf is not None:
                x = np.take_along_axis(logw, others[None, :, i], axis=-1) - own
                gap_sum[:, i] = np.sum(np.max(np.abs(x - x_inf), axis=-1), axis=-1)
            if switch:
                ratio[..., i + 1] = logw[..., env.state_b] - logw[..., env.state]
        for g, j in enumerate(idx):
            adapt = None
            if switch:
                adapt = [measure_adaptation_time(ratio[g, k], env.T1) for k in range(R)]
            results[j] = (correct[g], belief_sum[g], gap_sum[g], adapt)
    return results


def monte_carlo_compare(mc: MonteCarloConfig, env: EnvironmentSpec, true_model, likelihood_model,
                        filter_configs, fixed_point=None, initial_belief: Belief | None = None,
                        workers: int = 1) -> list[MetricsSeries]:
    """Run every filter config on the same ``mc.n_runs`` trajectories."""
    if env.horizon != mc.horizon:
        env = EnvironmentSpec(**{**env.__dict__, "horizon": mc.horizon})
    M = likelihood_model.n_states
    initial = (Belief.uniform(M) if initial_belief is None else initial_belief).log_weights
    x_inf = None
    if fixed_point is not None:
        x_inf = fixed_point.x_inf if isinstance(fixed_point, FixedPointResult) else np.asarray(fixed_point)
        if x_inf.size != M - 1:
            raise ValueError("fixed point dimension must be M - 1")
    configs = list(filter_configs)
    chunks = [range(s, min(s + CHUNK_RUNS, mc.n_runs)) for s in range(0, mc.n_runs, CHUNK_RUNS)]

    def work(runs):
        return _simulate_chunk(runs, mc, env, true_model, likelihood_model, configs, x_inf, initial)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    out = []
    for j, cfg in enumerate(configs):
        correct = np.zeros(mc.horizon, dtype=np.int64)
        belief = np.zeros(mc.horizon)
        gap = np.zeros(mc.horizon)
        adapt = []
        for part in parts:
            c, b, g, a = part[j]
            correct += c
            belief += b
            gap += g
            if a is not None:
                adapt.extend(a)
        acc = correct / mc.n_runs
        median_adapt = None
        if adapt:
            med = float(np.median([math.inf if t is None else t for t in adapt]))
            median_adapt = med if math.isfinite(med) else None
        out.append(MetricsSeries(
            label=cfg.label,
            n_runs=mc.n_runs,
            accuracy=acc,
            p_e=(mc.n_runs - correct) / mc.n_runs,
            mean_belief_true=belief / mc.n_runs,
            mean_gap=gap / mc.n_runs if x_inf is not None else np.full(mc.horizon, np.nan),
            correct_counts=correct,
            adaptation_time=median_adapt,
            config={"filter": cfg.to_dict(), "environment": env.to_dict(),
                    "n_runs": mc.n_runs, "master_seed": int(mc.master_seed)},
        ))
    return out


def monte_carlo(mc: MonteCarloConfig, env: EnvironmentSpec, true_model, likelihood_model,
                filter_config: FilterConfig, fixed_point=None, initial_belief: Belief | None = None,
                workers: int = 1) -> MetricsSeries:
    """Monte Carlo estimate of accuracy, error probability and gap per step."""
    return monte_carlo_compare(mc, env, true_model, likelihood_model, [filter_config],
                               fixed_point, initial_belief, workers)[0]
