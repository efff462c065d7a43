"""Observation models and the information quantities derived from them.

Every model exposes log-likelihoods for all states at once, so filters can
consume an ``(..., M)`` array per observation.  The identifiability vector
``d`` and the log-likelihood-ratio bound ``C`` are computed here because every
closed-form rate in :mod:`abhmm.dynamics` is parameterized by them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

# d_m at or below this value is treated as a genuine identifiability failure.
IDENTIFIABILITY_FLOOR = 1e-8


class AssumptionViolated(ValueError):
    """Raised when a model pair is not identifiable (some d_m <= floor)."""


class BoundUndefined(ValueError):
    """Raised when a bound needs bounded support but the model has none."""


class ObservationModel:
    """Likelihood family L(xi | theta_m) over ``n_states`` discrete states.

    Subclasses implement :meth:`log_likelihoods` and :meth:`sample`.
    ``support`` is ``(lo, hi)``; infinite endpoints mean the real line.
    """

    support: tuple[float, float] = (-math.inf, math.inf)
    closed_form_kl: bool = False
    # True when every log L_m - log L_n is affine in the observation.
    affine_llr: bool = False
    discrete: bool = False

    @property
    def n_states(self) -> int:
        raise NotImplementedError

    def log_likelihoods(self, xi) -> np.ndarray:
        """Return log L(xi | theta_m) with shape ``np.shape(xi) + (M,)``."""
        raise NotImplementedError

    def log_likelihood(self, xi, m: int):
        return self.log_likelihoods(xi)[..., m]

    def sample(self, states, rng: np.random.Generator) -> np.ndarray:
        """Draw one observation per entry of ``states``."""
        raise NotImplementedError

    def mean(self, m: int) -> float:
        raise NotImplementedError

    @property
    def bounded(self) -> bool:
        lo, hi = self.support
        return math.isfinite(lo) and math.isfinite(hi)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_means_sigma(means, sigma):
    means = np.asarray(means, dtype=float)
    if means.ndim != 1 or means.size < 1:
        raise ValueError("means must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(means)):
        raise ValueError("means must be finite")
    if len(np.unique(means)) != means.size:
        raise ValueError("means must be pairwise distinct")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    return means, float(sigma)


class GaussianGridModel(ObservationModel):
    """Gaussian likelihoods N(means[m], sigma^2) with a shared sigma."""

    closed_form_kl = True
    affine_llr = True

    def __init__(self, means, sigma: float):
        self.means, self.sigma = _check_means_sigma(means, sigma)
        self._log_norm = -math.log(self.sigma) - 0.5 * math.log(2.0 * math.pi)

    @classmethod
    def grid(cls, n_states: int, sigma: float, offset: float = 1.0):
        """Means ``m + offset`` for m = 0..n_states-1."""
        return cls(np.arange(n_states) + offset, sigma)

    @property
    def n_states(self) -> int:
        return self.means.size

    def log_likelihoods(self, xi):
        z = (np.asarray(xi, dtype=float)[..., None] - self.means) / self.sigma
        return self._log_norm - 0.5 * z * z

    def sample(self, states, rng):
        states = np.asarray(states)
        return self.means[states] + self.sigma * rng.standard_normal(states.shape)

    def mean(self, m):
        return float(self.means[m])

    def to_dict(self):
        return {"family": "gaussian", "means": self.means.tolist(), "sigma": self.sigma}


class TruncatedGaussianModel(ObservationModel):
    """Gaussian densities renormalized to the closed interval ``support``."""

    affine_llr = True

    def __init__(self, means, sigma: float, support=(-5.0, 5.0)):
        self.means, self.sigma = _check_means_sigma(means, sigma)
        lo, hi = (float(v) for v in support)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"support must be a finite interval a < b, got {support!r}")
        self.support = (lo, hi)
        self._a = (lo - self.means) / self.sigma
        self._b = (hi - self.means) / self.sigma
        # log(Phi(b) - Phi(a)), stable when both tails are tiny
        la, lb = special.log_ndtr(self._a), special.log_ndtr(self._b)
        self._log_mass = lb + np.log1p(-np.exp(la - lb))
        self._log_norm = -math.log(self.sigma) - 0.5 * math.log(2.0 * math.pi) - self._log_mass

    @property
    def n_states(self):
        return self.means.size

    def log_likelihoods(self, xi):
        xi = np.asarray(xi, dtype=float)
        z = (xi[..., None] - self.means) / self.sigma
        out = self._log_norm - 0.5 * z * z
        lo, hi = self.support
        outside = (xi < lo) | (xi > hi)
        if np.any(outside):
            out = np.where(outside[..., None], -np.inf, out)
        return out

    def sample(self, states, rng):
        states = np.asarray(states)
        u = rng.random(states.shape)
        return stats.truncnorm.ppf(
            u, self._a[states], self._b[states], loc=self.means[states], scale=self.sigma
        )

    def mean(self, m):
        return float(stats.truncnorm.mean(self._a[m], self._b[m], loc=self.means[m], scale=self.sigma))

    def to_dict(self):
        return {
            "family": "truncated_gaussian",
            "means": self.means.tolist(),
            "sigma": self.sigma,
            "support": list(self.support),
        }


class TabularModel(ObservationModel):
    """Finite observation alphabet: ``table[m, k] = L(k | theta_m)``."""

    closed_form_kl = True
    discrete = True

    def __init__(self, table):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2:
            raise ValueError("table must be 2-d (states x symbols)")
        if np.any(table < 0) or not np.allclose(table.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("each row of table must be a probability vector")
        self.table = table
        with np.errstate(divide="ignore"):
            self._log_table = np.log(table)
        self.support = (0.0, float(table.shape[1] - 1))

    @property
    def n_states(self):
        return self.table.shape[0]

    def log_likelihoods(self, xi):
        return np.moveaxis(self._log_table[:, np.asarray(xi, dtype=int)], 0, -1)

    def sample(self, states, rng):
        states = np.asarray(states)
        cdf = np.cumsum(self.table, axis=1)
        u = rng.random(states.shape)
        k = (u[..., None] >= cdf[states]).sum(axis=-1)
        return np.minimum(k, self.table.shape[1] - 1)

    def mean(self, m):
        return float(self.table[m] @ np.arange(self.table.shape[1]))

    def to_dict(self):
        return {"family": "tabular", "table": self.table.tolist()}


def model_from_dict(spec: dict) -> ObservationModel:
    """Build a model from ``{"family": ..., "means": ..., "sigma": ..., "support": ...}``."""
    spec = dict(spec)
    family = spec.pop("family", None)
    allowed = {
        "gaussian": {"means", "sigma"},
        "truncated_gaussian": {"means", "sigma", "support"},
        "tabular": {"table"},
    }
    if family not in allowed:
        raise ValueError(f"family: unknown model family {family!r}")
    extra = set(spec) - allowed[family]
    if extra:
        raise ValueError(f"{sorted(extra)[0]}: unknown key for family {family!r}")
    if family == "gaussian":
        return GaussianGridModel(spec["means"], spec["sigma"])
    if family == "truncated_gaussian":
        return TruncatedGaussianModel(spec["means"], spec["sigma"], spec.get("support", (-5.0, 5.0)))
    return TabularModel(spec["table"])


@dataclass(frozen=True)
class InfoProfile:
    """Identifiability vector and LLR bound for one (truth, reference) pair.

    ``d[k]`` belongs to ``others[k]``, the k-th state index other than the
    reference.  ``C`` is ``inf`` for unbounded supports.
    """

    d: np.ndarray
    others: tuple[int, ...]
    reference: int
    C: float = math.inf
    d_min: float = field(init=False)
    d_max: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d_min", float(np.min(self.d)))
        object.__setattr__(self, "d_max", float(np.max(self.d)))


def _others(M, reference):
    return tuple(m for m in range(M) if m != reference)


def _check_pair(true_model, likelihood_model, true_state, reference):
    if not 0 <= true_state < true_model.n_states:
        raise ValueError(f"true_state {true_state} out of range")
    if not 0 <= reference < likelihood_model.n_states:
        raise ValueError(f"reference_index {reference} out of range")
    if likelihood_model.n_states < 2:
        raise ValueError("likelihood model needs at least 2 states")
    if tuple(true_model.support) != tuple(likelihood_model.support):
        raise ValueError("true and likelihood models must share the same support")


def _expected_log_likelihoods(true_model, likelihood_model, true_state):
    """E_f[log L(xi | theta_m)] for every m, f = true_model at true_state."""
    if (
        type(true_model) is GaussianGridModel
        and type(likelihood_model) is GaussianGridModel
    ):
        mu_f, s_f = true_model.means[true_state], true_model.sigma
        s = likelihood_model.sigma
        sq = s_f**2 + (mu_f - likelihood_model.means) ** 2
        return likelihood_model._log_norm - sq / (2.0 * s * s)
    if true_model.discrete and likelihood_model.discrete:
        p = true_model.table[true_state]
        logs = likelihood_model.log_likelihoods(np.arange(p.size))
        mask = p > 0
        return p[mask] @ logs[mask]

    lo, hi = true_model.support
    center = true_model.mean(true_state)
    out = np.empty(likelihood_model.n_states)
    for m in range(likelihood_model.n_states):

        def integrand(x, m=m):
            lf = true_model.log_likelihood(x, true_state)
            if not np.isfinite(lf):
                return 0.0
            return math.exp(lf) * float(likelihood_model.log_likelihood(x, m))

        points = [center] if math.isfinite(lo) and lo < center < hi else None
        val, err = integrate.quad(
            integrand, lo, hi, points=points, epsabs=1e-10, epsrel=1e-12, limit=500
        )
        if not np.isfinite(val):
            raise ArithmeticError(f"KL quadrature diverged for state {m}")
        out[m] = val
    return out


def compute_identifiability(
    true_model: ObservationModel,
    likelihood_model: ObservationModel,
    true_state: int = 0,
    reference_index: int | None = None,
) -> InfoProfile:
    """d_m = KL(f || L_m) - KL(f || L_ref) for every m != reference.

    ``reference_index`` defaults to ``true_state``.  The returned profile has
    ``C = inf``; use :func:`info_profile` to fill in the LLR bound.
    """
    ref = true_state if reference_index is None else reference_index
    _check_pair(true_model, likelihood_model, true_state, ref)
    ell = _expected_log_likelihoods(true_model, likelihood_model, true_state)
    others = _others(likelihood_model.n_states, ref)
    d = np.array([ell[ref] - ell[m] for m in others])
    bad = [m for m, dm in zip(others, d) if not dm > IDENTIFIABILITY_FLOOR]
    if bad:
        raise AssumptionViolated(
            f"assumption violated: state {bad[0]} is not identifiable against "
            f"reference {ref} (d = {d[others.index(bad[0])]:.3g})"
        )
    return InfoProfile(d=d, others=others, reference=ref)


def compute_llr_bound(
    true_model: ObservationModel,
    likelihood_model: ObservationModel,
    true_state: int = 0,
    reference_index: int | None = None,
    d=None,
    grid_points: int = 20001,
) -> float:
    """C = max_m sup_xi |log L_m(xi)/L_ref(xi) + d_m| over the support.

    Affine-LLR families are evaluated at the two endpoints only; other
    continuous models use a dense grid refined around the maximizer.
    ``d`` may be passed to skip recomputation (it may contain zeros here).
    """
    ref = true_state if reference_index is None else reference_index
    _check_pair(true_model, likelihood_model, true_state, ref)
    if not true_model.bounded:
        raise BoundUndefined("C undefined: observation support is unbounded")
    others = _others(likelihood_model.n_states, ref)
    if d is None:
        ell = _expected_log_likelihoods(true_model, likelihood_model, true_state)
        d = np.array([ell[ref] - ell[m] for m in others])
    d = np.asarray(d, dtype=float)

    def centered(xi):
        ll = likelihood_model.log_likelihoods(xi)
        return ll[..., list(others)] - ll[..., [ref]] + d

    lo, hi = true_model.support
    if likelihood_model.discrete:
        f = np.exp(true_model.log_likelihoods(np.arange(int(hi) + 1))[:, true_state])
        vals = np.abs(centered(np.arange(int(hi) + 1)))[f > 0]
        return float(vals.max())
    if likelihood_model.affine_llr:
        return float(np.abs(centered(np.array([lo, hi]))).max())

    grid = np.linspace(lo, hi, grid_points)
    vals = np.abs(centered(grid))
    k, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = vals[k, j]
    step = grid[1] - grid[0]
    res = optimize.minimize_scalar(
        lambda x: -abs(float(centered(np.array(x))[j])),
        bounds=(max(lo, grid[k] - step), min(hi, grid[k] + step)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(max(best, -res.fun))


def info_profile(
    true_model: ObservationModel,
    likelihood_model: ObservationModel,
    true_state: int = 0,
    reference_index: int | None = None,
) -> InfoProfile:
    """Identifiability plus C (``inf`` when the support is unbounded)."""
    prof = compute_identifiability(true_model, likelihood_model, true_state, reference_index)
    C = math.inf
    if true_model.bounded:
        C = compute_llr_bound(
            true_model, likelihood_model, true_state, prof.reference, d=prof.d
        )
    return InfoProfile(d=prof.d, others=prof.others, reference=prof.reference, C=C)


def gaussian_identifiability(true_index: int, sigma: float, n_states: int) -> np.ndarray:
    """Closed form d for the shared-sigma grid with f = L(. | theta_l).

    Returns ``d`` over ``m != true_index`` in increasing index order, with
    ``d_m = (l - m)^2 / (2 sigma^2)``.
    """
    m = np.array(_others(n_states, true_index))
    return (true_index - m) ** 2 / (2.0 * sigma**2)


def expected_llr(true_model, likelihood_model, true_state: int, reference_index: int = 0) -> np.ndarray:
    """E_f[log L_m(xi) - log L_ref(xi)] for every m != reference_index.

    Equals ``-d`` when the truth is the reference state; after a switch it is
    the drift of the reference system in the old coordinates.
    """
    _check_pair(true_model, likelihood_model, true_state, reference_index)
    ell = _expected_log_likelihoods(true_model, likelihood_model, true_state)
    others = _others(likelihood_model.n_states, reference_index)
    return np.array([ell[m] - ell[reference_index] for m in others])
