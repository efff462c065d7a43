"""Tracking a state that is redrawn every ten steps.

Five Gaussian states with means 1..5 and sigma 0.5; every ten steps the
true state is redrawn uniformly.  The sweep compares the alpha-beta HMM to
its linearized variant, which discounts the log-prior geometrically
instead of mixing in probability space.
Run: python demos/05_accuracy_sweep.py
"""

from abhmm import EnvironmentSpec, FilterConfig, GaussianGridModel, MonteCarloConfig, monte_carlo_compare
from abhmm.presets import SIM_ALPHAS

model = GaussianGridModel.grid(5, 0.5)
env = EnvironmentSpec.periodic_redraw(10, 10_000)
configs = [FilterConfig(v, alpha=a, beta=1.0) for v in ("abhmm", "linearized_abhmm") for a in SIM_ALPHAS]
res = monte_carlo_compare(MonteCarloConfig(1, 20240601, 10_000), env, model, model, configs)
half = len(SIM_ALPHAS)
print(f"{'alpha':>6s} {'alpha-beta HMM':>15s} {'linearized':>11s}")
for a, s, lin in zip(SIM_ALPHAS, res[:half], res[half:]):
    print(f"{a:6.3f} {s.overall_accuracy:15.3f} {lin.overall_accuracy:11.3f}")
