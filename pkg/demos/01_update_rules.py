"""Five belief-update rules on one switching observation stream.

A two-state Gaussian source sits in state 0 for 60 steps, then jumps to
state 1.  Bayes piles up confidence and is slow to let go; the alpha-beta
HMM keeps a floor of alpha on every state and turns around within a few
steps.  Run: python demos/01_update_rules.py
"""

import numpy as np

from abhmm import EnvironmentSpec, FilterConfig, GaussianGridModel, generate_trajectory, run_filter
from abhmm.sim import measure_adaptation_time

model = GaussianGridModel([0.0, 1.0], sigma=1.0)
env = EnvironmentSpec.switch_at(0, 1, T1=60, horizon=120)
traj = generate_trajectory(env, model, np.random.default_rng(7))

filters = [
    FilterConfig("bayes"),
    FilterConfig("abhmm", alpha=0.05, beta=1.0),
    FilterConfig("linearized_abhmm", alpha=0.05, beta=1.0),
    FilterConfig("asl", delta=0.1),
    FilterConfig("equal_exit_hmm", h=0.05),
]

print(f"{'filter':34s} {'mu_1 at T1':>11s} {'mu_1 at end':>12s} {'steps to adapt':>15s}")
for cfg in filters:
    hist = run_filter(cfg, model, traj)
    probs = np.exp(hist)
    t = measure_adaptation_time(hist, env.T1)
    print(f"{cfg.label:34s} {probs[60, 1]:11.2e} {probs[-1, 1]:12.3f} {str(t):>15s}")

# equal_exit_hmm with h and abhmm with alpha = h/(M-1), beta = 1 agree exactly
a = run_filter(FilterConfig("abhmm", alpha=0.05, beta=1.0), model, traj)
b = run_filter(FilterConfig("equal_exit_hmm", h=0.05), model, traj)
print("\nmax |abhmm(0.05, 1) - equal-exit HMM(h=0.05)| =", float(np.abs(np.exp(a) - np.exp(b)).max()))
