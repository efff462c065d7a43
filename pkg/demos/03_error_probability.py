"""Instantaneous error probability on a truncated Gaussian model.

Observations come from a Gaussian with mean 0 truncated to [-5, 5]; the
filter's candidate states have means 1, 2 and 3, so state 0 (mean 1) is
the best available explanation.  With beta = alpha the error probability
shrinks as alpha does, and noisier observations raise it.
Run: python demos/03_error_probability.py
"""

from abhmm import EnvironmentSpec, FilterConfig, MonteCarloConfig, TruncatedGaussianModel, monte_carlo_compare
from abhmm.model import info_profile

alphas = (0.01, 0.02, 0.05, 0.1)
mc = MonteCarloConfig(n_runs=1000, master_seed=4, horizon=200)
print(f"{'sigma':>5s} {'d':>22s} {'C':>7s}   p_e(200) for alpha=beta in {alphas}")
for sigma in (1.0, 2.0, 3.0):
    truth = TruncatedGaussianModel([0.0, 1.0, 2.0], sigma)
    lik = TruncatedGaussianModel([1.0, 2.0, 3.0], sigma)
    prof = info_profile(truth, lik, 0)
    res = monte_carlo_compare(mc, EnvironmentSpec.constant(0, 200), truth, lik,
                              [FilterConfig("abhmm", alpha=a, beta=a) for a in alphas], workers=4)
    pe = "  ".join(f"{s.p_e[-1]:.3f}" for s in res)
    print(f"{sigma:5.1f} {str(prof.d.round(4)):>22s} {prof.C:7.3f}   {pe}")
