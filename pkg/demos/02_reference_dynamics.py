"""The deterministic reference system and its closed-form rates.

Replacing each random log-likelihood ratio by its mean gives a
deterministic recursion for the log-belief ratios.  Its fixed point is the
steady state of the filter; lambda and gamma1 bound how fast it is reached,
and the belief bounds sandwich the steady belief on the true state.
Run: python demos/02_reference_dynamics.py
"""

import numpy as np

from abhmm import bounds_report, reference_trajectory, solve_fixed_point
from abhmm.model import gaussian_identifiability

M, sigma = 5, 1.0
d = gaussian_identifiability(0, sigma, M)  # (l - m)^2 / (2 sigma^2)
print("identifiability d =", d)

for alpha, beta in [(0.01, 1.0), (0.05, 1.0), (0.1, 2.0)]:
    fp = solve_fixed_point(alpha, beta, d)
    rep = bounds_report(alpha, beta, d)
    tr = reference_trajectory(np.zeros(M - 1), alpha, beta, d, 60)
    gap = np.abs(tr - fp.x_inf).max(axis=1)
    print(f"\nalpha={alpha}, beta={beta}: {fp.iterations} iterations, residual {fp.residual:.1e}")
    print("  x_inf          =", np.round(fp.x_inf, 4))
    print(f"  mu_0 steady    = {fp.mu_inf[0]:.5f} in [{rep.mu_lower:.5f}, {rep.mu_upper:.5f}]")
    print(f"  lambda={rep.lam:.4f}  gamma1={rep.gamma1:.4f}")
    for i in (1, 5, 10, 20):
        print(f"  step {i:2d}: gap {gap[i]:.3e}  <=  lambda^i gap_0 = {gap[0] * rep.lam**i:.3e}")
