"""How long does it take to unlearn a long-held belief?

On the binary reference system the state switches after T1 steps.  Bayes
needs time proportional to T1 to undo the evidence it accumulated; the
alpha-beta HMM saturates at its fixed point, so its recovery time stops
growing.  Run: python demos/04_adaptation.py
"""

from abhmm.presets import adaptation_table

print(f"{'T1':>5s} {'Bayes':>6s} {'(lower bound)':>14s} {'alpha-beta HMM':>15s} {'(sufficient)':>13s}")
for T1, b, b_lb, a, a_suff in adaptation_table([0.0, 1.0], 1.0, alpha=0.05, beta=1.0, x0=0.0,
                                                T1_values=[10, 50, 200, 1000, 5000]):
    print(f"{T1:5d} {b:6d} {b_lb:14.1f} {a:15d} {a_suff:13.2f}")
