"""Two-level system: an unread measurement of A at t = 0 changes the later statistics of A.

Run with ``python demos/two_level_measurement.py``.
"""
import numpy as np

from kvnlab.measurement import two_level_closed_form, two_level_experiment

print("omega*tau   P(a) no NSM   P(a) after NSM   gap")
for wt in np.linspace(0, np.pi / 2, 9):
    pp, pm = two_level_experiment(wt)
    print(f"{wt:8.4f}   {pp:11.6f}   {pm:14.6f}   {pm - pp:+.6f}")

# the two branches coincide only where cos(2 omega tau)^2 = 1
for wt in (0.0, np.pi / 6, np.pi / 4, np.pi / 2):
    pp, pm = two_level_experiment(wt)
    cp, cm = two_level_closed_form(wt)
    print(f"omega*tau = {wt:.4f}: |simulated - closed form| = {max(abs(pp - cp), abs(pm - cm)):.1e},"
          f" branches equal: {abs(pp - pm) < 1e-12}")
