"""Phases of a KvN wave are invisible to multiplicative observables."""
import numpy as np

from kvnlab.experiments import PhaseDressing, pure_vs_mixed_equivalence, superselection_phase_invariance
from kvnlab.kvn import gaussian_phase_space
from kvnlab.numerics import Grid1D, Grid2D

grid = Grid2D(Grid1D(256, -12, 12), Grid1D(256, -8, 8))
state = gaussian_phase_space(grid, 1.0, 1.0, p_i=0.5)
observables = [lambda q, p: q * p, lambda q, p: np.cos(q), lambda q, p: 0.5 * (q * q + p * p)]
for d in [PhaseDressing("linear", {"kq": 3.0}), PhaseDressing("quadratic", {"cqp": 2.0}),
          PhaseDressing("random-smooth", {}, seed=4)]:
    print(f"{d.kind:14s} relative change of <O>: {superselection_phase_invariance(state, d, observables):.1e}")

rng = np.random.default_rng(0)
amplitude = np.sqrt(rng.random(64))
print(f"pure vs diagonal mixture, d=64: {pure_vs_mixed_equivalence(amplitude, [rng.standard_normal(64)]):.1e}")
