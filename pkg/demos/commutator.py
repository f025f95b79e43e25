"""Spectral check of [phi, lambda] = i on band-limited test states."""
import warnings

from kvnlab.experiments import CommutatorWarning, commutator_residuals, commutator_test_family
from kvnlab.numerics import Grid1D

for n in (256, 512, 1024):
    g = Grid1D(n, -10, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CommutatorWarning)
        res = commutator_residuals(g, commutator_test_family(g))
    shown = ["skipped" if r is None else f"{r:.1e}" for r in res]
    print(f"n={n:5d}: " + "  ".join(shown))
