"""Free Gaussian packets in wave mechanics and in the phase-space (KvN) picture.

Both spread, but only the quantum width is tied to the momentum width through hbar.
"""
from kvnlab.experiments import gaussian_free_experiment
from kvnlab.numerics import Grid1D, Grid2D

qm_grid = Grid1D(4096, -40, 40)
kvn_grid = Grid2D(Grid1D(512, -30, 40), Grid1D(256, -12, 16))

for a, b, p_i, tau in [(1.0, 1.0, 0.0, 1.0), (0.5, 1.0, 1.0, 2.0), (2.0, 0.5, 3.0, 2.0)]:
    r = gaussian_free_experiment(a, b, p_i, tau, qm_grid=qm_grid, kvn_grid=kvn_grid)
    qm, kvn = r.moments["qm"], r.moments["kvn"]
    print(f"a={a} b={b} p_i={p_i} tau={tau}")
    print(f"  QM   <x>={qm['mean']:.6f}  var={qm['var']:.6f}  (closed form {r.closed_form['qm']['var']:.6f})")
    print(f"  KvN  <q>={kvn['q_mean']:.6f}  var={kvn['q_var']:.6f}  (closed form {r.closed_form['kvn']['q_var']:.6f})")
    print(f"  all checks passed: {r.passed}, worst error {r.max_abs_error:.1e}")
