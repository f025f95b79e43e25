"""Two slits: both theories imprint fringes on the conjugate variable, only QM shows them in x."""
import numpy as np

from kvnlab.experiments import TwoSlitConfig, two_slit_kvn, two_slit_qm

cfg = TwoSlitConfig()
qm = two_slit_qm(cfg)
kvn = two_slit_kvn(cfg)


def sketch(field, lo=-6.0, hi=6.0, rows=25, width=50):
    x, v = field.grid.points, field.values
    top = v[(x >= lo) & (x <= hi)].max()
    for xi in np.linspace(lo, hi, rows):
        print(f"{xi:6.2f} |" + "#" * int(round(width * np.interp(xi, x, v) / top)))


print("QM position density at t = 1")
sketch(qm.densities["x_t1"])
print("QM minima:", np.round(qm.diagnostics["x_t1_minima"], 4))
print("oracle minima:", np.round(qm.diagnostics["x_t1_oracle_minima"], 4))
print()
print("KvN position density at t = 1")
sketch(kvn.densities["x_t1"])
print("failed checks: QM", qm.failed_checks(), " KvN", kvn.failed_checks())
