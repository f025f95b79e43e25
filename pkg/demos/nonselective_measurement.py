"""Unread position measurement: it changes the quantum future but not the classical one."""
from kvnlab.kvn import gaussian_phase_space
from kvnlab.measurement import nsm_phi_kvn, nsm_x_qm
from kvnlab.numerics import Grid1D, Grid2D
from kvnlab.quantum import gaussian_packet

qm = nsm_x_qm(gaussian_packet(Grid1D(4096, -40, 40), 1.0), tau=1.0)
d = qm.diagnostics
print("quantum, measuring x at t = 0")
print(f"  momentum density right after: spread {d['p_t0p_spread']:.1e} (flat)")
print(f"  position density right after: change {d['x_t0_change']:.1e} (unchanged)")
print(f"  L1 distance between measured and unmeasured x densities at tau: {d['x_tau_mixed_l1_from_pure']:.3f}")

grid = Grid2D(Grid1D(256, -12, 12), Grid1D(256, -8, 8))
state = gaussian_phase_space(grid, 1.0, 1.0, p_i=1.0)
print("KvN, measuring the phase-space point at t = 0")
for tau in (0.0, 1.0, 2.0):
    r = nsm_phi_kvn(state, tau)
    print(f"  tau={tau}: L1(measured, unmeasured) = {r.diagnostics['phi_tau_l1_mixed_vs_pure']:.1e}")
