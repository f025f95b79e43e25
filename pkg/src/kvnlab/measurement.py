"""
Measurement calculus: Born rule, projective dephasing for finite systems,
and non-selective measurements of position (quantum) and of phase-space
point (KvN) on continuous grids.

A continuous non-selective measurement leaves the mixture
``rho_M = int dxi0 w(xi0) |xi0><xi0|`` with ``w = |psi(xi0)|^2``. Its later
statistics follow from what the propagator does to one eigenstate: the
quantum free kernel has constant modulus, the KvN kernel carries a point
to a point. Both are evaluated here without building the ``O(n^2)`` sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DataError, ParameterError
from .kvn import (HamiltonianSpec, KvnState, evolve_characteristics, evolve_free_exact,
                  choose_shear_method, lambda_density, phi_density, shear_rows, transport)
from .numerics import (ComplexField1D, ComplexField2D, Grid1D, RealField1D, RealField2D,
                       dft2_phi_to_lambda, dft_x_to_p, integrate, moments)
from .quantum import QmState, evolve_free, momentum_density, position_density
from .report import ExperimentReport

__all__ = [
    "FiniteState", "FiniteObservable", "DensityOperator", "ContinuousMixture",
    "born_probability", "born_probabilities", "nonselective_dephase", "unitary",
    "two_level_experiment", "two_level_closed_form", "two_level_setup",
    "nsm_x_qm", "nsm_phi_kvn", "l1_distance",
]

UNIT_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FiniteState:
    amplitudes: np.ndarray
    basis_label: str = ""

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        if amp.size < 2:
            raise ParameterError("a finite state needs dimension >= 2")
        norm = np.vdot(amp, amp).real
        if abs(norm - 1.0) > UNIT_TOL:
            raise DataError(f"state norm^2 is {norm!r}, expected 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self):
        return self.amplitudes.size


@dataclass(frozen=True, eq=False)
class FiniteObservable:
    """Observable given by its eigenbasis (columns) and eigenvalues."""

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        vecs = np.array(self.eigenvectors, dtype=complex)
        vals = np.array(self.eigenvalues, dtype=float).ravel()
        d = vecs.shape[0]
        if vecs.shape != (d, d) or vals.size != d:
            raise ParameterError("eigenvectors must be d x d with d eigenvalues")
        if np.abs(vecs.conj().T @ vecs - np.eye(d)).max() > UNIT_TOL:
            raise DataError("eigenvector columns are not orthonormal")
        vecs.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvectors", vecs)
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def dim(self):
        return self.eigenvalues.size

    def projector(self, k):
        v = self.eigenvectors[:, k]
        return np.outer(v, v.conj())

    def matrix(self):
        v = self.eigenvectors
        return v @ np.diag(self.eigenvalues) @ v.conj().T


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError("density matrix must be square")
        if np.abs(m - m.conj().T).max() > UNIT_TOL:
            raise DataError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > UNIT_TOL:
            raise DataError(f"density matrix trace is {np.trace(m).real!r}")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise DataError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, state: FiniteState):
        v = state.amplitudes
        return cls(np.outer(v, v.conj()))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def expectation(self, op) -> float:
        return float(np.trace(self.matrix @ np.asarray(op)).real)

    def evolve(self, u) -> "DensityOperator":
        u = np.asarray(u)
        m = u @ self.matrix @ u.conj().T
        return DensityOperator(0.5 * (m + m.conj().T))


@dataclass(frozen=True, eq=False)
class ContinuousMixture:
    """Weights ``|psi(xi0, 0)|^2`` over the eigenvalue grid of the measured variable."""

    weight_density: object  # RealField1D or RealField2D
    theory: str
    elapsed: float = 0.0

    def __post_init__(self):
        if self.theory not in ("qm", "kvn"):
            raise ParameterError(f"theory must be 'qm' or 'kvn', got {self.theory!r}")
        w = self.weight_density.values
        if w.min() < -1e-12:
            raise DataError("mixture weights must be non-negative")
        total = float(integrate(self.weight_density))
        if abs(total - 1.0) > 1e-8:
            raise DataError(f"mixture weights integrate to {total!r}")

    @property
    def eigenvalue_grid(self):
        return self.weight_density.grid


def _check_index(obs, k):
    if not (0 <= int(k) < obs.dim) or int(k) != k:
        raise ParameterError(f"outcome index {k} out of range for dimension {obs.dim}")


def born_probability(state, obs: FiniteObservable, k: int) -> float:
    """Probability of outcome ``k`` for a FiniteState or DensityOperator."""
    _check_index(obs, k)
    if isinstance(state, DensityOperator):
        return state.expectation(obs.projector(k))
    if state.dim != obs.dim:
        raise ParameterError("state and observable dimensions differ")
    return float(abs(np.vdot(obs.eigenvectors[:, k], state.amplitudes)) ** 2)


def born_probabilities(state, obs: FiniteObservable) -> np.ndarray:
    return np.array([born_probability(state, obs, k) for k in range(obs.dim)])


def nonselective_dephase(rho: DensityOperator, obs: FiniteObservable) -> DensityOperator:
    """Unread projective measurement: ``rho -> sum_k P_k |e_k><e_k|``."""
    v = obs.eigenvectors
    probs = np.einsum("ik,ij,jk->k", v.conj(), rho.matrix, v).real
    m = (v * probs) @ v.conj().T
    return DensityOperator(0.5 * (m + m.conj().T))


def unitary(hamiltonian, t: float, hbar: float = 1.0) -> np.ndarray:
    return sla.expm(-1j * np.asarray(hamiltonian, dtype=complex) * t / hbar)


def two_level_setup():
    """Initial state, observable and dimensionless Hamiltonian of the two-level exercise.

    Basis ``{|+>, |->}``; the Hamiltonian is ``diag(1, -1)`` in units of ``hbar omega``.
    """
    psi0 = FiniteState([0.5, np.sqrt(0.75)], "energy")
    s = 1.0 / np.sqrt(2.0)
    omega_obs = FiniteObservable(np.array([[s, s], [s, -s]]), [1.0, -1.0])
    h = np.diag([1.0, -1.0])
    return psi0, omega_obs, h


def two_level_experiment(omega_tau: float):
    """Probability of outcome ``a`` at ``2 tau`` without and with an NSM of Omega at ``tau``."""
    if not np.isfinite(omega_tau):
        raise ParameterError(f"omega_tau must be finite, got {omega_tau}")
    psi0, obs, h = two_level_setup()
    u_tau = unitary(h, omega_tau)
    psi_2tau = FiniteState(u_tau @ u_tau @ psi0.amplitudes, "energy")
    p_pure = born_probability(psi_2tau, obs, 0)
    rho = DensityOperator.pure(psi0).evolve(u_tau)
    rho = nonselective_dephase(rho, obs).evolve(u_tau)
    p_mixed = born_probability(rho, obs, 0)
    return p_pure, p_mixed


def two_level_closed_form(omega_tau):
    c = np.sqrt(0.75)
    return 0.5 * (1 + c * np.cos(4 * omega_tau)), 0.5 * (1 + c * np.cos(2 * omega_tau) ** 2)


def l1_distance(a, b) -> float:
    if a.grid != b.grid:
        raise DataError("densities live on different grids")
    return float(np.abs(a.values - b.values).sum() * a.cell)


def _spread(values):
    return float(np.max(values) - np.min(values))


def _lattice_delta(grid: Grid1D, index: int) -> ComplexField1D:
    v = np.zeros(grid.n, dtype=complex)
    v[index] = 1.0 / np.sqrt(grid.spacing)
    return ComplexField1D(grid, v)


def nsm_x_qm(initial: QmState, tau: float, box_length: float | None = None) -> ExperimentReport:
    """Non-selective measurement of position at t=0 versus no measurement.

    Densities: ``x_t0m``/``x_t0p`` (before/after), ``p_t0m``/``p_t0p``,
    ``x_tau_pure`` (unmeasured branch) and ``x_tau_mixed`` (measured branch,
    box-regularized kernel law). The kernel law is cross-checked by a lattice
    computation: the mixture's density at ``tau`` is the circular convolution
    of the weights with ``|U_tau delta|^2``.
    """
    if not (np.isfinite(tau) and tau > 0):
        raise ParameterError(f"tau must be positive for the kernel law, got {tau}")
    grid = initial.grid
    if box_length is None:
        box_length = grid.length
    if not box_length > 0:
        raise ParameterError(f"box_length must be positive, got {box_length}")
    hbar, mass = initial.hbar, initial.mass
    report = ExperimentReport("nsm-qm", params={"tau": tau, "box_length": box_length,
                                                "hbar": hbar, "mass": mass, "n": grid.n,
                                                "x_min": grid.x_min, "x_max": grid.x_max})
    rho_x_0m = position_density(initial)
    rho_p_0m = momentum_density(initial)
    mixture = ContinuousMixture(rho_x_0m, "qm")
    weights = mixture.weight_density
    total_w = float(integrate(weights))

    # position statistics of the mixture are its diagonal: the weights themselves
    rho_x_0p = RealField1D(grid, weights.values)

    # every lattice eigenstate |x_j> has the same momentum density (shift = phase only)
    delta = _lattice_delta(grid, grid.n // 2)
    per_state = dft_x_to_p(delta, hbar).density()
    rho_p_0p = RealField1D(per_state.grid, total_w * per_state.values)

    # |K(x, tau; x0)|^2 = m / (2 pi hbar tau) for all x, x0; normalize over the box
    kernel_sq = mass / (2 * np.pi * hbar * tau)
    unnormalized = kernel_sq * total_w
    rho_x_mixed = RealField1D(grid, np.full(grid.n, unnormalized / (unnormalized * box_length)))

    u_delta = evolve_free(QmState(ComplexField1D(grid, _lattice_delta(grid, 0).values), hbar, mass), tau)
    kern = np.abs(u_delta.values) ** 2 * grid.spacing
    lattice = np.fft.ifft(np.fft.fft(weights.values) * np.fft.fft(kern)).real

    rho_x_pure = position_density(evolve_free(initial, tau))
    flat = RealField1D(grid, np.full(grid.n, 1.0 / grid.length))

    report.densities.update({
        "x_t0m": rho_x_0m, "x_t0p": rho_x_0p, "p_t0m": rho_p_0m, "p_t0p": rho_p_0p,
        "x_tau_pure": rho_x_pure, "x_tau_mixed": rho_x_mixed,
    })
    mean_p, var_p = moments(rho_x_pure)
    report.moments.update({"x_tau_pure": {"mean": mean_p, "var": var_p},
                           "x_t0": dict(zip(("mean", "var"), moments(rho_x_0m))),
                           "p_t0m": dict(zip(("mean", "var"), moments(rho_p_0m)))})
    p_spread = _spread(rho_p_0p.values)
    x_change = float(np.abs(rho_x_0p.values - rho_x_0m.values).max())
    flat_dev = float(np.abs(rho_x_mixed.values * box_length - 1.0).max())
    pure_vs_flat = l1_distance(rho_x_pure, flat)
    mixed_vs_pure = l1_distance(rho_x_mixed, rho_x_pure) if box_length == grid.length else float("nan")
    report.closed_form.update({"rho_p_t0p": 1.0 / per_state.grid.length,
                               "rho_x_tau_mixed": 1.0 / box_length,
                               "kernel_modulus_sq": kernel_sq})
    report.diagnostics.update({
        "p_t0p_spread": p_spread, "x_t0_change": x_change,
        "x_tau_mixed_rel_deviation": flat_dev, "x_tau_pure_l1_from_flat": pure_vs_flat,
        "x_tau_mixed_l1_from_pure": mixed_vs_pure,
        "lattice_rel_deviation": float(np.abs(lattice * grid.length - 1.0).max()),
    })
    report.record_error(abs(rho_p_0p.values - 1.0 / per_state.grid.length).max())
    report.record_error(x_change)
    report.check("p_t0p_flat", p_spread < 1e-10)
    report.check("x_t0_unchanged", x_change < 1e-12)
    report.check("x_tau_mixed_flat", flat_dev < 0.01)
    report.check("x_tau_pure_not_flat", pure_vs_flat > 0.5)
    return report


def nsm_phi_kvn(initial: KvnState, tau: float, hamiltonian: HamiltonianSpec | None = None,
                steps: int | None = None) -> ExperimentReport:
    """Non-selective measurement of phi at t=0 versus no measurement, KvN dynamics.

    Measured branch: each eigenstate ``|phi0>`` is carried to the single point
    ``Phi_tau(phi0)``, so the mixture's phi-density is the weight density
    transported along the flow. Unmeasured branch: the wave itself is
    evolved and its modulus squared taken. For the free particle both use
    the row shear; otherwise both use semi-Lagrangian transport.
    """
    if not np.isfinite(tau):
        raise ParameterError(f"tau must be finite, got {tau}")
    grid = initial.grid
    free = hamiltonian is None or hamiltonian.kind == "free"
    report = ExperimentReport("nsm-kvn", params={
        "tau": tau, "mass": initial.mass, "hamiltonian": "free" if free else hamiltonian.kind,
        "n_q": grid.q_axis.n, "q_min": grid.q_axis.x_min, "q_max": grid.q_axis.x_max,
        "n_p": grid.p_axis.n, "p_min": grid.p_axis.x_min, "p_max": grid.p_axis.x_max})
    rho_phi_0m = phi_density(initial)
    rho_lambda_0m = lambda_density(initial)
    mixture = ContinuousMixture(rho_phi_0m, "kvn")
    weights = mixture.weight_density
    total_w = float(integrate(weights))
    rho_phi_0p = RealField2D(grid, weights.values)

    delta = np.zeros(grid.shape, dtype=complex)
    delta[grid.shape[0] // 2, grid.shape[1] // 2] = 1.0 / np.sqrt(grid.cell_area)
    per_state = dft2_phi_to_lambda(ComplexField2D(grid, delta)).density()
    rho_lambda_0p = RealField2D(per_state.grid, total_w * per_state.values)

    if free:
        method = choose_shear_method(initial.values, grid)
        shifts = grid.p_axis.points * tau / initial.mass
        mixed = shear_rows(weights.values, grid, shifts, method)
        pure_state = evolve_free_exact(initial, tau, method)
        report.params["shear_method"] = method
    else:
        mixed, info = transport(weights.values, grid, hamiltonian, tau, steps)
        pure_state = evolve_characteristics(initial, hamiltonian, tau, steps)
        report.diagnostics["departed_fraction"] = info["departed_fraction"]
    rho_phi_mixed = RealField2D(grid, mixed)
    rho_phi_pure = phi_density(pure_state)

    report.densities.update({"phi_t0m": rho_phi_0m, "phi_t0p": rho_phi_0p,
                             "lambda_t0m": rho_lambda_0m, "lambda_t0p": rho_lambda_0p,
                             "phi_tau_pure": rho_phi_pure, "phi_tau_mixed": rho_phi_mixed})
    for label, dens in (("pure", rho_phi_pure), ("mixed", rho_phi_mixed)):
        qm_, qv = moments(dens.q_marginal())
        pm_, pv = moments(dens.p_marginal())
        report.moments[f"phi_tau_{label}"] = {"q_mean": qm_, "q_var": qv, "p_mean": pm_, "p_var": pv}
    l1 = l1_distance(rho_phi_mixed, rho_phi_pure)
    lam_spread = _spread(rho_lambda_0p.values)
    report.closed_form["rho_lambda_t0p"] = 1.0 / (per_state.grid.q_axis.length * per_state.grid.p_axis.length)
    report.diagnostics.update({"phi_tau_l1_mixed_vs_pure": l1, "lambda_t0p_spread": lam_spread,
                               "phi_t0_change": float(np.abs(rho_phi_0p.values - rho_phi_0m.values).max())})
    report.record_error(l1)
    report.check("phi_tau_mixed_equals_pure", l1 < 1e-6)
    report.check("lambda_t0p_flat", lam_spread < 1e-10)
    return report
