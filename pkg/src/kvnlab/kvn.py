"""
Classical phase-space wave functions (Koopman-von Neumann form) on a (q, p) grid.

The Liouvillian is first order, so a wave is carried unchanged along
Hamilton's flow: ``psi(phi, t) = psi(Phi_{-t}(phi), 0)``. The free particle is
a pure shear in ``q`` and is done row by row; general Hamiltonians use
semi-Lagrangian transport (RK4 backtracking plus cubic B-spline
interpolation of the initial field).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .errors import DataError, ParameterError
from .numerics import (ComplexField2D, Grid2D, RealField1D, RealField2D, dft2_phi_to_lambda,
                       edge_mass, norm_sq)

__all__ = [
    "KvnState", "HamiltonianSpec", "gaussian_phase_space", "evolve_free_exact",
    "choose_shear_method", "shear_rows", "evolve_characteristics", "transport",
    "phi_density", "q_marginal", "p_marginal", "lambda_density", "lambda_q_marginal",
    "phase_modulus_split", "free_gaussian_moments",
]

NORM_TOL = 1e-8
PERIODIC_SAFE_MASS = 1e-8
# cubic B-spline support radius, in cells
STENCIL_CELLS = 2


@dataclass(frozen=True)
class KvnState:
    field: ComplexField2D
    mass: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ParameterError(f"mass must be finite and positive, got {self.mass}")
        norm = norm_sq(self.field)
        if abs(norm - 1.0) > NORM_TOL:
            raise DataError(f"state norm is {norm:.12g}, expected 1 within {NORM_TOL}")

    @property
    def grid(self) -> Grid2D:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @classmethod
    def from_values(cls, grid, values, mass=1.0, normalize=True):
        f = ComplexField2D(grid, values)
        if normalize:
            norm = norm_sq(f)
            if norm == 0:
                raise DataError("cannot normalize a zero field")
            f = f.with_values(f.values / np.sqrt(norm))
        return cls(f, mass)

    def replace(self, values, check=True) -> "KvnState":
        f = ComplexField2D(self.grid, values)
        if check:
            return KvnState(f, self.mass)
        state = object.__new__(KvnState)
        object.__setattr__(state, "field", f)
        object.__setattr__(state, "mass", self.mass)
        return state


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """H(q, p) together with the Hamiltonian vector field it generates.

    Use the ``free``, ``harmonic`` and ``custom`` constructors.
    """

    kind: str
    mass: float = 1.0
    omega: float = 0.0
    grid: Grid2D | None = None
    h_values: np.ndarray | None = None
    dh_dq: np.ndarray | None = None
    dh_dp: np.ndarray | None = None
    _coeffs: tuple = dc_field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "custom"):
            raise ParameterError(f"unknown Hamiltonian kind {self.kind!r}")
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ParameterError(f"mass must be positive, got {self.mass}")
        if self.kind == "custom":
            if self.grid is None or self.dh_dq is None or self.dh_dp is None:
                raise ParameterError("custom Hamiltonian needs grid, dh_dq and dh_dp")
            coeffs = []
            for arr in (self.dh_dq, self.dh_dp):
                arr = np.asarray(arr, dtype=float)
                if arr.shape != self.grid.shape or not np.all(np.isfinite(arr)):
                    raise DataError("Hamiltonian gradients must be finite and match the grid")
                coeffs.append(ndimage.spline_filter(arr, order=3, mode="nearest"))
            object.__setattr__(self, "_coeffs", tuple(coeffs))

    @classmethod
    def free(cls, mass=1.0):
        return cls("free", mass=mass)

    @classmethod
    def harmonic(cls, mass=1.0, omega=1.0):
        return cls("harmonic", mass=mass, omega=omega)

    @classmethod
    def custom(cls, grid, h_values, dh_dq, dh_dp, mass=1.0):
        return cls("custom", mass=mass, grid=grid, h_values=np.asarray(h_values, dtype=float),
                   dh_dq=np.asarray(dh_dq, dtype=float), dh_dp=np.asarray(dh_dp, dtype=float))

    @classmethod
    def from_potential(cls, grid, potential, dpotential, mass=1.0):
        """``H = p^2 / 2m + V(q)`` from callables ``V`` and ``V'``."""
        q, p = grid.mesh()
        return cls.custom(grid, p ** 2 / (2 * mass) + potential(q), dpotential(q), p / mass, mass)

    def energy(self, q, p):
        if self.kind == "free":
            return p ** 2 / (2 * self.mass)
        if self.kind == "harmonic":
            return p ** 2 / (2 * self.mass) + 0.5 * self.mass * self.omega ** 2 * q ** 2
        return self._interp(self.h_values, q, p, prefilter=True)

    def velocity(self, q, p):
        """Hamilton's equations: ``(dq/dt, dp/dt) = (dH/dp, -dH/dq)``."""
        if self.kind == "free":
            return p / self.mass, np.zeros_like(q)
        if self.kind == "harmonic":
            return p / self.mass, -self.mass * self.omega ** 2 * q
        return (self._interp(self._coeffs[1], q, p), -self._interp(self._coeffs[0], q, p))

    def _interp(self, coeffs, q, p, prefilter=False):
        iq, ip = _fractional_index(self.grid, q, p)
        return ndimage.map_coordinates(np.asarray(coeffs, dtype=float), [iq, ip], order=3,
                                       mode="nearest", prefilter=prefilter)


def _fractional_index(grid, q, p):
    return ((q - grid.q_axis.x_min) / grid.q_axis.spacing,
            (p - grid.p_axis.x_min) / grid.p_axis.spacing)


def gaussian_phase_space(grid: Grid2D, a: float, b: float, p_i: float = 0.0,
                         mass: float = 1.0, q0: float = 0.0) -> KvnState:
    """Product Gaussian ``exp(-(q-q0)^2/2a^2 - (p-p_i)^2/2b^2) / sqrt(pi a b)``."""
    if not (a > 0 and b > 0):
        raise ParameterError(f"widths must be positive, got a={a}, b={b}")
    q, p = grid.q_axis.points, grid.p_axis.points
    gq = np.exp(-(q - q0) ** 2 / (2 * a * a))
    gp = np.exp(-(p - p_i) ** 2 / (2 * b * b))
    values = np.outer(gq, gp) / np.sqrt(np.pi * a * b)
    f = ComplexField2D(grid, values)
    norm = norm_sq(f)
    if abs(norm - 1.0) > NORM_TOL:
        raise DataError(f"phase-space box too small for a={a}, b={b}, p_i={p_i}: norm {norm:.12g}")
    return KvnState(f, mass)


def choose_shear_method(values, grid: Grid2D) -> str:
    """``"fourier"`` when the field has negligible mass at the q edges, else ``"cubic"``."""
    dens = RealField2D(grid, np.abs(values) ** 2)
    qm = dens.q_marginal()
    total = max(float(qm.values.sum() * qm.cell), np.finfo(float).tiny)
    return "fourier" if edge_mass(qm) / total < PERIODIC_SAFE_MASS else "cubic"


def shear_rows(values, grid: Grid2D, shifts, method: str = "fourier") -> np.ndarray:
    """Return ``f(q - s_j, p_j)`` where ``s_j = shifts[j]`` is the q-shift of p-row ``j``.

    ``fourier`` is periodic and exact for band-limited rows; ``cubic`` uses a
    cubic B-spline with zero fill outside the box.
    """
    values = np.asarray(values)
    shifts = np.asarray(shifts, dtype=float)
    dq = grid.q_axis.spacing
    nq = grid.q_axis.n
    if method == "fourier":
        k = 2.0 * np.pi * np.fft.fftfreq(nq, d=dq)
        phase = np.exp(-1j * np.outer(k, shifts))
        if np.iscomplexobj(values):
            return np.fft.ifft(np.fft.fft(values, axis=0) * phase, axis=0)
        # real rows: the symmetric Nyquist factor keeps them real
        phase[nq // 2, :] = np.cos(k[nq // 2] * shifts)
        return np.fft.ifft(np.fft.fft(values, axis=0) * phase, axis=0).real
    if method == "cubic":
        iq = np.arange(nq)[:, None] - shifts[None, :] / dq
        ip = np.broadcast_to(np.arange(grid.p_axis.n)[None, :], iq.shape)
        return _spline_sample(values, [iq, ip], mode="grid-constant")
    raise ParameterError(f"unknown shear method {method!r}")


def _spline_sample(values, coords, mode):
    def one(part):
        return ndimage.map_coordinates(part, coords, order=3, mode=mode)

    if np.iscomplexobj(values):
        return one(values.real) + 1j * one(values.imag)
    return one(values)


def evolve_free_exact(state: KvnState, tau: float, method: str = "auto") -> KvnState:
    """``psi(q, p, tau) = psi(q - p tau / m, p, 0)`` by a per-row shift in q."""
    if not np.isfinite(tau):
        raise ParameterError(f"tau must be finite, got {tau}")
    if tau == 0:
        return state
    if method == "auto":
        method = choose_shear_method(state.values, state.grid)
    shifts = state.grid.p_axis.points * tau / state.mass
    out = shear_rows(state.values, state.grid, shifts, method)
    return state.replace(out, check=method == "fourier")


def _backtrack(h: HamiltonianSpec, q, p, tau, steps):
    """Integrate Hamilton's equations from (q, p) over ``-tau`` with classical RK4."""
    dt = -tau / steps
    for _ in range(steps):
        k1q, k1p = h.velocity(q, p)
        k2q, k2p = h.velocity(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
        k3q, k3p = h.velocity(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
        k4q, k4p = h.velocity(q + dt * k3q, p + dt * k3p)
        q = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return q, p


def _outside(grid, iq, ip):
    nq, np_ = grid.shape
    m = STENCIL_CELLS
    return (iq < -m) | (iq > nq - 1 + m) | (ip < -m) | (ip > np_ - 1 + m)


def transport(values, grid: Grid2D, h: HamiltonianSpec, tau: float, steps: int | None = None,
              boundary: str = "zero", norm_tol: float = 1e-6):
    """Semi-Lagrangian transport of any sampled phase-space function along the flow of ``h``.

    Each node is traced back over ``tau`` with ``steps`` RK4 substeps and the
    initial field is sampled there with a cubic B-spline. With
    ``boundary="zero"`` the field is taken to vanish outside the box, and a
    DataError is raised when the nodes whose forward characteristics leave
    the box carry more than ``norm_tol`` of the (squared, for complex input)
    norm. ``boundary="periodic"`` wraps.

    Returns ``(new_values, info)`` where ``info`` reports the fraction of nodes
    whose foot point left the box.
    """
    if not np.isfinite(tau):
        raise ParameterError(f"tau must be finite, got {tau}")
    if steps is None:
        steps = max(1, int(np.ceil(64 * abs(tau))))
    if int(steps) != steps or steps < 1:
        raise ParameterError(f"steps must be a positive integer, got {steps}")
    if boundary not in ("zero", "periodic"):
        raise ParameterError(f"boundary must be 'zero' or 'periodic', got {boundary!r}")
    values = np.asarray(values)
    q0, p0 = grid.mesh()
    q, p = (q0, p0) if tau == 0 else _backtrack(h, q0, p0, tau, int(steps))
    iq, ip = _fractional_index(grid, q, p)
    outside = _outside(grid, iq, ip)
    info = {"departed_fraction": float(outside.mean()), "steps": int(steps), "boundary": boundary}
    mode = "grid-wrap" if boundary == "periodic" else "grid-constant"
    out = _spline_sample(values, [iq, ip], mode=mode)
    if boundary == "zero":
        weight = np.abs(values) ** 2 if np.iscomplexobj(values) else np.abs(values)
        total = float(weight.sum())
        # mass carried by nodes whose forward image leaves the box is lost for good
        if tau != 0 and total > 0:
            qf, pf = _backtrack(h, q0, p0, -tau, int(steps))
            exiting = _outside(grid, *_fractional_index(grid, qf, pf))
            loss = float(weight[exiting].sum()) / total
        else:
            loss = 0.0
        info["mass_loss"] = loss
        if loss > norm_tol:
            raise DataError(
                f"characteristics left the box for {info['departed_fraction']:.2%} of nodes "
                f"carrying {loss:.3g} of the mass; enlarge the phase-space box")
    return out, info


def evolve_characteristics(state: KvnState, h: HamiltonianSpec, tau: float,
                           steps: int | None = None, boundary: str = "zero") -> KvnState:
    """Liouville evolution of a KvN wave by backtracked characteristics."""
    out, _ = transport(state.values, state.grid, h, tau, steps, boundary)
    return state.replace(out, check=False)


def phi_density(state: KvnState) -> RealField2D:
    return state.field.density()


def q_marginal(state: KvnState) -> RealField1D:
    return phi_density(state).q_marginal()


def p_marginal(state: KvnState) -> RealField1D:
    return phi_density(state).p_marginal()


def lambda_density(state: KvnState, piecewise_constant=False) -> RealField2D:
    return dft2_phi_to_lambda(state.field, piecewise_constant).density()


def lambda_q_marginal(state: KvnState, piecewise_constant=False) -> RealField1D:
    return lambda_density(state, piecewise_constant).q_marginal()


def phase_modulus_split(state, floor: float = 1e-14):
    """Split a wave into modulus and phase; phase lies in (-pi, pi] and is 0 where modulus < floor."""
    f = getattr(state, "field", state)
    v = np.asarray(f.values)
    modulus = np.abs(v)
    phase = np.angle(v)
    phase = np.where(phase <= -np.pi, np.pi, phase)
    phase = np.where(modulus < floor, 0.0, phase)
    real = RealField2D if isinstance(f.grid, Grid2D) else RealField1D
    return real(f.grid, modulus), real(f.grid, phase)


def free_gaussian_moments(a, b, p_i, tau, mass=1.0):
    """Closed-form q/p means and variances of the freely evolved phase-space Gaussian."""
    return {
        "q_mean": p_i * tau / mass,
        "p_mean": p_i,
        "q_var": a * a / 2.0 + b * b * tau * tau / (2.0 * mass * mass),
        "p_var": b * b / 2.0,
    }
