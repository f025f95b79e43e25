"""
Quantum states on a position grid: Gaussian packets, exact free evolution in
momentum space and Strang split-step evolution in a static potential.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .numerics import (ComplexField1D, Grid1D, RealField1D, dft_x_to_p, edge_mass,
                       norm_sq, wavenumbers)

__all__ = [
    "QmState", "FreeKernelParams", "gaussian_packet", "evolve_free", "evolve_split_step",
    "position_density", "momentum_density", "free_gaussian_moments", "free_kernel",
    "STEPS_PER_UNIT_TIME",
]

NORM_TOL = 1e-8
STEPS_PER_UNIT_TIME = 256


@dataclass(frozen=True)
class QmState:
    """Normalized wavefunction on a periodic x-grid."""

    field: ComplexField1D
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and positive, got {value}")
        norm = norm_sq(self.field)
        if abs(norm - 1.0) > NORM_TOL:
            raise DataError(f"state norm is {norm:.12g}, expected 1 within {NORM_TOL}")

    @property
    def grid(self) -> Grid1D:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @classmethod
    def from_values(cls, grid, values, hbar=1.0, mass=1.0, normalize=True):
        field = ComplexField1D(grid, values)
        if normalize:
            norm = norm_sq(field)
            if norm == 0:
                raise DataError("cannot normalize a zero field")
            field = field.with_values(field.values / np.sqrt(norm))
        return cls(field, hbar, mass)

    def replace(self, values) -> "QmState":
        return QmState(ComplexField1D(self.grid, values), self.hbar, self.mass)


@dataclass(frozen=True)
class FreeKernelParams:
    tau: float

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ParameterError(f"tau must be finite and >= 0, got {self.tau}")


def gaussian_packet(grid: Grid1D, a: float, p_i: float = 0.0, hbar: float = 1.0,
                    mass: float = 1.0, x0: float = 0.0) -> QmState:
    """``exp(-(x-x0)^2 / 2a^2 + i p_i x / hbar) / sqrt(sqrt(pi) a)`` sampled on ``grid``.

    Raises DataError when the box clips more than ``NORM_TOL`` of the norm or the
    conjugate grid cannot hold the momentum distribution.
    """
    if not (np.isfinite(a) and a > 0):
        raise ParameterError(f"width a must be positive, got {a}")
    x = grid.points
    values = np.exp(-(x - x0) ** 2 / (2 * a * a) + 1j * p_i * x / hbar) / np.sqrt(np.sqrt(np.pi) * a)
    field = ComplexField1D(grid, values)
    norm = norm_sq(field)
    if abs(norm - 1.0) > NORM_TOL:
        raise DataError(f"grid [{grid.x_min}, {grid.x_max}] too narrow for a={a}: norm {norm:.12g}")
    spectrum = dft_x_to_p(field, hbar).density()
    if edge_mass(spectrum) > NORM_TOL:
        raise DataError(f"grid spacing {grid.spacing:.4g} too coarse for a={a}, p_i={p_i}")
    return QmState(field, hbar, mass)


def _check_tau(tau):
    FreeKernelParams(tau)


def _kinetic_phase(grid, hbar, mass, dt):
    p = hbar * wavenumbers(grid)
    return np.exp(-1j * p * p * dt / (2.0 * mass * hbar))


def evolve_free(state: QmState, tau: float) -> QmState:
    """Exact free-particle evolution: every momentum mode picks up ``exp(-i p^2 tau / 2 m hbar)``."""
    _check_tau(tau)
    if tau == 0:
        return state
    phase = _kinetic_phase(state.grid, state.hbar, state.mass, tau)
    return state.replace(np.fft.ifft(phase * np.fft.fft(state.values)))


def evolve_split_step(state: QmState, potential, tau: float, steps: int | None = None) -> QmState:
    """Second-order Strang splitting: half potential, full kinetic, half potential.

    ``potential`` is a RealField1D or an array sampled on the state grid.
    ``steps`` defaults to ``STEPS_PER_UNIT_TIME`` per unit of ``tau``.
    """
    _check_tau(tau)
    v = np.asarray(getattr(potential, "values", potential), dtype=float)
    if v.shape != (state.grid.n,):
        raise DataError(f"potential has shape {v.shape}, grid needs ({state.grid.n},)")
    if not np.all(np.isfinite(v)):
        raise DataError("potential contains NaN or infinite values")
    if steps is None:
        steps = max(1, int(np.ceil(STEPS_PER_UNIT_TIME * tau)))
    if int(steps) != steps or steps < 1:
        raise ParameterError(f"steps must be a positive integer, got {steps}")
    if tau == 0:
        return state
    dt = tau / steps
    half_v = np.exp(-0.5j * v * dt / state.hbar)
    kin = _kinetic_phase(state.grid, state.hbar, state.mass, dt)
    psi = state.values.copy()
    for _ in range(int(steps)):
        psi = half_v * np.fft.ifft(kin * np.fft.fft(half_v * psi))
    return state.replace(psi)


def position_density(state: QmState) -> RealField1D:
    return state.field.density()


def momentum_density(state: QmState, piecewise_constant: bool = False) -> RealField1D:
    return dft_x_to_p(state.field, state.hbar, piecewise_constant).density()


def free_gaussian_moments(a, p_i, tau, hbar=1.0, mass=1.0):
    """Closed-form (mean, variance) of ``|psi(x, tau)|^2`` for the free Gaussian packet."""
    mean = p_i * tau / mass
    var = (mass ** 2 * a ** 4 + hbar ** 2 * tau ** 2) / (2.0 * mass ** 2 * a ** 2)
    return mean, var


def free_kernel(x, x0, tau, hbar=1.0, mass=1.0):
    """Normalized free propagator ``<x| exp(-i H tau / hbar) |x0>`` for ``tau > 0``.

    Its modulus squared is ``m / (2 pi hbar tau)`` for every ``x, x0``.
    """
    if not tau > 0:
        raise ParameterError(f"the free kernel needs tau > 0, got {tau}")
    x = np.asarray(x, dtype=float)
    pref = np.sqrt(mass / (2j * np.pi * hbar * tau))
    return pref * np.exp(1j * mass * (x - x0) ** 2 / (2.0 * hbar * tau))
