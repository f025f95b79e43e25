import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kvnlab.errors import DataError, ParameterError
from kvnlab.numerics import Grid1D, RealField1D, moments, norm_sq
from kvnlab.quantum import (QmState, evolve_free, evolve_split_step, free_gaussian_moments, free_kernel,
                            gaussian_packet, momentum_density, position_density)

G = Grid1D(1024, -40, 40)


def test_packet_density_and_variance():
    psi = gaussian_packet(G, 1.0)
    rho = position_density(psi)
    np.testing.assert_allclose(rho.values, np.exp(-G.points ** 2) / np.sqrt(np.pi), atol=1e-14)
    assert abs(moments(rho)[1] - 0.5) < 1e-10
    assert abs(moments(position_density(gaussian_packet(G, 2.0)))[1] - 2.0) < 1e-10


def test_boosted_packet_keeps_density_and_shifts_momentum():
    plain, boosted = gaussian_packet(G, 1.0), gaussian_packet(G, 1.0, p_i=5.0)
    np.testing.assert_allclose(position_density(boosted).values, position_density(plain).values, atol=1e-15)
    mean, var = moments(momentum_density(boosted))
    assert abs(mean - 5.0) < 1e-10 and abs(var - 0.5) < 1e-10


def test_momentum_variance_follows_hbar_over_a():
    mean, var = moments(momentum_density(gaussian_packet(G, 1.0, p_i=1.0)))
    assert abs(mean - 1.0) < 1e-10 and abs(var - 0.5) < 1e-10


def test_packet_errors():
    with pytest.raises(ParameterError):
        gaussian_packet(G, 0.0)
    with pytest.raises(ParameterError):
        gaussian_packet(G, -1.0)
    with pytest.raises(DataError):
        gaussian_packet(Grid1D(256, -2, 2), 1.0)
    with pytest.raises(DataError):
        gaussian_packet(Grid1D(64, -40, 40), 0.1)


def test_state_requires_unit_norm():
    with pytest.raises(DataError):
        QmState.from_values(G, np.ones(G.n), normalize=False)
    with pytest.raises(DataError):
        QmState.from_values(G, np.zeros(G.n))


def test_free_evolution_closed_form_examples():
    rho = position_density(evolve_free(gaussian_packet(G, 1.0, 1.0), 1.0))
    mean, var = moments(rho)
    assert abs(mean - 1.0) < G.spacing and abs(var - 1.0) < 5e-3
    rho = position_density(evolve_free(gaussian_packet(G, 1.0), 2.0))
    mean, var = moments(rho)
    assert abs(mean) < 1e-10 and abs(var - 2.5) < 1e-8
    # evolved density is the analytic Gaussian
    x = G.points
    exact = np.exp(-x ** 2 / 5.0) / np.sqrt(5.0 * np.pi)
    np.testing.assert_allclose(rho.values, exact, atol=1e-12)


def test_free_evolution_at_zero_is_identity():
    psi = gaussian_packet(G, 1.0, 2.0)
    assert evolve_free(psi, 0.0) is psi
    with pytest.raises(ParameterError):
        evolve_free(psi, -1.0)


def test_free_kernel_convolution_matches_spectral_evolution():
    # narrow box is enough: a=1 packet at tau=0.5 stays well inside [-15, 15]
    g = Grid1D(1024, -15, 15)
    psi = gaussian_packet(g, 1.0, 1.0)
    tau = 0.5
    x = g.points
    k = free_kernel(x[:, None], x[None, :], tau)
    direct = (k @ psi.values) * g.spacing
    spectral = evolve_free(psi, tau).values
    inner = np.abs(x) < 6
    assert np.abs(direct - spectral)[inner].max() < 1e-6


def test_free_kernel_modulus_is_constant():
    k = free_kernel(np.linspace(-3, 3, 7), 0.4, 0.8)
    np.testing.assert_allclose(np.abs(k) ** 2, 1 / (2 * np.pi * 0.8), rtol=1e-14)
    with pytest.raises(ParameterError):
        free_kernel(0.0, 0.0, 0.0)


def test_free_gaussian_moments_formula():
    assert free_gaussian_moments(1.0, 1.0, 1.0) == (1.0, 1.0)
    assert free_gaussian_moments(1.0, 0.0, 2.0) == (0.0, 2.5)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_split_step_with_zero_potential_matches_free(tau):
    psi = gaussian_packet(G, 1.0, 1.0)
    a = evolve_split_step(psi, np.zeros(G.n), tau)
    b = evolve_free(psi, tau)
    assert np.abs(a.values - b.values).max() < 1e-9


def test_split_step_constant_potential_only_adds_phase():
    psi = gaussian_packet(G, 1.0, 1.0)
    a = position_density(evolve_split_step(psi, np.full(G.n, 3.7), 1.3))
    b = position_density(evolve_free(psi, 1.3))
    assert np.abs(a.values - b.values).max() < 1e-9


def test_split_step_harmonic_period_recovers_density():
    g = Grid1D(512, -20, 20)
    psi = gaussian_packet(g, 1.0, x0=1.5)
    v = RealField1D(g, 0.5 * g.points ** 2)
    out = evolve_split_step(psi, v, 2 * np.pi)
    assert np.abs(position_density(out).values - position_density(psi).values).max() < 1e-6


def test_split_step_rejects_nan_potential():
    v = np.zeros(G.n)
    v[3] = np.nan
    with pytest.raises(DataError):
        evolve_split_step(gaussian_packet(G, 1.0), v, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.6, 2.0), st.floats(-2, 2), st.floats(0.0, 2.0))
def test_free_evolution_is_unitary(a, p_i, tau):
    psi = gaussian_packet(G, a, p_i)
    assert abs(norm_sq(evolve_free(psi, tau).field) - 1.0) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.floats(-2, 2))
def test_free_evolution_composes(t1, t2, p_i):
    psi = gaussian_packet(G, 1.0, p_i)
    a = evolve_free(evolve_free(psi, t1), t2).values
    b = evolve_free(psi, t1 + t2).values
    assert np.abs(a - b).max() < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 1.0), st.integers(0, 2 ** 16))
def test_split_step_is_unitary(tau, seed):
    rng = np.random.default_rng(seed)
    g = Grid1D(256, -20, 20)
    v = 0.1 * g.points ** 2 + rng.standard_normal(g.n)
    out = evolve_split_step(gaussian_packet(g, 1.0, 1.0), v, tau)
    assert abs(norm_sq(out.field) - 1.0) < 1e-10


def test_phase_dressing_changes_evolved_modulus():
    # counterpart of the KvN modulus decoupling: quantum modulus does depend on the phase
    psi = gaussian_packet(G, 1.0)
    dressed = psi.replace(psi.values * np.exp(2j * G.points))
    a = np.abs(evolve_free(psi, 1.0).values)
    b = np.abs(evolve_free(dressed, 1.0).values)
    assert np.abs(a - b).max() > 0.1
