import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kvnlab.errors import DataError, ParameterError
from kvnlab.kvn import HamiltonianSpec, gaussian_phase_space
from kvnlab.measurement import (ContinuousMixture, DensityOperator, FiniteObservable, FiniteState,
                                born_probabilities, born_probability, nonselective_dephase, nsm_phi_kvn,
                                nsm_x_qm, two_level_closed_form, two_level_experiment, two_level_setup,
                                unitary)
from kvnlab.numerics import Grid1D, Grid2D, RealField1D
from kvnlab.quantum import gaussian_packet

P_A = 0.5 + np.sqrt(3) / 4


# -- finite systems ----------------------------------------------------------

def test_born_rule_two_level_examples():
    psi0, obs, _ = two_level_setup()
    assert born_probability(psi0, obs, 0) == pytest.approx(P_A, abs=1e-15)
    assert born_probability(psi0, obs, 1) == pytest.approx(1 - P_A, abs=1e-15)
    eig_a = FiniteState(obs.eigenvectors[:, 0])
    assert born_probability(eig_a, obs, 0) == pytest.approx(1.0, abs=1e-15)
    rho = DensityOperator.pure(psi0)
    np.testing.assert_allclose(born_probabilities(rho, obs), [P_A, 1 - P_A], atol=1e-15)


def test_born_rule_bad_index():
    psi0, obs, _ = two_level_setup()
    for k in (-1, 2, 0.5):
        with pytest.raises(ParameterError):
            born_probability(psi0, obs, k)


def test_validation_of_finite_objects():
    with pytest.raises(DataError):
        FiniteState([1.0, 1.0])
    with pytest.raises(DataError):
        FiniteObservable([[1, 1], [0, 1]], [1, 2])
    with pytest.raises(DataError):
        DensityOperator([[0.5, 0.2], [0.1, 0.5]])
    with pytest.raises(DataError):
        DensityOperator([[1.5, 0], [0, -0.5]])


def test_dephasing_examples():
    psi0, obs, _ = two_level_setup()
    out = nonselective_dephase(DensityOperator.pure(psi0), obs)
    in_basis = obs.eigenvectors.conj().T @ out.matrix @ obs.eigenvectors
    np.testing.assert_allclose(in_basis, np.diag([P_A, 1 - P_A]), atol=1e-15)
    diag_obs = FiniteObservable(np.eye(3), [0, 1, 2])
    d = DensityOperator(np.diag([0.2, 0.3, 0.5]))
    np.testing.assert_allclose(nonselective_dephase(d, diag_obs).matrix, d.matrix, atol=1e-16)
    mm = DensityOperator(np.eye(3) / 3)
    np.testing.assert_allclose(nonselective_dephase(mm, diag_obs).matrix, mm.matrix, atol=1e-16)


def _random_density(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = a @ a.conj().T
    return DensityOperator(m / np.trace(m).real)


def _random_observable(rng, d):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return FiniteObservable(q, rng.standard_normal(d))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
def test_dephasing_properties(d, seed):
    rng = np.random.default_rng(seed)
    rho, obs = _random_density(rng, d), _random_observable(rng, d)
    once = nonselective_dephase(rho, obs)
    twice = nonselective_dephase(once, obs)
    np.testing.assert_allclose(twice.matrix, once.matrix, atol=1e-12)
    assert abs(np.trace(once.matrix).real - 1) < 1e-12
    np.testing.assert_allclose(born_probabilities(once, obs), born_probabilities(rho, obs), atol=1e-12)
    assert once.purity() <= rho.purity() + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.floats(-5, 5), st.integers(0, 2 ** 32 - 1))
def test_unitary_evolution_preserves_trace_and_purity(d, t, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    u = unitary(a + a.conj().T, t)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(d), atol=1e-12)
    rho = _random_density(rng, d)
    out = rho.evolve(u)
    assert abs(out.purity() - rho.purity()) < 1e-12


# -- two-level exercise ------------------------------------------------------

@pytest.mark.parametrize("k", range(129))
def test_two_level_matches_closed_forms(k):
    wt = k * np.pi / 64
    pp, pm = two_level_experiment(wt)
    cp, cm = two_level_closed_form(wt)
    assert abs(pp - cp) < 1e-12 and abs(pm - cm) < 1e-12


def test_two_level_examples():
    assert two_level_experiment(0.0) == pytest.approx((P_A, P_A), abs=1e-12)
    pp, pm = two_level_experiment(np.pi / 4)
    assert pp == pytest.approx(1 - P_A, abs=1e-12) and pm == pytest.approx(0.5, abs=1e-12)
    assert abs((pm - pp) - (0.5 - (1 - P_A))) < 1e-10
    assert two_level_experiment(np.pi / 2) == pytest.approx((P_A, P_A), abs=1e-12)


def test_two_level_equality_set():
    # cos(4x) = cos(2x)^2 reduces to cos(2x)^2 = 1, so the branches agree only at x = k pi / 2
    for wt in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        pp, pm = two_level_experiment(wt)
        assert abs(pp - pm) < 1e-12
    pp, pm = two_level_experiment(np.pi / 6)
    assert abs(pm - pp) == pytest.approx(np.sqrt(0.75) * 0.75 / 2, abs=1e-12)
    pp, pm = two_level_experiment(np.pi / 4)
    assert pm - pp > 0.05


# -- continuous NSM ----------------------------------------------------------

def test_nsm_x_qm_report():
    g = Grid1D(4096, -40, 40)
    psi = gaussian_packet(g, 1.0, 1.0)
    r = nsm_x_qm(psi, 1.0)
    assert r.passed, r.failed_checks()
    np.testing.assert_allclose(r.densities["x_t0p"].values, np.exp(-g.points ** 2) / np.sqrt(np.pi), atol=1e-14)
    assert r.diagnostics["p_t0p_spread"] < 1e-10
    assert r.diagnostics["x_t0_change"] < 1e-12


def test_nsm_x_qm_box_20():
    g = Grid1D(1024, -10, 10)
    r = nsm_x_qm(gaussian_packet(g, 1.0), 1.0)
    np.testing.assert_allclose(r.densities["x_tau_mixed"].values, 0.05, rtol=1e-14)
    assert r.diagnostics["x_tau_mixed_l1_from_pure"] > 0.5


def test_nsm_x_qm_rejects_zero_tau():
    with pytest.raises(ParameterError):
        nsm_x_qm(gaussian_packet(Grid1D(512, -10, 10), 1.0), 0.0)


def test_nsm_x_qm_lattice_cross_check_is_near_flat():
    # |U_tau delta_j|^2 on the lattice is not exactly constant; the deviation is a diagnostic
    r = nsm_x_qm(gaussian_packet(Grid1D(1024, -20, 20), 1.0), 1.0)
    assert r.diagnostics["lattice_rel_deviation"] < 0.2


G2 = Grid2D(Grid1D(256, -12, 12), Grid1D(256, -8, 8))


@pytest.mark.parametrize("tau", [0.0, 1.0, 2.0])
def test_nsm_phi_kvn_mixed_equals_pure(tau):
    r = nsm_phi_kvn(gaussian_phase_space(G2, 1.0, 1.0, p_i=1.0), tau)
    assert r.passed, r.failed_checks()
    assert r.diagnostics["phi_tau_l1_mixed_vs_pure"] < 1e-6


def test_nsm_phi_kvn_moments_at_tau_2():
    r = nsm_phi_kvn(gaussian_phase_space(G2, 1.0, 1.0, p_i=1.0), 2.0)
    for branch in ("pure", "mixed"):
        m = r.moments[f"phi_tau_{branch}"]
        assert m["q_mean"] == pytest.approx(2.0, abs=1e-6)
        assert m["q_var"] == pytest.approx(2.5, rel=1e-6)
        assert m["p_mean"] == pytest.approx(1.0, abs=1e-9)
        assert m["p_var"] == pytest.approx(0.5, rel=1e-9)


def test_nsm_phi_kvn_at_zero_is_initial():
    st_ = gaussian_phase_space(G2, 1.0, 1.0)
    r = nsm_phi_kvn(st_, 0.0)
    np.testing.assert_allclose(r.densities["phi_tau_mixed"].values, r.densities["phi_t0m"].values, atol=1e-15)


def test_nsm_phi_kvn_harmonic():
    r = nsm_phi_kvn(gaussian_phase_space(G2, 1.0, 1.0, q0=1.0), 1.0, HamiltonianSpec.harmonic())
    assert r.diagnostics["phi_tau_l1_mixed_vs_pure"] < 1e-4
    assert r.checks["lambda_t0p_flat"]


def test_mixture_validation():
    g = Grid1D(64, -1, 1)
    with pytest.raises(ParameterError):
        ContinuousMixture(RealField1D(g, np.full(64, 0.5)), "wigner")
    with pytest.raises(DataError):
        ContinuousMixture(RealField1D(g, np.full(64, 0.7)), "qm")
