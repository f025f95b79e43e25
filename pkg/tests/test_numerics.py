import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from kvnlab.errors import DataError, ParameterError
from kvnlab.numerics import (ComplexField1D, ComplexField2D, Grid1D, Grid2D, RealField1D, RealField2D,
                             dft2_phi_to_lambda, dft_x_to_p, edge_mass, idft2_lambda_to_phi, idft_p_to_x,
                             integrate, local_extrema, moments, norm_sq, read_density_csv, read_field_csv,
                             spectral_derivative, write_density_csv, write_field_csv)


def gauss(grid, a=1.0, p_i=0.0, x0=0.0):
    x = grid.points
    return ComplexField1D(grid, np.exp(-(x - x0) ** 2 / (2 * a * a) + 1j * p_i * x) / np.sqrt(np.sqrt(np.pi) * a))


# -- grids and fields --------------------------------------------------------

def test_grid_rejects_bad_sizes():
    with pytest.raises(ParameterError):
        Grid1D(100, -1, 1)
    with pytest.raises(ParameterError):
        Grid1D(64, 1, -1)


def test_grid_points_start_at_x_min_and_exclude_x_max():
    g = Grid1D(8, 0.0, 8.0)
    assert g.spacing == 1.0
    np.testing.assert_allclose(g.points, np.arange(8.0))


def test_fields_reject_nan_and_are_read_only():
    g = Grid1D(8, 0, 1)
    with pytest.raises(DataError):
        RealField1D(g, [np.nan] + [0.0] * 7)
    with pytest.raises(DataError):
        RealField1D(g, np.zeros(7))
    f = RealField1D(g, np.zeros(8))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


# -- integrate / norm --------------------------------------------------------

def test_norm_of_zero_field_is_zero():
    assert norm_sq(ComplexField1D(Grid1D(64, -1, 1), np.zeros(64))) == 0.0


def test_norm_of_gaussian():
    assert abs(norm_sq(gauss(Grid1D(512, -10, 10))) - 1.0) < 1e-10


def test_integral_of_constant_on_unit_box():
    for n in (8, 64, 1024):
        assert abs(integrate(RealField1D(Grid1D(n, 0, 1), np.ones(n))) - 1.0) < 1e-14


# -- transforms --------------------------------------------------------------

def test_gaussian_momentum_density_has_variance_half():
    rho = dft_x_to_p(gauss(Grid1D(512, -10, 10))).density()
    mean, var = moments(rho)
    assert abs(mean) < 1e-12
    assert abs(var - 0.5) < 1e-10
    expected = np.exp(-rho.grid.points ** 2) / np.sqrt(np.pi)
    np.testing.assert_allclose(rho.values, expected, atol=1e-12)


def test_shift_theorem_centres_momentum_at_p_i():
    rho = dft_x_to_p(gauss(Grid1D(512, -10, 10), p_i=1.0)).density()
    mean, var = moments(rho)
    assert abs(mean - 1.0) < 1e-10
    assert abs(var - 0.5) < 1e-10


def test_hbar_scales_momentum_axis():
    g = Grid1D(512, -10, 10)
    rho = dft_x_to_p(gauss(g), hbar=0.5).density()
    assert abs(moments(rho)[1] - 0.25 * 0.5) < 1e-10
    with pytest.raises(ParameterError):
        dft_x_to_p(gauss(g), hbar=0.0)


def test_spike_has_flat_momentum_density():
    g = Grid1D(256, -5, 5)
    v = np.zeros(256, dtype=complex)
    v[77] = 1 / np.sqrt(g.spacing)
    rho = dft_x_to_p(ComplexField1D(g, v)).density()
    assert np.ptp(rho.values) < 1e-10


def test_piecewise_constant_transform_matches_direct_quadrature_of_step():
    g = Grid1D(1024, -8, 8)
    x = g.points
    f = ComplexField1D(g, np.where((x > -1) & (x < 2), 1.0, 0.0))
    # cells with centres in (-1, 2) cover exactly [-1, 2] on this grid
    lo, hi = x[x > -1][0] - g.spacing / 2, x[x < 2][-1] + g.spacing / 2
    out = dft_x_to_p(f, piecewise_constant=True)
    for k in (0, 100, 511, 600, 1000):
        p = out.grid.points[k]
        re = quad(lambda t: np.cos(p * t), lo, hi, limit=400)[0]
        im = -quad(lambda t: np.sin(p * t), lo, hi, limit=400)[0]
        assert abs(out.values[k] - (re + 1j * im) / np.sqrt(2 * np.pi)) < 1e-10


def test_2d_transform_of_product_is_product_of_1d_transforms():
    gq, gp = Grid1D(64, -8, 8), Grid1D(32, -6, 6)
    g = Grid2D(gq, gp)
    f1, f2 = gauss(gq, 1.0, 0.5), gauss(gp, 1.3, x0=0.4)
    prod = ComplexField2D(g, np.outer(f1.values, f2.values))
    out = dft2_phi_to_lambda(prod)
    expected = np.outer(dft_x_to_p(f1).values, dft_x_to_p(f2).values)
    np.testing.assert_allclose(out.values, expected, atol=1e-13)


def test_phase_space_gaussian_lambda_variances():
    g = Grid2D(Grid1D(128, -10, 10), Grid1D(128, -10, 10))
    q, p = g.mesh()
    f = ComplexField2D(g, np.exp(-(q * q + p * p) / 2) / np.sqrt(np.pi))
    lam = dft2_phi_to_lambda(f).density()
    assert abs(moments(lam.q_marginal())[1] - 0.5) < 1e-10
    assert abs(moments(lam.p_marginal())[1] - 0.5) < 1e-10


def test_real_even_field_has_real_even_transform():
    g = Grid2D(Grid1D(64, -8, 8), Grid1D(64, -8, 8))
    q, p = g.mesh()
    f = ComplexField2D(g, np.exp(-q * q / 3 - p ** 4 / 5) * (1 + 0.2 * np.cos(q * p)))
    out = dft2_phi_to_lambda(f).values
    assert np.abs(out.imag).max() < 1e-10
    # even in both arguments: index k <-> n - k on the centred grid (k=0 is unpaired)
    inner = out[1:, 1:]
    np.testing.assert_allclose(inner, inner[::-1, ::-1], atol=1e-10)


def test_spectral_derivative_of_gaussian():
    g = Grid1D(256, -12, 12)
    x = g.points
    d = spectral_derivative(ComplexField1D(g, np.exp(-x * x)))
    np.testing.assert_allclose(d.values, -2 * x * np.exp(-x * x), atol=1e-12)


complex_arrays = st.integers(3, 7).flatmap(
    lambda k: st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2 ** k, max_size=2 ** k))


@settings(max_examples=50, deadline=None)
@given(complex_arrays, st.floats(0.1, 5.0), st.floats(-3, 3))
def test_parseval_and_round_trip(pairs, hbar, x_min):
    n = len(pairs)
    g = Grid1D(n, x_min, x_min + 2.5)
    f = ComplexField1D(g, [a + 1j * b for a, b in pairs])
    spec = dft_x_to_p(f, hbar)
    nf = norm_sq(f)
    assert abs(norm_sq(spec) - nf) <= 1e-10 * max(nf, 1e-300)
    back = idft_p_to_x(spec, hbar, g)
    scale = max(np.abs(f.values).max(), 1e-300)
    assert np.abs(back.values - f.values).max() <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 5), st.integers(3, 5), st.integers(0, 2 ** 32 - 1))
def test_parseval_and_round_trip_2d(kq, kp, seed):
    rng = np.random.default_rng(seed)
    g = Grid2D(Grid1D(2 ** kq, -2, 3), Grid1D(2 ** kp, -1, 0.5))
    f = ComplexField2D(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    spec = dft2_phi_to_lambda(f)
    assert abs(norm_sq(spec) - norm_sq(f)) <= 1e-10 * norm_sq(f)
    back = idft2_lambda_to_phi(spec, g)
    assert np.abs(back.values - f.values).max() <= 1e-12 * np.abs(f.values).max()


# -- moments -----------------------------------------------------------------

def test_moments_of_gaussian_density():
    rho = gauss(Grid1D(512, -10, 10), p_i=3.0).density()
    mean, var = moments(rho)
    assert abs(mean) < 1e-12 and abs(var - 0.5) < 1e-10


def test_moments_of_two_slit_density():
    g = Grid1D(4096, -0.5 * 4096 * 0.2 / 13, 0.5 * 4096 * 0.2 / 13)
    x = g.points
    inside = (np.abs(np.abs(x) - 1.0) < 0.1 + 1e-12)
    mean, var = moments(RealField1D(g, np.where(inside, 2.5, 0.0)))
    assert abs(mean) < 1e-12
    # midpoint rule on a piecewise-constant density: exact up to dx^2/12
    assert abs(var - (1 + 0.01 / 3)) < g.spacing ** 2


def test_moments_of_uniform_density():
    L = 6.0
    g = Grid1D(1024, -L / 2, L / 2)
    mean, var = moments(RealField1D(g, np.full(1024, 1 / L)))
    # periodic samples start at -L/2 and stop one spacing short of L/2
    assert abs(mean + g.spacing / 2) < 1e-12
    assert abs(var - L * L / 12) < (L / 1024) ** 2


def test_moments_errors():
    g = Grid1D(64, -1, 1)
    with pytest.raises(DataError):
        moments(RealField1D(g, np.full(64, 0.5) - np.eye(64)[3]))
    with pytest.raises(DataError):
        moments(RealField1D(g, np.full(64, 0.7)))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.5, 2.0))
def test_shifted_density_shifts_mean_only(delta, a):
    g = Grid1D(1024, -20, 20)
    x = g.points
    rho0 = RealField1D(g, np.exp(-x * x / a ** 2) / (np.sqrt(np.pi) * a))
    rho1 = RealField1D(g, np.exp(-(x - delta) ** 2 / a ** 2) / (np.sqrt(np.pi) * a))
    m0, v0 = moments(rho0)
    m1, v1 = moments(rho1)
    assert abs((m1 - m0) - delta) < g.spacing ** 2
    assert abs(v1 - v0) < g.spacing ** 2


# -- extrema -----------------------------------------------------------------

def test_extrema_of_cos_squared():
    g = Grid1D(1024, 0, 2 * np.pi)
    ext = local_extrema(RealField1D(g, np.cos(g.points) ** 2), 0.5)
    maxima = [e.position for e in ext if e.kind == "max"]
    minima = [e.position for e in ext if e.kind == "min"]
    assert len(maxima) == 1 and abs(maxima[0] - np.pi) < g.spacing
    assert len(minima) == 2
    np.testing.assert_allclose(sorted(minima), [np.pi / 2, 3 * np.pi / 2], atol=g.spacing)


def test_single_gaussian_has_one_maximum():
    ext = local_extrema(gauss(Grid1D(256, -10, 10)).density(), 0.05)
    assert [e.kind for e in ext] == ["max"]


def test_extrema_threshold_range():
    rho = gauss(Grid1D(64, -10, 10)).density()
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ParameterError):
            local_extrema(rho, bad)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(0.05, 0.9))
def test_extrema_scale_invariant(c, thr):
    g = Grid1D(512, -10, 10)
    x = g.points
    rho = RealField1D(g, np.exp(-x * x / 8) * (1.2 + np.cos(3 * x)))
    a = local_extrema(rho, thr)
    b = local_extrema(RealField1D(g, c * rho.values), thr)
    assert [(e.position, e.kind) for e in a] == [(e.position, e.kind) for e in b]


# -- edge mass ---------------------------------------------------------------

def test_edge_mass_of_centred_and_clipped_gaussians():
    g = Grid1D(512, -10, 10)
    assert edge_mass(gauss(g).density()) < 1e-30
    assert edge_mass(gauss(g, x0=9.5).density()) > 0.1


# -- csv ---------------------------------------------------------------------

def test_field_csv_round_trip_1d_and_2d(tmp_path):
    g1 = Grid1D(32, -1.5, 2.25)
    f1 = ComplexField1D(g1, np.exp(1j * g1.points) * np.arange(32) / 7)
    write_field_csv(tmp_path / "f1.csv", f1)
    back = read_field_csv(tmp_path / "f1.csv")
    assert back.grid == g1
    np.testing.assert_array_equal(back.values, f1.values)

    g2 = Grid2D(Grid1D(8, -1, 1), Grid1D(16, -3, 2))
    rng = np.random.default_rng(3)
    f2 = ComplexField2D(g2, rng.standard_normal(g2.shape) + 1j * rng.standard_normal(g2.shape))
    back2 = read_field_csv(write_field_csv(tmp_path / "f2.csv", f2))
    assert back2.grid == g2
    np.testing.assert_array_equal(back2.values, f2.values)


def test_density_csv_round_trip(tmp_path):
    g = Grid2D(Grid1D(8, -1, 1), Grid1D(8, 0, 1))
    d = RealField2D(g, np.random.default_rng(0).random(g.shape))
    back = read_density_csv(write_density_csv(tmp_path / "d.csv", d))
    assert back.grid == g
    np.testing.assert_array_equal(back.values, d.values)
    text = (tmp_path / "d.csv").read_text().splitlines()
    assert text[0].startswith("# grid:")


def test_density_csv_rejects_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# grid: 0 1 8\n# columns: x,rho\n0.0,1.0\n")
    with pytest.raises(DataError):
        read_density_csv(p)
