import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posdeform.deformation import DomainError, make_params
from posdeform.grid import WaveFunction, make_grid
from posdeform.transform import (
    SpectralFunction, apply_operator_spectral, eigenfunction, identity_spectral, eigenfunction_on_grid, forward_transform,
    inverse_prefactor, inverse_transform, lattice_step, momentum_lattice, normalization_constant,
    overlap_closed, overlap_modulus_reference, overlap_quadrature, parseval_ratio, read_spectral_csv,
    write_spectral_csv, xi_derivative, xi_window,
)

C_TAU01 = 0.2348039385150496  # sqrt(0.1 sqrt3 / pi)
STEP_TAU01 = 0.17320508075688773


def u_gaussian(grid, centre, width, k0=0.0):
    u = grid.u_nodes
    small = np.exp(-0.5 * ((u - centre) / width) ** 2 + 1j * k0 * u)
    return WaveFunction(grid, small / np.sqrt(grid.f))


def test_constants(params):
    assert normalization_constant(params) == pytest.approx(C_TAU01, rel=1e-15)
    assert lattice_step(params) == pytest.approx(STEP_TAU01, rel=1e-15)
    assert parseval_ratio(params) == pytest.approx(2 * STEP_TAU01, rel=1e-15)
    # forward and inverse prefactors multiply to 1 / (2 pi hbar)
    assert inverse_prefactor(params) * C_TAU01 == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    np.testing.assert_allclose(momentum_lattice(params, -1, 2), STEP_TAU01 * np.arange(-1, 3), rtol=1e-15)
    with pytest.raises(ValueError):
        momentum_lattice(params, 2, 1)


def test_eigenfunction_value_and_domain(params):
    # f(5) = 3/4 and u(5) = 6.045997880780726
    val = eigenfunction(params, 1.0, 5.0)
    assert val == pytest.approx(C_TAU01 / np.sqrt(0.75) * np.exp(1j * 6.045997880780726), rel=1e-13)
    with pytest.raises(DomainError):
        eigenfunction(params, 1.0, 10.5)


def test_eigenfunction_unit_norm(grid):
    for xi in (0.0, 0.3, -2.0):
        assert eigenfunction_on_grid(grid, xi).norm() == pytest.approx(1.0, abs=1e-12)


def test_overlap_zeros_and_closed_form(grid, params):
    step = lattice_step(params)
    d = np.linspace(-5, 5, 41) * step
    np.testing.assert_allclose(overlap_quadrature(grid, d, 0.0), overlap_closed(params, d, 0.0), atol=1e-13)
    zeros = 2 * step * np.array([1, 2, -3])
    assert np.max(np.abs(overlap_closed(params, zeros, 0.0))) < 1e-15
    assert np.max(np.abs(overlap_quadrature(grid, zeros, 0.0))) < 1e-14
    # odd multiples of the lattice step are not zeros of the exact overlap
    assert abs(overlap_closed(params, step, 0.0)) == pytest.approx(2 / np.pi, rel=1e-12)
    assert overlap_modulus_reference(params, step, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert overlap_closed(params, 0.0, 0.0) == pytest.approx(1.0, rel=1e-14)


def test_forward_matches_gaussian_oracle(grid, params):
    c, s = 0.5 * (params.u_min + params.u_max) - 1.0, 1.2
    psi = u_gaussian(grid, c, s)
    xi = np.linspace(-3, 3, 25)
    got = forward_transform(grid, psi, xi).values
    want = C_TAU01 * s * np.sqrt(2 * np.pi) * np.exp(-1j * xi * c - 0.5 * (xi * s) ** 2)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_parseval_and_round_trip(grid, params):
    psi = u_gaussian(grid, params.u_min + 0.4 * params.u_length, params.u_length / 20, 2.0)
    spec = forward_transform(grid, psi, xi_window(grid))
    assert spec.tail_bound() < 1e-12
    ratio = spec.norm_squared() / psi.norm() ** 2
    assert ratio == pytest.approx(parseval_ratio(params), rel=1e-10)
    back = inverse_transform(params, spec, grid)
    assert np.max(np.abs(back.samples - psi.samples)) < 1e-10 * np.max(np.abs(psi.samples))
    pts = inverse_transform(params, spec, grid.x_nodes[[100, 700]])
    np.testing.assert_allclose(pts, back.samples[[100, 700]], rtol=1e-12)


@given(st.floats(0.05, 0.9), st.floats(0.3, 0.7), st.floats(-3.0, 3.0))
def test_parseval_property(tau, centre, waves):
    p = make_params(tau)
    g = make_grid(p, 257)
    psi = u_gaussian(g, p.u_min + centre * p.u_length, p.u_length / 15, 2 * np.pi * waves / p.u_length)
    spec = forward_transform(g, psi, xi_window(g))
    assert spec.norm_squared() / psi.norm() ** 2 == pytest.approx(parseval_ratio(p), rel=1e-6)


def test_forward_rejects_small_phi(grid):
    psi = u_gaussian(grid, 0.0, 1.0)
    with pytest.raises(ValueError):
        forward_transform(grid, psi.small(), [0.0])
    with pytest.raises(ValueError):
        forward_transform(grid, psi, [])


def test_spectral_function_validation(params):
    with pytest.raises(ValueError, match="empty"):
        SpectralFunction(params, [], [])
    with pytest.raises(ValueError):
        SpectralFunction(params, [0.0, 0.0], [1, 1])
    with pytest.raises(ValueError):
        SpectralFunction(params, [0.0, 1.0], [1, 1], window=(0.5, 2.0))


def test_xi_window_defaults(grid, params):
    xi = xi_window(grid)
    assert xi[0] == -xi[-1]
    assert np.diff(xi)[0] == pytest.approx(np.pi / params.u_length, rel=1e-14)
    assert xi[-1] <= np.pi / grid.step
    with pytest.raises(ValueError):
        xi_window(grid, half_width=-1.0)


def test_momentum_eigenstate_in_spectral_space():
    p = make_params(0.1)
    g = make_grid(p, 2049)
    xi0 = 2 * lattice_step(p)
    psi = u_gaussian(g, 0.5 * (p.u_min + p.u_max), p.u_length / 20, xi0)
    spec = forward_transform(g, psi, xi_window(g))
    out = apply_operator_spectral(g, "momentum", spec)
    # a narrow-band wave packet: p F ~ xi F on the spectral peak
    peak = np.abs(spec.values) > 0.5 * np.abs(spec.values).max()
    ratio = out.values[peak] / spec.values[peak]
    np.testing.assert_allclose(ratio.real, spec.xi_nodes[peak], atol=0.02)
    with pytest.raises(ValueError):
        apply_operator_spectral(g, "spin", spec)


def test_xi_derivative_of_gaussian(params):
    xi = np.linspace(-4, 4, 801)
    c = 1.5
    spec = SpectralFunction(params, xi, np.exp(-1j * xi * c - 0.5 * xi**2))
    want = 1j * (-1j * c - xi) * spec.values
    assert np.max(np.abs(xi_derivative(spec) - want)[1:-1]) < 5e-4


def test_spectral_csv_roundtrip(tmp_path, params):
    spec = SpectralFunction(params, [-1.0, 0.5, 2.0], [1 + 2j, -0.25j, 3.0])
    path = tmp_path / "s.csv"
    write_spectral_csv(path, spec)
    back = read_spectral_csv(path, params)
    np.testing.assert_array_equal(back.values, spec.values)
    np.testing.assert_array_equal(back.xi_nodes, spec.xi_nodes)
    path.write_text("xi,re,im\n")
    with pytest.raises(ValueError, match="empty"):
        read_spectral_csv(path, params)


@pytest.fixture(scope="module")
def g4097():
    return make_grid(make_params(0.1), 4097)


@pytest.mark.parametrize("n_xi", [-2, 1, 3])
def test_spike_eigenrelations(g4097, n_xi):
    p = g4097.params
    xi0 = n_xi * lattice_step(p)
    spike = SpectralFunction(p, [xi0], [1.0])
    base = identity_spectral(g4097, spike).values[0]
    mom = apply_operator_spectral(g4097, "momentum", spike).values[0]
    kin = apply_operator_spectral(g4097, "hamiltonian", spike).values[0]
    assert abs(mom - xi0 * base) <= 1e-6 * abs(xi0 * base)
    assert abs(kin - 0.5 * xi0**2 * base) <= 1e-6 * abs(0.5 * xi0**2 * base)


def test_position_small_tau_is_xi_derivative():
    # tau = 1e-3 stands in for tau -> 0: the domain grows as 1/tau, so smaller tau needs
    # proportionally more nodes at the same u resolution
    p = make_params(1e-3)
    g = make_grid(p, int(round(p.u_length / 0.2)) + 1)
    u = g.u_nodes
    psi = WaveFunction(g, np.exp(-0.5 * u**2) / np.sqrt(g.f))
    spec = forward_transform(g, psi, xi_window(g, 9.0, 2 * np.pi / (p.u_max + 10.0)))
    out = apply_operator_spectral(g, "position", spec)
    ref = xi_derivative(spec)
    assert np.max(np.abs(out.values - ref)) <= 1e-3 * np.max(np.abs(ref))
