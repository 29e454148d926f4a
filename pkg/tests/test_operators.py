import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posdeform.deformation import make_params
from posdeform.grid import WaveFunction, make_grid
from posdeform.operators import (
    DEFAULT_TOLERANCES, OperatorMatrix, ResidualReport, UnsupportedGridError, apply_operator, commutator,
    commutator_defect, dyson_matrix, eigh_operator, evolution_matrix, hamiltonian_matrix, metric_matrix,
    momentum_matrix_hermitian, momentum_matrix_nonhermitian, position_matrix, reports_to_json, verify_relations,
)


@pytest.fixture(scope="module")
def g513():
    return make_grid(make_params(0.1), 513)


def test_metric_and_dyson(g513):
    s = metric_matrix(g513).entries
    gm = dyson_matrix(g513).entries
    np.testing.assert_allclose(gm.conj().T @ gm, s, rtol=1e-15)
    d = np.diagonal(s).real
    assert d.min() > 0 and d.max() <= 4 / 3 + 1e-12


def test_hermitian_momentum_is_w_hermitian(g513):
    p = momentum_matrix_hermitian(g513)
    assert np.max(np.abs(p.adjoint().entries - p.entries)) < 1e-12 * np.max(np.abs(p.entries))
    assert p.hermiticity_defect(depth=0) < 1e-14


def test_nonhermitian_momentum_is_not(g513):
    assert momentum_matrix_nonhermitian(g513).hermiticity_defect() > 1e-3


def test_momentum_needs_u_uniform():
    g = make_grid(make_params(0.1), 65, "uniform-in-x")
    with pytest.raises(UnsupportedGridError):
        momentum_matrix_hermitian(g)
    position_matrix(g)


def test_commutator_defect_second_order():
    p = make_params(0.1)
    e1 = commutator_defect(make_grid(p, 513))
    e2 = commutator_defect(make_grid(p, 1025))
    assert e2 < 1e-3
    assert 3.5 < e1 / e2 < 4.5


def test_commutator_shape(g513):
    c = commutator(position_matrix(g513), momentum_matrix_hermitian(g513))
    assert c.label == "[x,p]"
    assert np.allclose(np.diagonal(c.entries), 0.0)


def test_u_harmonic_levels():
    # V = u^2/2 in the flat coordinate: levels hbar (n + 1/2) up to O(h_u^2)
    p = make_params(0.1)
    g = make_grid(p, 1025)
    c = 0.5 * (p.u_min + p.u_max)
    h = hamiltonian_matrix(g, 0.5 * (g.u_nodes - c) ** 2)
    e, vecs = eigh_operator(h)
    np.testing.assert_allclose(e[:5], np.arange(5) + 0.5, atol=1e-3)
    w = g.lattice_flat
    gram = vecs[:, :5].conj().T @ (w[:, None] * vecs[:, :5])
    np.testing.assert_allclose(gram, np.eye(5), atol=1e-12)


def test_eigh_rejects_non_hermitian(g513):
    with pytest.raises(ValueError, match="not Hermitian"):
        eigh_operator(momentum_matrix_nonhermitian(g513))


def test_potential_validation(g513):
    with pytest.raises(ValueError):
        hamiltonian_matrix(g513, np.ones(3))
    with pytest.raises(ValueError):
        hamiltonian_matrix(g513, 1j * np.ones(g513.n))
    with pytest.raises(ValueError):
        hamiltonian_matrix(g513, kinetic="spectral")


def test_operator_matrix_validation(g513):
    with pytest.raises(ValueError):
        OperatorMatrix(g513, np.eye(4))
    with pytest.raises(ValueError):
        OperatorMatrix(g513, np.full((g513.n, g513.n), np.nan))


def test_evolution_preserves_norm(g513):
    u = evolution_matrix(hamiltonian_matrix(g513), 0.7)
    psi = WaveFunction(g513, np.exp(-((g513.u_nodes) ** 2)))
    out = u @ psi
    assert out.norm() == pytest.approx(psi.norm(), rel=1e-12)


@given(st.integers(0, 2**31 - 1), st.sampled_from(["position", "momentum", "hamiltonian"]))
def test_matrix_free_matches_dense(seed, name):
    g = make_grid(make_params(0.35), 97)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    pot = rng.standard_normal(g.n)
    dense = {"position": position_matrix(g), "momentum": momentum_matrix_hermitian(g),
             "hamiltonian": hamiltonian_matrix(g, pot)}[name].entries
    got = apply_operator(g, name, v, pot if name == "hamiltonian" else None)
    np.testing.assert_allclose(got, dense @ v, rtol=1e-12, atol=1e-12 * np.max(np.abs(dense @ v)))


def test_apply_operator_rejects_unknown(g513):
    with pytest.raises(ValueError):
        apply_operator(g513, "spin", np.zeros(g513.n))


@given(st.floats(0.05, 0.9), st.integers(0, 1000))
def test_momentum_hermitian_w_inner_product(tau, seed):
    g = make_grid(make_params(tau), 65)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, g.n)) + 1j * rng.standard_normal((2, g.n))
    w = g.lattice_flat
    pa = apply_operator(g, "momentum", a)
    pb = apply_operator(g, "momentum", b)
    lhs = np.sum(w * np.conj(pa) * b)
    rhs = np.sum(w * np.conj(a) * pb)
    assert abs(lhs - rhs) <= 1e-11 * (abs(lhs) + 1.0)


def test_verify_relations_default_grid(grid):
    reps = verify_relations(grid)
    labels = {r.label for r in reps}
    assert labels == set(DEFAULT_TOLERANCES)
    assert all(r.passed for r in reps), [r.to_record() for r in reps if not r.passed]
    rec = {r.label: r for r in reps}
    assert rec["dyson_similarity_x"].residual == 0.0


def test_verify_relations_coarse_grid_fails_kinetic(g513):
    rec = {r.label: r for r in verify_relations(g513)}
    assert not rec["kinetic_assemblies"].passed
    assert rec["pseudo_hermiticity"].passed


def test_verify_relations_rejects_unknown_tolerance(g513):
    with pytest.raises(ValueError):
        verify_relations(g513, tolerances={"nope": 1.0})


def test_report_serialization():
    r = ResidualReport("x", "a = b", -2e-4, 1e-3)
    assert r.residual == 2e-4 and r.passed
    data = json.loads(reports_to_json([r, ResidualReport("y", "c", 1.0, 0.0, expected_divergence=True)]))
    assert data[0] == {"label": "x", "relation": "a = b", "residual": 2e-4, "tolerance": 1e-3, "pass": True}
    assert data[1]["expected_divergence"] is True and data[1]["pass"] is False
