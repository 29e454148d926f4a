"""Acceptance criteria 1-12, one test each, at the stated tolerances."""
import numpy as np
import pytest

from posdeform.classical import PhaseState, energy_drift, free_potential, harmonic_potential, integrate_trajectory
from posdeform.deformation import make_params, u_of_x
from posdeform.grid import WaveFunction, integrate_deformed, make_grid
from posdeform.operators import apply_operator, commutator_defect, hamiltonian_matrix, verify_relations
from posdeform.propagators import (
    SpectralPropagatorFactory, bound_scan, composition_residual, free_action, free_kernel_on_grid, interior_mask,
    relative_difference, standard_baseline, time_reversal_residual, timeslice_propagator, unitarity_residual,
)
from posdeform.transform import (
    forward_transform, inverse_transform, lattice_step, normalization_constant, overlap_closed,
    overlap_modulus_reference, overlap_quadrature, parseval_ratio, xi_window,
)

TAU = 0.1


@pytest.fixture(scope="module")
def p():
    return make_params(TAU)


def u_gaussian(grid, centre_frac, width_frac, waves=0.0):
    q = grid.params
    u = grid.u_nodes
    env = np.exp(-0.5 * ((u - q.u_min - centre_frac * q.u_length) / (width_frac * q.u_length)) ** 2)
    return WaveFunction(grid, env * np.exp(2j * np.pi * waves * u / q.u_length) / np.sqrt(grid.f))


def test_01_normalization(record_criterion):
    errs = {}
    for tau in (0.05, 0.1, 0.3, 0.6, 0.9):
        q = make_params(tau)
        g = make_grid(q, 2049)
        errs[tau] = abs(normalization_constant(q) ** 2 * integrate_deformed(g, np.ones(g.n)) - 1.0)
    worst = max(errs.values())
    ok = record_criterion(1, "normalization C^2 int dx/f = 1", worst <= 1e-10, f"max error {worst:.2e} (tol 1e-10)")
    assert ok


def _eigen_error(p, n, xi):
    g = make_grid(p, n)
    phi = normalization_constant(p) / np.sqrt(g.f) * np.exp(1j * xi * g.u_nodes / p.hbar)
    s = slice(2, n - 2)
    d = (apply_operator(g, "momentum", phi) - xi * phi)[s]
    return float(np.max(np.abs(d)) / np.max(np.abs(xi * phi[s])))


def test_02_eigenrelation(p, record_criterion):
    xis = lattice_step(p) * np.array([-2, -1, 1, 2, 3])
    fine = [_eigen_error(p, 4097, xi) for xi in xis]
    coarse = [_eigen_error(p, 2049, xi) for xi in xis]
    ratios = [c / f for c, f in zip(coarse, fine)]
    ok = max(fine) <= 1e-6 and min(ratios) >= 3.5
    record_criterion(2, "eigenrelation -i hbar D_x Phi = xi Phi", ok,
                     f"max error {max(fine):.2e} at n=4097 (tol 1e-6), min doubling ratio {min(ratios):.2f} (>= 3.5)")
    assert ok


def _relations(p, n):
    return {r.label: r.residual for r in verify_relations(make_grid(p, n))}


def test_03_similarity_chain(p, record_criterion):
    coarse, fine = _relations(p, 1025), _relations(p, 2049)
    keys = ("dyson_similarity_p", "pseudo_hermiticity")
    ratios = {k: coarse[k] / fine[k] for k in keys}
    ok = (fine["dyson_similarity_x"] == 0.0 and all(fine[k] <= 1e-3 for k in keys)
          and all(r >= 3.5 for r in ratios.values()))
    record_criterion(3, "similarity chain", ok,
                     f"GXG^-1 - x = {fine['dyson_similarity_x']:.1e}, GPG^-1 - p = {fine['dyson_similarity_p']:.2e}, "
                     f"SPS^-1 - P^dag = {fine['pseudo_hermiticity']:.2e} at n=2049 (tol 1e-3); "
                     f"refinement ratios {ratios['dyson_similarity_p']:.2f}, {ratios['pseudo_hermiticity']:.2f}")
    assert ok


def test_04_commutator(p, record_criterion):
    e1 = commutator_defect(make_grid(p, 1025))
    e2 = commutator_defect(make_grid(p, 2049))
    ok = e2 <= 1e-3 and e1 / e2 >= 3.5
    record_criterion(4, "[x,p]/(i hbar) = f", ok, f"max rel error {e2:.2e} at n=2049 (tol 1e-3), ratio {e1 / e2:.2f}")
    assert ok


def test_05_parseval(p, record_criterion):
    g = make_grid(p, 2049)
    xi = xi_window(g)
    states = [(0.5, 1 / 20, 0.0), (0.4, 1 / 25, 3.0), (0.6, 1 / 16, -5.0), (0.3, 1 / 30, 10.0), (0.55, 1 / 12, 1.5)]
    ratios, trips = [], []
    for c, w, k in states:
        psi = u_gaussian(g, c, w, k)
        spec = forward_transform(g, psi, xi)
        ratios.append(spec.norm_squared() / psi.norm() ** 2)
        back = inverse_transform(p, spec, g)
        trips.append(np.max(np.abs(back.samples - psi.samples)) / np.max(np.abs(psi.samples)))
    dev = max(abs(r / parseval_ratio(p) - 1.0) for r in ratios)
    ok = dev <= 1e-6 and max(trips) <= 1e-6
    record_criterion(5, "Parseval ratio 2 hbar tau sqrt3", ok,
                     f"max rel deviation {dev:.2e} over 5 states (tol 1e-6), round trip {max(trips):.2e} (tol 1e-6)")
    assert ok


def test_06_overlap(p, record_criterion):
    g = make_grid(p, 2049)
    step = lattice_step(p)
    d = step * np.linspace(-6.3, 6.3, 127)
    quad = overlap_quadrature(g, d, 0.0)
    piecewise = np.max(np.abs(quad - overlap_closed(p, d, 0.0)))
    at_zero = abs(overlap_quadrature(g, 0.0, 0.0) - 1.0)
    odd = step * np.array([-3, -1, 1, 3])
    # the printed real sinc vanishes at odd lattice multiples; the exact overlap has modulus 2/(pi |n|) there
    printed = np.max(np.abs(overlap_modulus_reference(p, odd, 0.0)))
    exact = np.min(np.abs(overlap_quadrature(g, odd, 0.0)))
    divergence = np.max(np.abs(overlap_modulus_reference(p, d, 0.0) - quad))
    reproduced = printed < 1e-12 and exact > 0.2 and divergence > 1e-10
    ok = piecewise <= 1e-10 and at_zero <= 1e-10 and reproduced
    record_criterion(6, "overlap adjudication", ok,
                     f"piecewise {piecewise:.1e} (tol 1e-10), |1 - overlap(0)| {at_zero:.1e}; "
                     f"expected divergence vs printed sinc {divergence:.3f} (zeros 2 sqrt3 tau hbar n vs sqrt3 tau hbar n)")
    assert ok


def test_07_timeslice_convergence(p, record_criterion):
    g = make_grid(p, 2049)
    dt = 1.0
    ref = free_kernel_on_grid(g, dt, "euclidean")
    mask = interior_mask(g, 6.0 * np.sqrt(p.hbar * dt / p.mass))
    h = hamiltonian_matrix(g)
    errs = [relative_difference(timeslice_propagator(g, h, dt, n), ref, mask) for n in (8, 16, 32, 64)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = errs[-1] <= 1e-3 and min(ratios) >= 1.9
    record_criterion(7, "timeslice -> closed form", ok,
                     f"errors {', '.join(f'{e:.1e}' for e in errs)} (final tol 1e-3); "
                     f"ratios {', '.join(f'{r:.2f}' for r in ratios)} (>= 1.9)")
    assert ok


def test_08_kernel_properties(p, record_criterion):
    g = make_grid(p, 1025)
    u = g.u_nodes
    fac = SpectralPropagatorFactory(g, hamiltonian_matrix(g, 0.5 * ((u - u.mean()) / (0.25 * p.u_length)) ** 2))
    k = fac(1.0)
    comp = composition_residual(fac(0.4), fac(0.6), k)
    unit = unitarity_residual(k)
    rev = time_reversal_residual(k, fac(-1.0))
    ok = comp <= 1e-6 and unit <= 1e-8 and rev <= 1e-10
    record_criterion(8, "kernel properties", ok,
                     f"composition {comp:.1e} (tol 1e-6), unitarity {unit:.1e} (tol 1e-8), "
                     f"time reversal {rev:.1e} (tol 1e-10)")
    assert ok


def test_09_action_identity_and_limit(p, record_criterion):
    rng = np.random.default_rng(9)
    x, xp = rng.uniform(-p.ell_max, p.ell_max, (2, 100))
    dt = 1.0
    a = free_action(p, x, xp, dt).s
    b = p.mass * (u_of_x(p, x) - u_of_x(p, xp)) ** 2 / (2 * dt)
    ident = float(np.max(np.abs(a - b) / b))
    taus = np.array([1e-2, 1e-3, 1e-4])
    gaps = np.array([abs(free_action(make_params(t), 1.0, 0.5, dt).s - standard_baseline(make_params(t), 1.0, 0.5, dt)[1])
                     for t in taus])
    slope = np.polyfit(np.log(taus), np.log(gaps), 1)[0]
    ok = ident <= 1e-12 and abs(slope - 1.0) <= 0.05
    record_criterion(9, "action identity and tau -> 0", ok,
                     f"identity {ident:.1e} (tol 1e-12); |S_fp - S0| log-slope in tau {slope:.3f} (O(tau))")
    assert ok


def test_10_bound_scan(p, record_criterion):
    left = bound_scan(p, np.linspace(-p.ell_max, 0.0, 21), 1.0)
    held = left.summary()["action_bound_violated"] == 0
    straddle = bound_scan(p, [[4.9, 5.1]], 1.0).records[0]
    full = bound_scan(p, np.linspace(-p.ell_max, p.ell_max, 41), 1.0).summary()
    ok = held and not straddle["pass_action_bound"] and full["expected_divergence"]
    record_criterion(10, "bound scan S_fp <= S0", ok,
                     f"holds on all {left.summary()['pairs']} pairs in [-ell, 0]; 4.9/5.1: S_fp {straddle['s_def']:.6f} > "
                     f"S0 {straddle['s_std']:.6f}; global claim expected divergence ({full['action_bound_violated']} "
                     f"of {full['pairs']} pairs violate)")
    assert ok


def test_11_classical(record_criterion):
    q = make_params(TAU)
    free = integrate_trajectory(q, free_potential(), PhaseState(-3.0, 0.8), 10.0, 1e-3)
    lin = float(np.max(np.abs(u_of_x(q, free.x) - u_of_x(q, -3.0) - 0.8 * free.t)))

    osc = harmonic_potential()
    ref = integrate_trajectory(q, osc, PhaseState(2.0, 0.0), 4.0, 1e-3).final.x
    e1, e2 = (abs(integrate_trajectory(q, osc, PhaseState(2.0, 0.0), 4.0, dt).final.x - ref) for dt in (0.04, 0.02))
    order = e1 / e2

    period = 2.0 * np.pi
    steps = 6284  # dt = 1e-3 rounded to a whole number of steps per period
    drift = energy_drift(integrate_trajectory(q, osc, PhaseState(1.0, 0.0), period, period / steps), q, osc)

    near = make_params(1e-6)
    tr = integrate_trajectory(near, osc, PhaseState(1.0, 0.0), period, period / steps)
    cos_err = float(np.max(np.abs(tr.x - np.cos(tr.t))))

    ok = lin <= 1e-9 and order >= 14 and drift <= 1e-8 and cos_err <= 1e-6
    record_criterion(11, "classical dynamics", ok,
                     f"u-linearity {lin:.1e} (tol 1e-9), RK4 ratio {order:.2f} (>= 14), drift {drift:.1e} (tol 1e-8), "
                     f"tau=1e-6 oscillator vs cos t {cos_err:.10e} (tol 1e-6)")
    assert ok


def test_12_uncertainty(p, record_criterion):
    g = make_grid(p, 4097)
    w = g.lattice_flat
    x = g.x_nodes
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        c, width, k = rng.uniform(0.3, 0.7), rng.uniform(1 / 40, 1 / 15), rng.uniform(-8, 8)
        psi = u_gaussian(g, c, width, k).samples
        psi = psi / np.sqrt(np.sum(w * np.abs(psi) ** 2))
        ev = lambda a, b: np.sum(w * np.conj(a) * b)
        mx, mx2 = ev(psi, x * psi).real, ev(psi, x * x * psi).real
        ppsi = apply_operator(g, "momentum", psi)
        mp, mp2 = ev(psi, ppsi).real, ev(ppsi, ppsi).real
        lhs = np.sqrt(mx2 - mx**2) * np.sqrt(mp2 - mp**2)
        rhs = 0.5 * p.hbar * (1 - p.tau * mx + p.tau**2 * mx2)
        worst = max(worst, rhs - lhs)
    eps = max(worst, 0.0)
    ok = eps <= 1e-4
    record_criterion(12, "generalized uncertainty relation", ok,
                     f"eps_h {eps:.1e} over 20 states at n=4097 (tol 1e-4); largest rhs - lhs {worst:.2e}")
    assert ok
