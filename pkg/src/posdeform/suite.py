"""The full invariant suite behind ``posdeform verify``.

Every entry is a :class:`ResidualReport`.  Entries flagged
``expected_divergence`` record a closed form that is known to disagree with
its oracle; they are reported but never fail the run.
"""
from __future__ import annotations

import numpy as np

from .classical import PhaseState, energy_drift, free_potential, harmonic_potential, integrate_trajectory
from .deformation import DeformationParams, u_of_x
from .grid import WaveFunction, integrate_deformed, integrate_flat, make_grid
from .operators import DEFAULT_TOLERANCES, ResidualReport, hamiltonian_matrix, verify_relations
from .propagators import (
    SpectralPropagatorFactory, bound_scan, composition_residual, free_action, free_kernel_on_grid,
    interior_mask, relative_difference, time_reversal_residual, timeslice_propagator, unitarity_residual,
)
from .transform import (
    eigenfunction_on_grid, forward_transform, inverse_transform, lattice_step, normalization_constant,
    overlap_closed, overlap_modulus_reference, overlap_quadrature, parseval_ratio, xi_window,
)

SUITE_TOLERANCES = {
    **DEFAULT_TOLERANCES,
    "normalization": 1e-10,
    "eigenfunction_norm": 1e-8,
    "parseval": 1e-6,
    "round_trip": 1e-6,
    "overlap_piecewise": 1e-10,
    "overlap_derived_zeros": 1e-8,
    "overlap_paper_form": 1e-10,
    "action_identity": 1e-12,
    "timeslice_vs_closed_form": 1e-3,
    "composition": 1e-10,
    "kernel_unitarity": 1e-8,
    "time_reversal": 1e-10,
    "bound_contracted_region": 0.0,
    "bound_global_claim": 0.0,
    "energy_drift": 1e-8,
    "free_flat_motion": 1e-9,
}

EXPECTED_DIVERGENCES = ("overlap_paper_form", "bound_global_claim")

# kernels are dense n x n products; the spectral checks run on at most this many nodes
KERNEL_NODES = 1025


def gaussian_state(grid, centre_frac=0.5, width_frac=1 / 20, waves=0.0) -> WaveFunction:
    """Capital-Phi Gaussian in ``u`` with ``waves`` oscillations across the domain."""
    p = grid.params
    u = grid.u_nodes
    length = p.u_length
    env = np.exp(-0.5 * ((u - p.u_min - centre_frac * length) / (width_frac * length)) ** 2)
    small = env * np.exp(2j * np.pi * waves * u / length)
    return WaveFunction(grid, small / np.sqrt(grid.f))


def run_suite(params: DeformationParams, n: int = 2049, *, delta_t: float = 1.0, slices: int = 32,
              xi_half_width: float | None = None, tolerances=None) -> list[ResidualReport]:
    tol = dict(SUITE_TOLERANCES)
    unknown = set(tolerances or {}) - set(SUITE_TOLERANCES)
    if unknown:
        raise ValueError(f"unknown tolerance labels {sorted(unknown)}")
    tol.update(tolerances or {})
    grid = make_grid(params, n)
    out = verify_relations(grid, delta_t=delta_t, tolerances={k: tol[k] for k in DEFAULT_TOLERANCES})
    out += _transform_checks(grid, tol, xi_half_width)
    out += _propagator_checks(params, min(n, KERNEL_NODES), delta_t, slices, tol)
    out += _classical_checks(params, tol)
    return out


def _report(label, relation, residual, tol, expected=False):
    return ResidualReport(label, relation, residual, tol[label], expected_divergence=expected)


def _transform_checks(grid, tol, xi_half_width):
    p = grid.params
    c = normalization_constant(p)
    out = [_report("normalization", "C^2 int dx/f = 1",
                   c**2 * integrate_deformed(grid, np.ones(grid.n)) - 1.0, tol)]
    phi = eigenfunction_on_grid(grid, lattice_step(p))
    out.append(_report("eigenfunction_norm", "<Phi_xi|Phi_xi> = 1",
                       integrate_flat(grid, np.abs(phi.samples) ** 2) - 1.0, tol))

    xi = xi_window(grid, xi_half_width)
    psi = gaussian_state(grid, 0.45, 1 / 20, 3.0)
    spec = forward_transform(grid, psi, xi)
    ratio = spec.norm_squared() / integrate_flat(grid, np.abs(psi.samples) ** 2).real
    out.append(_report("parseval", "int |F|^2 dxi / int |Phi|^2 dx = 2 hbar tau sqrt3",
                       ratio / parseval_ratio(p) - 1.0, tol))
    back = inverse_transform(p, spec, grid)
    out.append(_report("round_trip", "inverse(forward(Phi)) = Phi",
                       np.max(np.abs(back.samples - psi.samples)) / np.max(np.abs(psi.samples)), tol))

    step = lattice_step(p)
    d = step * np.linspace(-6.3, 6.3, 127)
    quad = overlap_quadrature(grid, d, 0.0)
    closed = overlap_closed(p, d, 0.0)
    out.append(_report("overlap_piecewise", "piecewise-exact overlap = closed plane-wave integral",
                       np.max(np.abs(quad - closed)), tol))
    zeros = 2.0 * step * np.array([-3, -2, -1, 1, 2, 3])
    out.append(_report("overlap_derived_zeros", "|overlap| = 0 at 2 sqrt3 tau hbar n",
                       np.max(np.abs(overlap_quadrature(grid, zeros, 0.0))), tol))
    out.append(_report("overlap_paper_form", "printed real sinc overlap (zeros at sqrt3 tau hbar n)",
                       np.max(np.abs(overlap_modulus_reference(p, d, 0.0) - quad)), tol, expected=True))
    return out


def _propagator_checks(params, n, delta_t, slices, tol):
    rng = np.random.default_rng(20240611)
    ell = params.ell_max
    x, xp = rng.uniform(-ell, ell, (2, 100))
    a = free_action(params, x, xp, delta_t).s
    b = free_action(params, x, xp, delta_t, form="flat").s
    out = [_report("action_identity", "(2m/(3 tau^2 dt)) A^2 = m du^2/(2 dt)",
                   np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)), tol)]

    grid = make_grid(params, n)
    # the closed form lives on the whole line: keep the diffusion length well inside the domain
    dt_free = min(delta_t, params.mass * (params.u_length / 20.0) ** 2 / params.hbar)
    mask = interior_mask(grid, 6.0 * np.sqrt(params.hbar * dt_free / params.mass))
    k = timeslice_propagator(grid, hamiltonian_matrix(grid), dt_free, slices)
    err = relative_difference(k, free_kernel_on_grid(grid, dt_free, "euclidean"), mask)
    out.append(_report("timeslice_vs_closed_form",
                       f"timeslice (V=0, dt={dt_free!r}) = (f f')^-1/2 K_fp, interior", err, tol))

    u = grid.u_nodes
    v = 0.5 * (u - 0.5 * (u[0] + u[-1])) ** 2 / (0.25 * params.u_length) ** 2
    factory = SpectralPropagatorFactory(grid, hamiltonian_matrix(grid, v))
    t1, t2 = 0.4 * delta_t, 0.6 * delta_t
    k12 = factory(delta_t)
    out.append(_report("composition", "K(t1) o K(t2) = K(t1 + t2)",
                       composition_residual(factory(t1), factory(t2), k12), tol))
    out.append(_report("kernel_unitarity", "K^dag K = I (real time)", unitarity_residual(k12), tol))
    out.append(_report("time_reversal", "K^dag(dt) = K(-dt)",
                       time_reversal_residual(k12, factory(-delta_t)), tol))

    left = np.linspace(-ell, 0.0, 11)
    rep = bound_scan(params, left, delta_t)
    out.append(_report("bound_contracted_region", "S_fp <= S0 for x, x' in [-ell_max, 0]",
                       rep.summary()["action_bound_violated"], tol))
    full = np.linspace(-ell, ell, 41)
    rep = bound_scan(params, full, delta_t)
    worst = max(r["s_def"] - r["s_std"] for r in rep.records)
    out.append(_report("bound_global_claim", "S_fp <= S0 for all x, x' (largest excess S_fp - S0)",
                       max(worst, 0.0), tol, expected=True))
    return out


def _classical_checks(params, tol):
    period = 2.0 * np.pi
    steps = int(round(period / 1e-3))
    osc = integrate_trajectory(params, harmonic_potential(), PhaseState(0.1 * params.ell_max, 0.0),
                               period, period / steps)
    out = [_report("energy_drift", "h conserved along the oscillator trajectory",
                   energy_drift(osc, params, harmonic_potential()), tol)]
    xi0 = 0.5
    tr = integrate_trajectory(params, free_potential(), PhaseState(0.0, xi0), 2.0, 1e-3)
    u = u_of_x(params, tr.x)
    out.append(_report("free_flat_motion", "u(x(t)) = u(x0) + xi0 t / m",
                       np.max(np.abs(u - u[0] - xi0 * tr.t / params.mass)), tol))
    return out


def suite_passed(reports) -> bool:
    return all(r.passed for r in reports if not r.expected_divergence)
