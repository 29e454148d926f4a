"""Momentum eigenstates and the generalized Fourier transform.

The Hermitian momentum ``p`` has eigenfunctions
``Phi_xi(x) = C f(x)^-1/2 exp(i xi u(x) / hbar)`` with ``C = sqrt(tau sqrt3 / pi)``,
normalized so that ``<Phi_xi|Phi_xi> = 1``.  The transform pair is

    F(xi)  = C int dx Phi(x) f(x)^-1/2 exp(-i xi u(x)/hbar)
           = C int du phi(u) exp(-i xi u/hbar)
    Phi(x) = 1/(hbar sqrt(4 pi tau sqrt3)) int dxi F(xi) f(x)^-1/2 exp(i xi u(x)/hbar)

so the forward map is an ordinary Fourier transform of the small-phi samples
over the finite interval ``[u_min, u_max]``.  Parseval reads
``int |F|^2 dxi = 2 hbar tau sqrt3 int |Phi|^2 dx``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .deformation import SQRT3, DeformationParams, check_in_domain, deformation_factor, u_of_x
from .grid import Grid, WaveFunction, composite_weights
from .operators import INTERIOR_DEPTH, OPERATOR_NAMES, apply_operator

_CHUNK = 1 << 22


def normalization_constant(params: DeformationParams) -> float:
    return float(np.sqrt(params.tau * SQRT3 / np.pi))


def inverse_prefactor(params: DeformationParams) -> float:
    return 1.0 / (params.hbar * np.sqrt(4.0 * np.pi * params.tau * SQRT3))


def parseval_ratio(params: DeformationParams) -> float:
    """``int |F|^2 dxi / int |Phi|^2 dx``."""
    return 2.0 * params.hbar * params.tau * SQRT3


def lattice_step(params: DeformationParams) -> float:
    """Spacing ``sqrt3 hbar tau`` of the momentum lattice."""
    return SQRT3 * params.hbar * params.tau


def eigenfunction(params: DeformationParams, xi, x):
    """``Phi_xi(x)``; ``xi`` and ``x`` broadcast.  Raises ``DomainError`` off the domain."""
    x = check_in_domain(params, x)
    xi = np.asarray(xi, dtype=float)
    c = normalization_constant(params)
    return c / np.sqrt(deformation_factor(params, x)) * np.exp(1j * xi * u_of_x(params, x) / params.hbar)


def eigenfunction_on_grid(grid: Grid, xi: float) -> WaveFunction:
    return WaveFunction(grid, eigenfunction(grid.params, xi, grid.x_nodes))


# -- overlaps ----------------------------------------------------------------------

def overlap_quadrature(grid: Grid, xi, xi_prime):
    """``<Phi_xi'|Phi_xi>`` integrated exactly over each grid interval.

    The integrand is ``C^2 exp(i (xi - xi') u / hbar)`` in ``u``, so every
    interval contributes ``exp(i k u_mid) du sinc(k du / 2)``.
    """
    p = grid.params
    k = (np.asarray(xi, dtype=float) - np.asarray(xi_prime, dtype=float)) / p.hbar
    u = grid.u_nodes
    du = np.diff(u)
    mid = 0.5 * (u[1:] + u[:-1])
    ks = k[..., None]
    terms = np.exp(1j * ks * mid) * du * np.sinc(ks * du / (2.0 * np.pi))
    return normalization_constant(p) ** 2 * terms.sum(axis=-1)


def overlap_closed(params: DeformationParams, xi, xi_prime):
    """Exact ``C^2 int_{u_min}^{u_max} exp(i (xi - xi') u / hbar) du``.

    ``|overlap|`` vanishes at ``xi - xi' = 2 sqrt3 tau hbar n``, ``n != 0``.
    """
    k = (np.asarray(xi, dtype=float) - np.asarray(xi_prime, dtype=float)) / params.hbar
    length = params.u_length
    centre = 0.5 * (params.u_min + params.u_max)
    return (normalization_constant(params) ** 2 * length
            * np.exp(1j * k * centre) * np.sinc(k * length / (2.0 * np.pi)))


def overlap_modulus_reference(params: DeformationParams, xi, xi_prime):
    """Real form ``sin(pi d / (tau hbar sqrt3)) / (pi d / (tau hbar sqrt3))``, ``d = xi - xi'``.

    Kept for comparison: its zeros sit at ``d = sqrt3 tau hbar n``, half the
    spacing of the zeros of :func:`overlap_closed`.
    """
    d = np.asarray(xi, dtype=float) - np.asarray(xi_prime, dtype=float)
    return np.sinc(d / lattice_step(params))


def momentum_lattice(params: DeformationParams, n_lo: int, n_hi: int) -> np.ndarray:
    if n_hi < n_lo:
        raise ValueError("empty lattice range")
    return lattice_step(params) * np.arange(n_lo, n_hi + 1, dtype=float)


# -- spectral functions -----------------------------------------------------------

@dataclass(frozen=True)
class MomentumSample:
    xi: float
    amplitude: complex

    def __post_init__(self):
        if not np.isfinite(self.xi):
            raise ValueError("xi must be finite")


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Samples of ``F(xi)`` on increasing nodes inside a declared window."""

    params: DeformationParams
    xi_nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    window: tuple[float, float] | None = None

    def __post_init__(self):
        xi = np.array(self.xi_nodes, dtype=float)
        v = np.array(self.values, dtype=complex)
        if xi.ndim != 1 or xi.size == 0:
            raise ValueError("spectral window is empty")
        if v.shape != xi.shape:
            raise ValueError("values and nodes differ in shape")
        if xi.size > 1 and np.any(np.diff(xi) <= 0):
            raise ValueError("xi nodes must be strictly increasing")
        lo, hi = (xi[0], xi[-1]) if self.window is None else self.window
        if xi[0] < lo or xi[-1] > hi:
            raise ValueError("xi nodes lie outside the declared window")
        xi.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "xi_nodes", xi)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "window", (float(lo), float(hi)))

    def samples(self) -> list[MomentumSample]:
        return [MomentumSample(float(a), complex(b)) for a, b in zip(self.xi_nodes, self.values)]

    def weights(self) -> np.ndarray:
        return xi_weights(self.xi_nodes)

    def norm_squared(self) -> float:
        return float(np.sum(self.weights() * np.abs(self.values) ** 2))

    def tail_bound(self) -> float:
        """Largest ``|F|`` on the window edges relative to the peak."""
        a = np.abs(self.values)
        peak = a.max()
        return 0.0 if peak == 0.0 else float(max(a[0], a[-1]) / peak)


def xi_weights(xi_nodes) -> np.ndarray:
    """Quadrature weights on ``xi`` nodes: Gregory-corrected if uniform, trapezoid otherwise."""
    xi = np.asarray(xi_nodes, dtype=float)
    n = xi.size
    if n == 1:
        return np.ones(1)
    d = np.diff(xi)
    if n >= 16 and np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        return composite_weights(n, float(d[0]))
    w = np.zeros(n)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def xi_window(grid: Grid, half_width: float | None = None, step: float | None = None) -> np.ndarray:
    """Symmetric uniform ``xi`` nodes for transforms of states on ``grid``.

    The default half-width is the grid's band limit ``pi hbar / du`` and the
    default step is ``pi hbar / (u_max - u_min)`` (the momentum lattice
    spacing), which keeps the periodic images of a state off the domain.
    """
    p = grid.params
    if half_width is None:
        half_width = np.pi * p.hbar / grid.step if grid.spacing_mode == "uniform-in-u" \
            else np.pi * p.hbar / np.min(np.diff(grid.u_nodes))
    if step is None:
        step = np.pi * p.hbar / p.u_length
    if not (half_width > 0 and step > 0):
        raise ValueError("xi window half-width and step must be positive")
    m = int(np.floor(half_width / step + 1e-9))
    return step * np.arange(-m, m + 1, dtype=float)


def forward_transform(grid: Grid, psi: WaveFunction, xi_nodes) -> SpectralFunction:
    """``F(xi) = C int du phi(u) exp(-i xi u / hbar)`` by quadrature on ``grid``."""
    if not psi.grid.same_as(grid):
        raise ValueError("wavefunction lives on a different grid")
    if psi.picture != "capital-Phi":
        raise ValueError(f"forward transform expects a capital-Phi wavefunction, got {psi.picture}")
    xi = np.atleast_1d(np.asarray(xi_nodes, dtype=float))
    if xi.size == 0:
        raise ValueError("spectral window is empty")
    p = grid.params
    phi = psi.samples * np.sqrt(grid.f) * grid.w_deformed
    u = grid.u_nodes
    out = np.empty(xi.size, dtype=complex)
    rows = max(1, _CHUNK // grid.n)
    for s in range(0, xi.size, rows):
        blk = xi[s : s + rows]
        out[s : s + rows] = np.exp(-1j * np.outer(blk, u) / p.hbar) @ phi
    return SpectralFunction(p, xi, normalization_constant(p) * out)


def _inverse_samples(params, spectral, x):
    c = spectral.weights() * spectral.values
    u = u_of_x(params, x)
    out = np.empty(x.size, dtype=complex)
    rows = max(1, _CHUNK // spectral.xi_nodes.size)
    for s in range(0, x.size, rows):
        out[s : s + rows] = np.exp(1j * np.outer(u[s : s + rows], spectral.xi_nodes) / params.hbar) @ c
    return inverse_prefactor(params) * out / np.sqrt(deformation_factor(params, x))


def inverse_transform(params: DeformationParams, spectral: SpectralFunction, where):
    """Reconstruct ``Phi`` from ``F``.

    ``where`` is a :class:`Grid` (returns a capital-Phi :class:`WaveFunction`)
    or an array of positions (returns complex samples).
    """
    if spectral.xi_nodes.size == 0:
        raise ValueError("spectral window is empty")
    if isinstance(where, Grid):
        return WaveFunction(where, _inverse_samples(params, spectral, where.x_nodes))
    x = check_in_domain(params, np.atleast_1d(np.asarray(where, dtype=float)))
    return _inverse_samples(params, spectral, x)


def apply_operator_spectral(grid: Grid, op: str, spectral: SpectralFunction, potential=None,
                            depth: int = INTERIOR_DEPTH) -> SpectralFunction:
    """Conjugate a position-space operator into momentum space.

    ``F -> Phi -> A Phi -> F'``.  The outermost ``depth`` nodes at each end
    carry the Dirichlet closure of the stencils, so they are dropped from the
    forward transform of ``A Phi``.
    """
    if op not in OPERATOR_NAMES:
        raise ValueError(f"operator must be one of {OPERATOR_NAMES}, got {op!r}")
    psi = inverse_transform(grid.params, spectral, grid)
    out = apply_operator(grid, op, psi.samples, potential)
    if depth:
        out[:depth] = 0.0
        out[-depth:] = 0.0
    return forward_transform(grid, WaveFunction(grid, out), spectral.xi_nodes)


def identity_spectral(grid: Grid, spectral: SpectralFunction, depth: int = INTERIOR_DEPTH) -> SpectralFunction:
    """The same round trip as :func:`apply_operator_spectral` with the identity."""
    psi = inverse_transform(grid.params, spectral, grid)
    out = np.array(psi.samples)
    if depth:
        out[:depth] = 0.0
        out[-depth:] = 0.0
    return forward_transform(grid, WaveFunction(grid, out), spectral.xi_nodes)


def xi_derivative(spectral: SpectralFunction) -> np.ndarray:
    """``i hbar dF/dxi`` by second-order differences on the nodes."""
    return 1j * spectral.params.hbar * np.gradient(spectral.values, spectral.xi_nodes, edge_order=2)


# -- CSV ---------------------------------------------------------------------------

def write_spectral_csv(path, spectral: SpectralFunction) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["xi", "re", "im"])
        for s in spectral.samples():
            w.writerow([repr(s.xi), repr(s.amplitude.real), repr(s.amplitude.imag)])


def read_spectral_csv(path, params: DeformationParams) -> SpectralFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: spectral window is empty")
    missing = {"xi", "re", "im"} - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    xi = [float(r["xi"]) for r in rows]
    vals = [float(r["re"]) + 1j * float(r["im"]) for r in rows]
    return SpectralFunction(params, xi, vals)
