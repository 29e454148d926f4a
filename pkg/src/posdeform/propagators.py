"""Propagators: free-particle closed forms, numeric kernels and the bound scan.

Kernels are stored as matrices ``K[i, j] = K(x_i, x_j)`` on a grid.  Two
measure conventions are in use:

``measure-consistent``
    ``Phi(x) = int dx' K(x, x') Phi(x')`` for capital-Phi states; numeric
    kernels are always of this kind.
``paper-form``
    the free kernel ``sqrt(m/(2 pi i hbar dt)) exp(i m du^2 / (2 hbar dt))``
    without the ``(f f')^-1/2`` factor; it composes under ``int dx / f``.

The two differ by ``(f(x) f(x'))^-1/2``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .deformation import SQRT3, DeformationParams, check_in_domain, deformation_factor, u_of_x
from .grid import Grid
from .operators import OperatorMatrix, eigh_operator

TIME_KINDS = ("real-time", "euclidean")
PROVENANCES = ("closed-form", "timeslice", "spectral")
CONVENTIONS = ("measure-consistent", "paper-form")
ACTION_KINDS = ("deformed", "standard", "euclidean-deformed", "euclidean-standard")


def _check_time_kind(time_kind):
    if time_kind not in TIME_KINDS:
        raise ValueError(f"time_kind must be one of {TIME_KINDS}, got {time_kind!r}")


def _check_dt(delta_t):
    if not np.isfinite(delta_t) or delta_t <= 0:
        raise ValueError(f"delta_t must be positive, got {delta_t!r}")


@dataclass(frozen=True, eq=False)
class Kernel:
    grid: Grid
    entries: np.ndarray = field(repr=False)
    delta_t: float
    time_kind: str
    provenance: str
    convention: str = "measure-consistent"

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"kernel must be {self.grid.n}x{self.grid.n}, got {a.shape}")
        _check_time_kind(self.time_kind)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        # backward real-time kernels appear in the time-reversal property
        if not np.isfinite(self.delta_t) or self.delta_t == 0 or (
                self.delta_t < 0 and self.time_kind == "euclidean"):
            raise ValueError(f"invalid delta_t {self.delta_t!r} for a {self.time_kind} kernel")

    @property
    def measure(self) -> np.ndarray:
        """Lattice weights under which the kernel composes."""
        if self.convention == "measure-consistent":
            return self.grid.lattice_flat
        return self.grid.lattice_deformed

    def apply(self, samples) -> np.ndarray:
        return self.entries @ (self.measure * np.asarray(samples))

    def compose(self, other: "Kernel") -> "Kernel":
        """``int dx'' K_self(x, x'') K_other(x'', x')``."""
        if not self.grid.same_as(other.grid) or self.convention != other.convention:
            raise ValueError("kernels live on different grids or conventions")
        if self.time_kind != other.time_kind:
            raise ValueError("cannot compose kernels of different time kinds")
        m = (self.entries * self.measure[None, :]) @ other.entries
        return Kernel(self.grid, m, self.delta_t + other.delta_t, self.time_kind,
                      self.provenance, self.convention)

    def adjoint(self) -> np.ndarray:
        """``K^dag(x, x') = conj K(x', x)``."""
        return self.entries.conj().T

    def to_convention(self, convention: str) -> "Kernel":
        if convention == self.convention:
            return self
        if convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        r = np.sqrt(self.grid.f)
        rr = r[:, None] * r[None, :]
        m = self.entries * rr if convention == "paper-form" else self.entries / rr
        return Kernel(self.grid, m, self.delta_t, self.time_kind, self.provenance, convention)


@dataclass(frozen=True)
class ActionValue:
    s: float | np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"kind must be one of {ACTION_KINDS}")
        if not np.all(np.isfinite(self.s)):
            raise ValueError("action must be finite")


# -- free particle closed forms ------------------------------------------------------

def arctan_difference(params: DeformationParams, x, x_prime):
    """``A = arctan((2 tau x - 1)/sqrt3) - arctan((2 tau x' - 1)/sqrt3)``, equal to ``(tau sqrt3/2) du``."""
    t = params.tau
    x = np.asarray(x, dtype=float)
    xp = np.asarray(x_prime, dtype=float)
    a = (2 * t * x - 1) / SQRT3
    b = (2 * t * xp - 1) / SQRT3
    # arctan a - arctan b without cancellation; 1 + ab >= 0 on the domain
    return np.arctan2(2 * t * (x - xp) / SQRT3, 1 + a * b)


def _prefactor(params, delta_t, time_kind):
    base = np.sqrt(params.mass / (2.0 * np.pi * params.hbar * delta_t))
    return base * np.exp(-0.25j * np.pi) if time_kind == "real-time" else base + 0j


def free_action(params: DeformationParams, x, x_prime, delta_t: float, *, form: str = "arctan") -> ActionValue:
    """``S_fp = (2 m / (3 tau^2 dt)) A^2``; identical to ``m du^2 / (2 dt)``.

    ``form="flat"`` evaluates the second expression instead.
    """
    _check_dt(delta_t)
    check_in_domain(params, x)
    check_in_domain(params, x_prime)
    if form == "arctan":
        a = arctan_difference(params, x, x_prime)
        s = 2.0 * params.mass / (3.0 * params.tau**2 * delta_t) * a**2
    elif form == "flat":
        du = u_of_x(params, x) - u_of_x(params, x_prime)
        s = params.mass * du**2 / (2.0 * delta_t)
    else:
        raise ValueError(f"unknown form {form!r}")
    return ActionValue(s if np.ndim(s) else float(s), "deformed")


def free_kinetic(params: DeformationParams, x, x_prime, delta_t: float) -> ActionValue:
    """``T = S_fp / dt``."""
    s = free_action(params, x, x_prime, delta_t).s
    return ActionValue(s / delta_t, "deformed")


def free_propagator_closed(params: DeformationParams, x, x_prime, delta_t: float,
                           time_kind: str = "real-time", convention: str = "paper-form"):
    """Free-particle kernel ``K_fp(x, x'; dt)``.

    Real time: ``sqrt(m/(2 pi i hbar dt)) exp(i S_fp / hbar)``.  Euclidean
    (``dt -> -i dt``): ``sqrt(m/(2 pi hbar dt)) exp(-S_fp / hbar)``.  The
    measure-consistent convention multiplies by ``(f(x) f(x'))^-1/2``.
    """
    _check_time_kind(time_kind)
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    s = np.asarray(free_action(params, x, x_prime, delta_t).s)
    phase = 1j * s / params.hbar if time_kind == "real-time" else -s / params.hbar
    k = _prefactor(params, delta_t, time_kind) * np.exp(phase)
    if convention == "measure-consistent":
        k = k / np.sqrt(deformation_factor(params, x) * deformation_factor(params, x_prime))
    return k if np.ndim(k) else complex(k)


def standard_baseline(params: DeformationParams, x, x_prime, delta_t: float, time_kind: str = "real-time"):
    """Undeformed free particle ``(K0, S0, T0)`` with ``S0 = m (x - x')^2 / (2 dt)``."""
    _check_dt(delta_t)
    _check_time_kind(time_kind)
    dx = np.asarray(x, dtype=float) - np.asarray(x_prime, dtype=float)
    s0 = params.mass * dx**2 / (2.0 * delta_t)
    phase = 1j * s0 / params.hbar if time_kind == "real-time" else -s0 / params.hbar
    k0 = _prefactor(params, delta_t, time_kind) * np.exp(phase)
    if np.ndim(k0) == 0:
        return complex(k0), float(s0), float(s0 / delta_t)
    return k0, s0, s0 / delta_t


def free_kernel_on_grid(grid: Grid, delta_t: float, time_kind: str = "euclidean",
                        convention: str = "measure-consistent") -> Kernel:
    x = grid.x_nodes
    k = free_propagator_closed(grid.params, x[:, None], x[None, :], delta_t, time_kind, convention)
    return Kernel(grid, k, delta_t, time_kind, "closed-form", convention)


# -- numeric kernels ---------------------------------------------------------------

def _hamiltonian_potential(h: OperatorMatrix):
    if h.potential is not None:
        return np.asarray(h.potential, dtype=float)
    raise ValueError("hamiltonian carries no potential; build it with hamiltonian_matrix")


def timeslice_propagator(grid: Grid, hamiltonian: OperatorMatrix, delta_t: float, slices: int,
                         time_kind: str = "euclidean", *, split: str = "symmetric") -> Kernel:
    """N-fold composition of short-time kernels (Euclidean only).

    Each slice of length ``eps = dt / N`` is a Gaussian convolution in ``u``
    acting on small-phi samples, flanked by ``exp(-eps V / (2 hbar))`` on both
    sides (``split="symmetric"``), or preceded by ``exp(-eps V / hbar)`` at the
    earlier point (``split="first-order"``, the plain discrete action).
    """
    if isinstance(slices, bool) or int(slices) != slices or slices < 1:
        raise ValueError(f"slices must be a positive integer, got {slices!r}")
    _check_dt(delta_t)
    _check_time_kind(time_kind)
    if time_kind != "euclidean":
        raise ValueError("time-sliced kernels are Euclidean only; use spectral_propagator for real time")
    if grid.spacing_mode != "uniform-in-u":
        raise ValueError("time slicing needs a uniform-in-u grid")
    p = grid.params
    eps = delta_t / int(slices)
    v = _hamiltonian_potential(hamiltonian)
    u = grid.u_nodes
    du = u[:, None] - u[None, :]
    free = np.sqrt(p.mass / (2.0 * np.pi * p.hbar * eps)) * np.exp(-p.mass * du**2 / (2.0 * p.hbar * eps))
    step = free * grid.lattice_deformed[None, :]
    if split == "symmetric":
        half = np.exp(-0.5 * eps * v / p.hbar)
        step = half[:, None] * step * half[None, :]
    elif split == "first-order":
        step = step * np.exp(-eps * v / p.hbar)[None, :]
    else:
        raise ValueError(f"split must be 'symmetric' or 'first-order', got {split!r}")
    total = np.linalg.matrix_power(step, int(slices))
    small = total / grid.lattice_deformed[None, :]
    r = np.sqrt(grid.f)
    k = small / (r[:, None] * r[None, :])
    return Kernel(grid, k.astype(complex), delta_t, time_kind, "timeslice")


def spectral_propagator(grid: Grid, hamiltonian: OperatorMatrix, delta_t: float,
                        time_kind: str = "real-time", *, tol: float = 1e-10) -> Kernel:
    """``K = sum_k exp(-E_k dt / hbar) |k><k|`` (Euclidean) or with ``-i E_k dt`` (real time).

    Real-time kernels accept negative ``delta_t`` (backward evolution).
    """
    _check_time_kind(time_kind)
    if not np.isfinite(delta_t) or delta_t == 0 or (delta_t < 0 and time_kind == "euclidean"):
        raise ValueError(f"invalid delta_t {delta_t!r}")
    e, vecs = eigh_operator(hamiltonian, tol=tol)
    return _assemble_spectral(grid, e, vecs, delta_t, time_kind)


def _assemble_spectral(grid, e, vecs, delta_t, time_kind):
    hbar = grid.params.hbar
    if time_kind == "real-time":
        g = np.exp(-1j * e * delta_t / hbar)
    else:
        g = np.exp(-(e - e.min()) * delta_t / hbar) * np.exp(-e.min() * delta_t / hbar)
    # vectors are W-orthonormal: sum_k v_k(x) v_k(x')* composes under the lattice flat measure
    k = (vecs * g[None, :]) @ vecs.conj().T
    return Kernel(grid, k, delta_t, time_kind, "spectral")


class SpectralPropagatorFactory:
    """Caches one eigen-decomposition to build kernels at many times."""

    def __init__(self, grid: Grid, hamiltonian: OperatorMatrix, *, tol: float = 1e-10):
        self.grid = grid
        self.energies, self.vectors = eigh_operator(hamiltonian, tol=tol)

    def __call__(self, delta_t: float, time_kind: str = "real-time") -> Kernel:
        _check_time_kind(time_kind)
        if not np.isfinite(delta_t) or delta_t == 0 or (delta_t < 0 and time_kind == "euclidean"):
            raise ValueError(f"invalid delta_t {delta_t!r}")
        return _assemble_spectral(self.grid, self.energies, self.vectors, delta_t, time_kind)


# -- kernel properties -----------------------------------------------------------

def unitarity_residual(kernel: Kernel) -> float:
    """``|K^dag K - I|`` in the quadrature sense (Frobenius norm over sqrt(n))."""
    w = np.sqrt(kernel.measure)
    m = kernel.entries * w[:, None] * w[None, :]
    n = kernel.grid.n
    return float(np.linalg.norm(m.conj().T @ m - np.eye(n)) / np.sqrt(n))


def time_reversal_residual(forward: Kernel, backward: Kernel) -> float:
    """Relative max deviation of ``K^dag(dt)`` from ``K(-dt)``."""
    a = forward.adjoint()
    return float(np.max(np.abs(a - backward.entries)) / np.max(np.abs(backward.entries)))


def relative_difference(a: Kernel | np.ndarray, b: Kernel | np.ndarray, mask=None) -> float:
    """Relative Frobenius difference, optionally restricted by a boolean node mask."""
    a = a.entries if isinstance(a, Kernel) else np.asarray(a)
    b = b.entries if isinstance(b, Kernel) else np.asarray(b)
    if mask is not None:
        a = a[np.ix_(mask, mask)]
        b = b[np.ix_(mask, mask)]
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def composition_residual(k1: Kernel, k2: Kernel, k12: Kernel, mask=None) -> float:
    return relative_difference(k1.compose(k2), k12, mask)


def schrodinger_residual(factory: SpectralPropagatorFactory, hamiltonian: OperatorMatrix,
                         delta_t: float, probes, dt_fd: float = 1e-4, mask=None) -> float:
    """``i hbar d/dt (K g)`` by central differences against ``h (K g)`` for smooth probes ``g``.

    Working on propagated probes rather than the bare kernel keeps the time
    difference away from the lattice's largest eigenvalues.
    """
    hbar = factory.grid.params.hbar
    g = np.atleast_2d(np.asarray(probes)).T
    w = factory.grid.lattice_flat[:, None]
    psi = lambda t: factory(t).entries @ (w * g)
    lhs = 1j * hbar * (psi(delta_t + dt_fd) - psi(delta_t - dt_fd)) / (2.0 * dt_fd)
    rhs = hamiltonian.entries @ psi(delta_t)
    if mask is not None:
        lhs, rhs = lhs[mask], rhs[mask]
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))


def initial_condition_residual(kernel: Kernel, probe, mask=None) -> float:
    """Distance of ``int dx' K(x, x') g(x')`` from its short-time limit.

    The limit is ``g`` for measure-consistent kernels and ``f g`` for the
    ``paper-form`` convention, whose ``dt -> 0`` limit is ``<x|x'> = f(x) delta(x - x')``.
    """
    g = np.asarray(probe)
    out = kernel.entries @ (kernel.grid.lattice_flat * g)
    target = g if kernel.convention == "measure-consistent" else kernel.grid.f * g
    if mask is not None:
        out, target = out[mask], target[mask]
    return float(np.linalg.norm(out - target) / np.linalg.norm(target))


def interior_mask(grid: Grid, margin: float) -> np.ndarray:
    """Nodes at least ``margin`` (in ``u``) away from both domain ends."""
    u = grid.u_nodes
    return (u >= u[0] + margin) & (u <= u[-1] - margin)


# -- momentum-space propagator ----------------------------------------------------

def ft_propagator(params: DeformationParams, kernel: Kernel, xi, xi_prime):
    """``(1/(2 pi hbar)) int int K(x, x') f^-1/2 f'^-1/2 e^{-i xi a(x)} e^{i xi' a(x')}`` dx dx'.

    ``a(x) = (2/(tau sqrt3)) arctan((2 tau x - 1)/sqrt3) / hbar`` (so ``hbar a = u + u_min``).
    Integrals use the deformed-measure quadrature in ``u``: ``dx f^-1/2 = du f^1/2``.
    """
    g = kernel.grid
    k = kernel.entries
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xip = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    a = (g.u_nodes + params.u_min) / params.hbar
    wr = g.w_deformed * np.sqrt(g.f)
    left = np.exp(-1j * np.outer(xi, a)) * wr[None, :]
    right = np.exp(1j * np.outer(xip, a)) * wr[None, :]
    out = left @ k @ right.T / (2.0 * np.pi * params.hbar)
    return out if out.size > 1 else complex(out.ravel()[0])


# -- bound scan ---------------------------------------------------------------------

@dataclass
class BoundScanReport:
    records: list
    time_kind: str
    delta_t: float

    def to_json(self) -> str:
        return json.dumps(self.records, indent=2)

    def summary(self) -> dict:
        n = len(self.records)
        contracted = [r for r in self.records if r["du_le_dx"]]
        viol = [r for r in self.records if not r["pass_action_bound"]]
        return {
            "pairs": n,
            "pairs_with_abs_du_le_abs_dx": len(contracted),
            "action_bound_holds": n - len(viol),
            "action_bound_violated": len(viol),
            "kernel_bound_holds": sum(r["pass_kernel_bound"] for r in self.records),
            "violating_pairs": [[r["x"], r["x_prime"]] for r in viol],
            "expected_divergence": bool(viol),
            "note": ("S <= S0 is equivalent to |u(x) - u(x')| <= |x - x'|. Since du/dx = 1/f and "
                     "f < 1 exactly on (0, 1/tau), it fails for pairs whose segment lies mostly in "
                     "that interval; it holds for all pairs in [-1/tau, 0]."),
        }


def _pairs(x_samples):
    a = np.asarray(x_samples, dtype=float)
    if a.ndim == 2 and a.shape[1] == 2:
        return [(float(p), float(q)) for p, q in a]
    a = np.ravel(a)
    return [(float(a[i]), float(a[j])) for i in range(a.size) for j in range(i, a.size)]


def bound_scan(params: DeformationParams, x_samples, delta_t: float,
               time_kind: str = "euclidean", *, rtol: float = 1e-12) -> BoundScanReport:
    """Compare the deformed free action, kinetic term and kernel with the undeformed ones.

    ``x_samples`` is either a list of ``(x, x')`` pairs or positions, in which
    case every unordered pair (including ``x = x'``) is scanned.  Kernels are
    compared by value in Euclidean kind and by modulus in real time.
    """
    _check_dt(delta_t)
    _check_time_kind(time_kind)
    records = []
    for x, xp in _pairs(x_samples):
        check_in_domain(params, [x, xp])
        s = float(free_action(params, x, xp, delta_t).s)
        t = s / delta_t
        k = free_propagator_closed(params, x, xp, delta_t, time_kind, "paper-form")
        k0, s0, t0 = standard_baseline(params, x, xp, delta_t, time_kind)
        kd = k.real if time_kind == "euclidean" else abs(k)
        ks = k0.real if time_kind == "euclidean" else abs(k0)
        slack = rtol * max(s0, s, 1e-300)
        du = float(u_of_x(params, x) - u_of_x(params, xp))
        records.append({
            "x": x, "x_prime": xp,
            "s_def": s, "s_std": s0, "t_def": t, "t_std": t0,
            "k_def": float(kd), "k_std": float(ks),
            "pass_action_bound": bool(s <= s0 + slack),
            "pass_kinetic_bound": bool(t <= t0 + slack / delta_t),
            "pass_kernel_bound": bool(kd <= ks * (1 + rtol)),
            "du": du, "dx": x - xp,
            "du_le_dx": bool(abs(du) <= abs(x - xp) * (1 + rtol)),
        })
    return BoundScanReport(records, time_kind, delta_t)


# -- CSV ---------------------------------------------------------------------------

def write_kernel_csv(path, kernel: Kernel, indices=None) -> None:
    """Rows ``(x, x_prime, re, im)``; ``indices`` selects ``(i, j)`` node pairs (default: all)."""
    x = kernel.grid.x_nodes
    n = kernel.grid.n
    if indices is None:
        indices = ((i, j) for i in range(n) for j in range(n))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "x_prime", "re", "im"])
        for i, j in indices:
            v = kernel.entries[i, j]
            w.writerow([repr(float(x[i])), repr(float(x[j])), repr(float(v.real)), repr(float(v.imag))])
