"""Dense matrix representations of the deformed operators and residual checks.

All matrices act on capital-Phi samples.  Adjoints are taken with respect to
the lattice flat inner product ``<a|b> = sum_i lattice_flat_i conj(a_i) b_i``,
under which the central-difference momentum is exactly Hermitian.  Dirichlet
conditions are used throughout: samples outside the domain are zero.

Residuals of operator identities are measured on a bank of smooth probe
states, restricted to interior nodes.  Finite-difference matrices have
``O(1/h)`` entries, so the entrywise (Frobenius) size of a defect between two
consistent stencils does not shrink under refinement; its action on smooth
states does, at the order of the stencils.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as _sparse_linalg  # noqa: F401  (registers sparse.linalg)

from .grid import Grid, WaveFunction

INTERIOR_DEPTH = 2


class UnsupportedGridError(ValueError):
    """Operator requires a grid that is uniform in the flat coordinate."""


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    grid: Grid
    entries: np.ndarray = field(repr=False)
    picture: str = "capital-Phi"
    label: str = ""
    potential: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"expected a {self.grid.n}x{self.grid.n} matrix, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{self.label or 'operator'}: non-finite entries")

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.grid, self.entries @ other.entries, self.picture,
                                  f"{self.label}{other.label}")
        if isinstance(other, WaveFunction):
            psi = other.to_picture(self.picture)
            return WaveFunction(self.grid, self.entries @ psi.samples, self.picture)
        return self.entries @ other

    def __add__(self, other):
        return OperatorMatrix(self.grid, self.entries + other.entries, self.picture,
                              f"({self.label}+{other.label})")

    def __sub__(self, other):
        return OperatorMatrix(self.grid, self.entries - other.entries, self.picture,
                              f"({self.label}-{other.label})")

    def scaled(self, c, label=None):
        return OperatorMatrix(self.grid, c * self.entries, self.picture, label or self.label)

    def adjoint(self) -> "OperatorMatrix":
        """Adjoint under the lattice flat inner product, ``W^-1 A^H W``."""
        w = self.grid.lattice_flat
        adj = (self.entries.conj().T * w[None, :]) / w[:, None]
        return OperatorMatrix(self.grid, adj, self.picture, f"{self.label}^dag")

    def hermiticity_defect(self, depth: int = INTERIOR_DEPTH) -> float:
        """Relative Frobenius size of ``W A - (W A)^H`` on the interior block."""
        w = self.grid.lattice_flat
        wa = self.entries * w[:, None]
        s = _interior(self.grid.n, depth)
        block = wa[s, s]
        scale = np.linalg.norm(block)
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(block - block.conj().T) / scale)


def _interior(n, depth):
    return slice(depth, n - depth)


def _require_u_uniform(grid: Grid):
    if grid.spacing_mode != "uniform-in-u":
        raise UnsupportedGridError("operator requires a uniform-in-u grid")


def central_difference_u(grid: Grid) -> np.ndarray:
    """Antisymmetric second-order first derivative in ``u`` (Dirichlet)."""
    _require_u_uniform(grid)
    n, h = grid.n, grid.step
    d = np.zeros((n, n))
    i = np.arange(n - 1)
    d[i, i + 1] = 0.5 / h
    d[i + 1, i] = -0.5 / h
    return d


def central_difference_x(grid: Grid) -> np.ndarray:
    """``(g_{i+1} - g_{i-1}) / (x_{i+1} - x_{i-1})`` with mirrored ghost nodes at the ends."""
    return central_difference_x_sparse(grid).toarray()


def laplacian_u(grid: Grid) -> np.ndarray:
    """Compact three-point second derivative in ``u`` (Dirichlet)."""
    _require_u_uniform(grid)
    n, h = grid.n, grid.step
    lap = np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    return lap / h**2


def _diag(v):
    return np.diag(np.asarray(v))


def position_matrix(grid: Grid) -> OperatorMatrix:
    return OperatorMatrix(grid, _diag(grid.x_nodes).astype(complex), label="x")


def metric_matrix(grid: Grid) -> OperatorMatrix:
    """Metric ``S = f(X)^-1``; positive, bounded by 4/3."""
    return OperatorMatrix(grid, _diag(1.0 / grid.f).astype(complex), label="S")


def dyson_matrix(grid: Grid) -> OperatorMatrix:
    """Dyson map ``G = f(X)^-1/2`` with ``G^dag G = S``."""
    return OperatorMatrix(grid, _diag(1.0 / np.sqrt(grid.f)).astype(complex), label="G")


def momentum_matrix_hermitian(grid: Grid) -> OperatorMatrix:
    """Hermitian momentum ``-i hbar sqrt(f) d/dx sqrt(f)``.

    In the flat coordinate this is ``f^-1/2 (-i hbar d/du) f^1/2`` and the
    derivative is the antisymmetric central difference on the u nodes.
    """
    hbar = grid.params.hbar
    r = np.sqrt(grid.f)
    d = central_difference_u(grid)
    p = (-1j * hbar) * (d / r[:, None]) * r[None, :]
    return OperatorMatrix(grid, p, label="p")


def momentum_matrix_nonhermitian(grid: Grid) -> OperatorMatrix:
    """Deformed momentum ``f(X) (-i hbar d/dx)``; not Hermitian."""
    _require_u_uniform(grid)
    hbar = grid.params.hbar
    p = (-1j * hbar) * grid.f[:, None] * central_difference_x(grid)
    return OperatorMatrix(grid, p, label="P")


def undeformed_momentum_matrix(grid: Grid) -> OperatorMatrix:
    """Standard ``-i hbar d/dx`` by central differences on the x nodes."""
    return OperatorMatrix(grid, (-1j * grid.params.hbar) * central_difference_x(grid), label="p0")


def _real_potential(grid, potential):
    if potential is None:
        return np.zeros(grid.n)
    v = np.asarray(potential)
    if v.shape != (grid.n,):
        raise ValueError(f"potential must have {grid.n} samples, got shape {v.shape}")
    if np.iscomplexobj(v):
        if np.any(v.imag != 0.0):
            raise ValueError("potential must be real-valued")
        v = v.real
    return np.asarray(v, dtype=float)


def hamiltonian_matrix(grid: Grid, potential=None, kinetic: str = "compact") -> OperatorMatrix:
    """Hermitian Hamiltonian ``p^2/(2m) + V(x)``.

    kinetic:
        ``"compact"`` (default) uses ``-hbar^2/(2m) f^-1/2 (d^2/du^2) f^1/2`` with the
        three-point Laplacian.  ``"product"`` squares the central-difference
        momentum; its wide stencil splits the lattice into two decoupled
        sublattices, so every level appears twice.  ``"factored"`` discretizes
        ``f^1/2 p0 f p0 f^1/2 / (2m)`` with x-space differences (not Hermitian
        on the lattice; used only as a cross-check).
    """
    v = _real_potential(grid, potential)
    m, hbar = grid.params.mass, grid.params.hbar
    r = np.sqrt(grid.f)
    if kinetic == "compact":
        kin = (-(hbar**2) / (2.0 * m)) * (laplacian_u(grid) / r[:, None]) * r[None, :]
    elif kinetic == "product":
        p = momentum_matrix_hermitian(grid).entries
        kin = (p @ p) / (2.0 * m)
    elif kinetic == "factored":
        p0 = sparse.csr_matrix(undeformed_momentum_matrix(grid).entries)
        left = sparse.diags(r) @ p0 @ sparse.diags(grid.f)
        kin = (left @ p0 @ sparse.diags(r)).toarray() / (2.0 * m)
    else:
        raise ValueError(f"unknown kinetic assembly {kinetic!r}")
    h = kin.astype(complex) + np.diag(v)
    return OperatorMatrix(grid, h, label="h", potential=v)


OPERATOR_NAMES = ("position", "momentum", "hamiltonian")


def _shift(g, k):
    # g[i + k] with zeros outside the domain
    out = np.zeros_like(g)
    if k > 0:
        out[:-k] = g[k:]
    else:
        out[-k:] = g[:k]
    return out


def apply_operator(grid: Grid, name: str, samples, potential=None) -> np.ndarray:
    """Action of the position, Hermitian momentum or compact Hamiltonian stencil.

    Same result as multiplying by the dense matrix, without forming it.
    """
    g = np.asarray(samples, dtype=complex)
    if g.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {g.shape}")
    if name == "position":
        return grid.x_nodes * g
    _require_u_uniform(grid)
    hbar, m, h = grid.params.hbar, grid.params.mass, grid.step
    r = np.sqrt(grid.f)
    small = r * g
    if name == "momentum":
        return (-1j * hbar) * (_shift(small, 1) - _shift(small, -1)) / (2.0 * h) / r
    if name == "hamiltonian":
        lap = (_shift(small, 1) - 2.0 * small + _shift(small, -1)) / h**2
        return (-(hbar**2) / (2.0 * m)) * lap / r + _real_potential(grid, potential) * g
    raise ValueError(f"operator must be one of {OPERATOR_NAMES}, got {name!r}")


def symmetrized(op: OperatorMatrix) -> np.ndarray:
    """``W^1/2 A W^-1/2``: Hermitian in the Euclidean sense when ``A`` is W-Hermitian."""
    s = np.sqrt(op.grid.lattice_flat)
    return op.entries * s[:, None] / s[None, :]


def eigh_operator(op: OperatorMatrix, *, tol: float = 1e-10):
    """Eigen-decomposition of a W-Hermitian operator.

    Returns ``(energies, vectors)`` with ``vectors`` orthonormal under the
    lattice flat inner product.  Real-symmetric input uses the real solver.
    """
    a = symmetrized(op)
    scale = np.max(np.abs(a))
    herm = np.max(np.abs(a - a.conj().T))
    if herm > tol * max(scale, 1.0):
        raise ValueError(f"{op.label or 'operator'} is not Hermitian (defect {herm:.3e})")
    a = 0.5 * (a + a.conj().T)
    if np.max(np.abs(a.imag)) <= tol * max(scale, 1.0):
        e, q = linalg.eigh(a.real)
    else:
        e, q = linalg.eigh(a)
    vectors = q / np.sqrt(op.grid.lattice_flat)[:, None]
    return e, vectors


def spectral_function_of(op: OperatorMatrix, func, label="") -> OperatorMatrix:
    """``func(A)`` for a W-Hermitian ``A`` via its eigen-decomposition."""
    e, q = _sym_eig(op)
    s = np.sqrt(op.grid.lattice_flat)
    m = (q * func(e)[None, :]) @ q.conj().T
    return OperatorMatrix(op.grid, m / s[:, None] * s[None, :], op.picture, label)


def _sym_eig(op):
    a = symmetrized(op)
    a = 0.5 * (a + a.conj().T)
    if np.max(np.abs(a.imag)) == 0.0:
        return linalg.eigh(a.real)
    return linalg.eigh(a)


def evolution_matrix(h: OperatorMatrix, delta_t: float) -> OperatorMatrix:
    """Real-time evolution ``exp(-i h dt / hbar)``."""
    hbar = h.grid.params.hbar
    return spectral_function_of(h, lambda e: np.exp(-1j * e * delta_t / hbar), "U")


# -- residuals -----------------------------------------------------------------

@dataclass
class ResidualReport:
    label: str
    relation: str
    residual: float
    tolerance: float
    passed: bool = field(init=False)
    expected_divergence: bool = False

    def __post_init__(self):
        self.residual = float(abs(self.residual))
        self.tolerance = float(self.tolerance)
        self.passed = bool(self.residual <= self.tolerance)

    def to_record(self) -> dict:
        rec = {"label": self.label, "relation": self.relation, "residual": self.residual,
               "tolerance": self.tolerance, "pass": self.passed}
        if self.expected_divergence:
            rec["expected_divergence"] = True
        return rec


def reports_to_json(reports) -> str:
    return json.dumps([r.to_record() for r in reports], indent=2)


def probe_states(grid: Grid) -> np.ndarray:
    """Smooth capital-Phi test vectors (rows), localized away from the ends."""
    p = grid.params
    u = grid.u_nodes
    length = p.u_length
    centres = p.u_min + length * np.array([0.3, 0.5, 0.7])
    width = length / 24.0
    k = 2.0 * np.pi / length
    rows = []
    for c in centres:
        env = np.exp(-0.5 * ((u - c) / width) ** 2)
        rows.append(env)
        rows.append(env * np.exp(3j * k * u))
    rows.append(np.sin(np.pi * (u - p.u_min) / length) ** 4)
    return np.array(rows, dtype=complex) / np.sqrt(grid.f)[None, :]


def _as_matrix(a):
    if isinstance(a, OperatorMatrix):
        return a.entries
    return a if sparse.issparse(a) else np.asarray(a)


def action_residual(a, b, grid: Grid, depth: int = INTERIOR_DEPTH, probes=None) -> float:
    """``max_k |(A - B) v_k| / |A v_k|`` over probe states, on interior nodes."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    probes = probe_states(grid) if probes is None else probes
    s = _interior(grid.n, depth)
    w = grid.lattice_flat[s]
    worst = 0.0
    for v in probes:
        av = (a @ v)[s]
        dv = av - (b @ v)[s]
        den = np.sqrt(np.sum(w * np.abs(av) ** 2))
        num = np.sqrt(np.sum(w * np.abs(dv) ** 2))
        if den == 0.0:
            worst = max(worst, 0.0 if num == 0.0 else np.inf)
        else:
            worst = max(worst, num / den)
    return float(worst)


def lumped_diagonal(a, grid: Grid) -> np.ndarray:
    """Row sums of ``f^1/2 A f^-1/2``: the multiplier an operator applies to slowly varying small-phi states."""
    a = a.entries if isinstance(a, OperatorMatrix) else np.asarray(a)
    r = np.sqrt(grid.f)
    return (r[:, None] * a / r[None, :]).sum(axis=1)


def _is_diagonal(m):
    return np.count_nonzero(m - np.diag(np.diagonal(m))) == 0


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    ea, eb = a.entries, b.entries
    if _is_diagonal(ea):
        d = np.diagonal(ea)
        c = d[:, None] * eb - eb * d[None, :]
    elif _is_diagonal(eb):
        d = np.diagonal(eb)
        c = ea * d[None, :] - d[:, None] * ea
    else:
        c = ea @ eb - eb @ ea
    return OperatorMatrix(a.grid, c, a.picture, f"[{a.label},{b.label}]")


def commutator_defect(grid: Grid, depth: int = INTERIOR_DEPTH) -> float:
    """Max relative interior error of the lumped diagonal of ``[x,p]/(i hbar)`` against ``f``."""
    x = position_matrix(grid)
    p = momentum_matrix_hermitian(grid)
    c = commutator(x, p).entries / (1j * grid.params.hbar)
    diag = lumped_diagonal(c, grid)
    s = _interior(grid.n, depth)
    return float(np.max(np.abs(diag[s] - grid.f[s]) / grid.f[s]))


DEFAULT_TOLERANCES = {
    "pseudo_hermiticity": 1e-3,
    "dyson_similarity_p": 1e-3,
    "dyson_similarity_x": 0.0,
    "deformed_commutator": 1e-3,
    "metric_hermiticity_P": 1e-3,
    "unitarity": 1e-10,
    "hermiticity_p": 1e-10,
    "hermiticity_h": 1e-10,
    "metric_factorization": 1e-15,
    "kinetic_assemblies": 1e-3,
    "adjoint_defect_closed_form": 0.05,
}


def _sparse_stencils(grid: Grid):
    """Tridiagonal CSR versions of P, p, h (V = 0) and the factored kinetic term."""
    hbar, m = grid.params.hbar, grid.params.mass
    n, h = grid.n, grid.step
    r = np.sqrt(grid.f)
    ones = np.ones(n - 1)
    du = sparse.diags([-ones, ones], [-1, 1], format="csr") * (0.5 / h)
    lap = sparse.diags([ones, np.full(n, -2.0), ones], [-1, 0, 1], format="csr") / h**2
    dx = sparse.csr_matrix(central_difference_x_sparse(grid))
    R, Ri, F = sparse.diags(r), sparse.diags(1.0 / r), sparse.diags(grid.f)
    P = (-1j * hbar) * (F @ dx)
    p = (-1j * hbar) * (Ri @ du @ R)
    kin = (-(hbar**2) / (2.0 * m)) * (Ri @ lap @ R)
    p0 = (-1j * hbar) * dx
    factored = (R @ p0 @ F @ p0 @ R) / (2.0 * m)
    return P.tocsr(), p.tocsr(), kin.tocsr(), factored.tocsr()


def central_difference_x_sparse(grid: Grid):
    x = grid.x_nodes
    n = grid.n
    span = np.empty(n)
    span[1:-1] = x[2:] - x[:-2]
    span[0] = 2.0 * (x[1] - x[0])
    span[-1] = 2.0 * (x[-1] - x[-2])
    i = np.arange(n - 1)
    return sparse.coo_matrix((np.concatenate([1.0 / span[i], -1.0 / span[i + 1]]),
                              (np.concatenate([i, i + 1]), np.concatenate([i + 1, i]))), shape=(n, n))


def _w_adjoint(a, w):
    """``W^-1 A^H W`` for a sparse ``A``."""
    return (sparse.diags(1.0 / w) @ a.conj().T @ sparse.diags(w)).tocsr()


def _hermiticity_defect_sparse(a, w, depth):
    wa = (sparse.diags(w) @ a).tocsr()
    s = _interior(a.shape[0], depth)
    block = wa[s, s]
    scale = sparse.linalg.norm(block)
    return 0.0 if scale == 0.0 else float(sparse.linalg.norm(block - block.conj().T) / scale)


def _unitarity_defect(h_entries, grid, delta_t, k=16, seed=0):
    """``|U^dag U v - v|`` over a seeded block of vectors, ``U = exp(-i h dt / hbar)``."""
    s = np.sqrt(grid.lattice_flat)
    a = h_entries * s[:, None] / s[None, :]
    a = 0.5 * (a + a.conj().T)
    if np.max(np.abs(a.imag)) == 0.0:
        e, q = linalg.eigh(a.real, overwrite_a=True)
    else:
        e, q = linalg.eigh(a, overwrite_a=True)
    del a
    phase = np.exp(-1j * e * delta_t / grid.params.hbar)
    v = np.random.default_rng(seed).standard_normal((grid.n, k))
    uv = q @ (phase[:, None] * (q.conj().T @ v))
    back = q @ (phase.conj()[:, None] * (q.conj().T @ uv))
    return float(np.linalg.norm(back - v) / np.linalg.norm(v))


def verify_relations(grid: Grid, *, depth: int = INTERIOR_DEPTH, delta_t: float = 1.0,
                     potential=None, tolerances=None) -> list[ResidualReport]:
    """Residuals of the similarity chain and the deformed algebra on ``grid``.

    Labels: (a) ``pseudo_hermiticity`` S P S^-1 = P^dag; (b) ``dyson_similarity_p``
    G P G^-1 = p; (c) ``dyson_similarity_x`` G X G^-1 = x; (d)
    ``deformed_commutator`` [x, p] = i hbar f; (e) ``metric_hermiticity_P``;
    (f) ``unitarity`` of exp(-i h dt/hbar); plus Hermiticity and assembly
    cross-checks.  The stencils are tridiagonal, so the checks run on sparse
    copies of the same matrices the dense builders return.
    """
    _require_u_uniform(grid)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    unknown = set(tolerances or {}) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ValueError(f"unknown tolerance labels {sorted(unknown)}")
    hbar, tau = grid.params.hbar, grid.params.tau
    n = grid.n
    s_int = _interior(n, depth)
    x = grid.x_nodes
    sdiag = 1.0 / grid.f
    g = 1.0 / np.sqrt(grid.f)
    v = _real_potential(grid, potential)
    P, p, kin, factored = _sparse_stencils(grid)
    wf = grid.lattice_flat

    def ratio(d):
        # D A D^-1 written as A * (d_i / d_j) so that d_i / d_i == 1 exactly
        c = P.tocoo()
        return sparse.csr_matrix((c.data * (d[c.row] / d[c.col]), (c.row, c.col)), shape=P.shape)

    out = []
    out.append(ResidualReport("pseudo_hermiticity", "S P S^-1 = P^dag",
                              action_residual(ratio(sdiag), _w_adjoint(P, wf), grid, depth),
                              tol["pseudo_hermiticity"]))
    out.append(ResidualReport("dyson_similarity_p", "G P G^-1 = p",
                              action_residual(ratio(g), p, grid, depth), tol["dyson_similarity_p"]))
    gxg = x[s_int] * (g[s_int] / g[s_int])
    out.append(ResidualReport("dyson_similarity_x", "G X G^-1 = x",
                              np.linalg.norm(gxg - x[s_int]) / np.linalg.norm(x[s_int]),
                              tol["dyson_similarity_x"]))
    X = sparse.diags(x)
    comm = (X @ p - p @ X) / (1j * hbar)
    lumped = np.asarray((sparse.diags(np.sqrt(grid.f)) @ comm @ sparse.diags(g)).sum(axis=1)).ravel()
    out.append(ResidualReport("deformed_commutator", "[x, p] = i hbar f(x)",
                              np.max(np.abs(lumped[s_int] - grid.f[s_int]) / grid.f[s_int]),
                              tol["deformed_commutator"]))
    out.append(ResidualReport("metric_hermiticity_P", "<a|P b>_S = <P a|b>_S",
                              action_residual(P, _w_adjoint(P, grid.lattice_deformed), grid, depth),
                              tol["metric_hermiticity_P"]))
    h = (kin + sparse.diags(v)).tocsr()
    out.append(ResidualReport("unitarity", "U^dag U = I",
                              _unitarity_defect(h.toarray(), grid, delta_t), tol["unitarity"]))
    out.append(ResidualReport("hermiticity_p", "p = p^dag", _hermiticity_defect_sparse(p, wf, depth),
                              tol["hermiticity_p"]))
    out.append(ResidualReport("hermiticity_h", "h = h^dag", _hermiticity_defect_sparse(h, wf, depth),
                              tol["hermiticity_h"]))
    out.append(ResidualReport("metric_factorization", "G^dag G = S",
                              np.max(np.abs(g * g - sdiag) / sdiag), tol["metric_factorization"]))
    out.append(ResidualReport("kinetic_assemblies", "p^2/2m = f^1/2 p0 f p0 f^1/2 / 2m",
                              action_residual(h, factored + sparse.diags(v), grid, depth),
                              tol["kinetic_assemblies"]))
    closed = sparse.diags(1j * hbar * tau * (1.0 - 2.0 * tau * x))
    out.append(ResidualReport("adjoint_defect_closed_form", "P^dag - P = i hbar tau (1 - 2 tau x)",
                              action_residual(closed, _w_adjoint(P, wf) - P, grid, depth),
                              tol["adjoint_defect_closed_form"]))
    return out
