"""Discretization of the deformed domain, quadrature and the two inner products.

A :class:`Grid` carries position nodes ``x`` together with their flat
coordinates ``u = u(x)``.  Two families of weights live on it:

* quadrature weights (``w_flat`` for ``int dx`` and ``w_deformed`` for
  ``int dx/f``), a trapezoid rule with Gregory end corrections in the grid's
  uniform coordinate;
* lattice weights (``lattice_flat``, ``lattice_deformed``), the plain node
  spacing, which define the discrete inner product under which the
  finite-difference operators are exactly Hermitian.

For integrands vanishing near the domain ends the two agree to spectral
accuracy.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Literal

import numpy as np

from .deformation import DeformationParams, deformation_factor, u_of_x, x_of_u

SpacingMode = Literal["uniform-in-u", "uniform-in-x"]
Picture = Literal["capital-Phi", "small-phi"]

PICTURES = ("capital-Phi", "small-phi")
SPACING_MODES = ("uniform-in-u", "uniform-in-x")
MIN_NODES = 16
DEFAULT_NODES = 2049

# Gregory coefficients 1/12, 1/24, 19/720, 3/160, 863/60480
_GREGORY = (Fraction(1, 12), Fraction(1, 24), Fraction(19, 720), Fraction(3, 160), Fraction(863, 60480))


def gregory_end_corrections(order: int = 5) -> np.ndarray:
    """Additive corrections to the first trapezoid weights (in units of the step).

    With ``order`` differences the rule is exact for polynomials of degree
    ``order`` and all resulting weights stay positive for ``order <= 5``.
    """
    d = [Fraction(0)] * (order + 1)
    for k in range(1, order + 1):
        sign = (-1) ** (k + 1)
        for j in range(k + 1):
            d[j] += sign * _GREGORY[k - 1] * (-1) ** (k - j) * comb(k, j)
    return np.array([float(v) for v in d])


def composite_weights(n: int, step: float, order: int = 5) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    corr = gregory_end_corrections(order)
    w[: corr.size] += corr
    w[n - corr.size :] += corr[::-1]
    return w * step


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes and weights on ``[-ell_max, +ell_max]``."""

    params: DeformationParams
    n: int
    spacing_mode: str
    x_nodes: np.ndarray = field(repr=False)
    u_nodes: np.ndarray = field(repr=False)
    w_flat: np.ndarray = field(repr=False)
    w_deformed: np.ndarray = field(repr=False)
    step: float

    @property
    def f(self) -> np.ndarray:
        return deformation_factor(self.params, self.x_nodes)

    @property
    def lattice_deformed(self) -> np.ndarray:
        """Node spacing measured in ``u`` (the lattice version of ``dx/f``)."""
        if self.spacing_mode == "uniform-in-u":
            return np.full(self.n, self.step)
        return self.step / self.f

    @property
    def lattice_flat(self) -> np.ndarray:
        """Node spacing measured in ``x`` (the lattice version of ``dx``)."""
        if self.spacing_mode == "uniform-in-u":
            return self.step * self.f
        return np.full(self.n, self.step)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.params == other.params
            and self.n == other.n
            and self.spacing_mode == other.spacing_mode
        )

    def refined(self) -> "Grid":
        """Grid with the step halved (``2n - 1`` nodes)."""
        return make_grid(self.params, 2 * self.n - 1, self.spacing_mode)


def make_grid(params: DeformationParams, n: int = DEFAULT_NODES,
              spacing_mode: str = "uniform-in-u") -> Grid:
    if int(n) != n or n < MIN_NODES:
        raise ValueError(f"n must be an integer >= {MIN_NODES}, got {n!r}")
    n = int(n)
    if spacing_mode == "uniform-in-u":
        u = np.linspace(params.u_min, params.u_max, n)
        step = (params.u_max - params.u_min) / (n - 1)
        x = x_of_u(params, u)
        x[0], x[-1] = -params.ell_max, params.ell_max
        w_def = composite_weights(n, step)
        w_flat = w_def * deformation_factor(params, x)
    elif spacing_mode == "uniform-in-x":
        x = np.linspace(-params.ell_max, params.ell_max, n)
        step = 2.0 * params.ell_max / (n - 1)
        u = u_of_x(params, x)
        w_flat = composite_weights(n, step)
        w_def = w_flat / deformation_factor(params, x)
    else:
        raise ValueError(f"spacing_mode must be one of {SPACING_MODES}, got {spacing_mode!r}")
    for a in (x, u, w_flat, w_def):
        a.setflags(write=False)
    return Grid(params, n, spacing_mode, x, u, w_flat, w_def, step)


def _check_samples(grid: Grid, g) -> np.ndarray:
    g = np.asarray(g)
    if g.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {g.shape}")
    return g


def integrate_flat(grid: Grid, g):
    """``int dx g(x)`` over the domain."""
    g = _check_samples(grid, g)
    return np.sum(grid.w_flat * g)


def integrate_deformed(grid: Grid, g):
    """``int dx g(x)/f(x)`` over the domain (flat integral in ``u``)."""
    g = _check_samples(grid, g)
    return np.sum(grid.w_deformed * g)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex samples on a grid, tagged with their picture.

    ``capital-Phi`` samples are normalized with ``dx``; ``small-phi`` samples
    ``phi = sqrt(f) Phi`` are normalized with ``dx/f``.
    """

    grid: Grid
    samples: np.ndarray
    picture: str = "capital-Phi"

    def __post_init__(self):
        if self.picture not in PICTURES:
            raise ValueError(f"picture must be one of {PICTURES}, got {self.picture!r}")
        samples = np.array(self.samples, dtype=complex)
        if samples.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def to_picture(self, picture: str) -> "WaveFunction":
        if picture == self.picture:
            return self
        if picture not in PICTURES:
            raise ValueError(f"picture must be one of {PICTURES}, got {picture!r}")
        root_f = np.sqrt(self.grid.f)
        if picture == "small-phi":
            return WaveFunction(self.grid, self.samples * root_f, picture)
        return WaveFunction(self.grid, self.samples / root_f, picture)

    def capital(self) -> "WaveFunction":
        return self.to_picture("capital-Phi")

    def small(self) -> "WaveFunction":
        return self.to_picture("small-phi")

    def norm(self) -> float:
        if self.picture == "capital-Phi":
            return float(np.sqrt(inner_product(self.grid, self, self).real))
        return float(np.sqrt(inner_product_metric(self.grid, self, self).real))

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.samples / self.norm(), self.picture)


def _check_pair(grid, a, b, picture):
    for w in (a, b):
        if not w.grid.same_as(grid):
            raise ValueError("wavefunction lives on a different grid")
        if w.picture != picture:
            raise ValueError(f"expected {picture} picture, got {w.picture}")


def inner_product(grid: Grid, a: WaveFunction, b: WaveFunction) -> complex:
    """Standard inner product ``int dx a* b`` of two capital-Phi wavefunctions."""
    _check_pair(grid, a, b, "capital-Phi")
    return complex(integrate_flat(grid, np.conj(a.samples) * b.samples))


def inner_product_metric(grid: Grid, a: WaveFunction, b: WaveFunction) -> complex:
    """Metric inner product ``int dx a* b / f`` of two small-phi wavefunctions."""
    _check_pair(grid, a, b, "small-phi")
    return complex(integrate_deformed(grid, np.conj(a.samples) * b.samples))


# -- CSV ---------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_wavefunction_csv(path, psi: WaveFunction) -> None:
    g = psi.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u", "re", "im", "picture"])
        for x, u, s in zip(g.x_nodes, g.u_nodes, psi.samples):
            w.writerow([_fmt(x), _fmt(u), _fmt(s.real), _fmt(s.imag), psi.picture])


def read_wavefunction_csv(path, grid: Grid) -> WaveFunction:
    """Read samples written by :func:`write_wavefunction_csv` onto ``grid``.

    The node columns must match the grid to 1e-9 relative to ``ell_max``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no samples")
    missing = {"x", "re", "im", "picture"} - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    pictures = {r["picture"] for r in rows}
    if len(pictures) != 1:
        raise ValueError(f"{path}: mixed pictures {sorted(pictures)}")
    x = np.array([float(r["x"]) for r in rows])
    if x.shape != (grid.n,) or np.max(np.abs(x - grid.x_nodes)) > 1e-9 * grid.params.ell_max:
        raise ValueError(f"{path}: nodes do not match the grid (n={grid.n})")
    samples = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return WaveFunction(grid, samples, pictures.pop())
