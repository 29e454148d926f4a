"""Deformation parameter, deformation factor and the flat coordinate.

The algebra ``[x, p] = i hbar f(x)`` with ``f(x) = 1 - tau x + tau^2 x^2`` is
flattened by the coordinate ``u(x) = int_0^x dy / f(y)``, which maps the
position domain ``[-1/tau, 1/tau]`` onto a finite interval.  Most closed forms
in the package are plane waves or Gaussians in ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT3 = np.sqrt(3.0)


class DomainError(ValueError):
    """A position or flat coordinate lies outside the deformed domain."""


@dataclass(frozen=True)
class DomainBounds:
    ell_max: float
    delta_p_min: float
    u_min: float
    u_max: float

    @property
    def u_length(self) -> float:
        return self.u_max - self.u_min


@dataclass(frozen=True)
class DeformationParams:
    """Physical constants of the deformed algebra.

    Parameters
    ----------
    tau : float
        Dimensionless deformation strength, ``0 < tau < 1``.
    hbar : float
        Reduced Planck constant (action units), positive.
    mass : float
        Particle mass, positive.
    """

    tau: float
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("tau", "hbar", "mass"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in the open interval (0, 1), got {self.tau!r}")
        if self.hbar <= 0.0:
            raise ValueError(f"hbar must be positive, got {self.hbar!r}")
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass!r}")

    @property
    def ell_max(self) -> float:
        """Maximal length ``1/tau``; also the half-width of the domain."""
        return 1.0 / self.tau

    @property
    def delta_p_min(self) -> float:
        return self.hbar * self.tau

    @property
    def u_min(self) -> float:
        return -np.pi / (3.0 * SQRT3 * self.tau)

    @property
    def u_max(self) -> float:
        return 2.0 * np.pi / (3.0 * SQRT3 * self.tau)

    @property
    def u_length(self) -> float:
        """``u_max - u_min = pi / (tau sqrt 3)``, the deformed volume of the domain."""
        return np.pi / (SQRT3 * self.tau)

    def bounds(self) -> DomainBounds:
        return DomainBounds(self.ell_max, self.delta_p_min, self.u_min, self.u_max)


def make_params(tau: float, hbar: float = 1.0, mass: float = 1.0) -> DeformationParams:
    return DeformationParams(float(tau), float(hbar), float(mass))


def deformation_factor(params: DeformationParams, x):
    """``f(x) = 1 - tau x + tau^2 x^2``; bounded below by 3/4 at ``x = 1/(2 tau)``."""
    x = np.asarray(x, dtype=float)
    t = params.tau
    # Horner form: 1 + tau x (tau x - 1)
    tx = t * x
    return 1.0 + tx * (tx - 1.0)


def deformation_factor_prime(params: DeformationParams, x):
    """Derivative ``f'(x) = -tau + 2 tau^2 x``."""
    x = np.asarray(x, dtype=float)
    return params.tau * (2.0 * params.tau * x - 1.0)


def u_of_x(params: DeformationParams, x):
    """Flat coordinate ``u(x) = (2/(tau sqrt3)) [arctan((2 tau x - 1)/sqrt3) + pi/6]``.

    Strictly increasing with ``du/dx = 1/f(x)`` and ``u(0) = 0``.  Defined on
    the whole real line.
    """
    # arctan difference identity: exact zero at x = 0 and no cancellation nearby
    tx = params.tau * np.asarray(x, dtype=float)
    return (2.0 / (params.tau * SQRT3)) * np.arctan2(SQRT3 * tx, 2.0 - tx)


def x_of_u(params: DeformationParams, u, *, rtol: float = 1e-12):
    """Inverse of :func:`u_of_x` on ``[u_min, u_max]`` by closed-form tangent inversion."""
    u = np.asarray(u, dtype=float)
    lo, hi = params.u_min, params.u_max
    slack = rtol * (hi - lo)
    if np.any(u < lo - slack) or np.any(u > hi + slack) or not np.all(np.isfinite(u)):
        raise DomainError(f"flat coordinate outside [{lo:.17g}, {hi:.17g}]")
    t = np.tan(np.clip(0.5 * params.tau * SQRT3 * u, -np.pi / 6.0, np.pi / 3.0))
    return 2.0 * t / (params.tau * (SQRT3 + t))


def check_in_domain(params: DeformationParams, x, *, rtol: float = 1e-12):
    x = np.asarray(x, dtype=float)
    lim = params.ell_max * (1.0 + rtol)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > lim):
        raise DomainError(f"position outside [-{params.ell_max:.17g}, {params.ell_max:.17g}]")
    return x
