"""Classical motion under the deformed Poisson bracket ``{x, xi} = f(x)``.

For ``h = xi^2 / (2m) + V(x)`` Hamilton's equations read

    dx/dt  =  f(x) xi / m
    dxi/dt = -f(x) V'(x)

In the flat coordinate ``u`` the free motion is uniform: ``du/dt = xi / m``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .deformation import DeformationParams, check_in_domain, deformation_factor, u_of_x


@dataclass(frozen=True)
class Potential:
    value: Callable
    gradient: Callable
    label: str = "V"


def free_potential() -> Potential:
    return Potential(lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                     lambda x: np.zeros_like(np.asarray(x, dtype=float)), "free")


def harmonic_potential(k: float = 1.0, centre: float = 0.0) -> Potential:
    return Potential(lambda x: 0.5 * k * (np.asarray(x) - centre) ** 2,
                     lambda x: k * (np.asarray(x) - centre), f"harmonic(k={k!r})")


@dataclass(frozen=True)
class PhaseState:
    x: float
    xi: float
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    dt: float
    hamiltonian_label: str
    event: str | None = None

    @property
    def states(self) -> list[PhaseState]:
        return [PhaseState(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.xi, self.t)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(float(self.x[-1]), float(self.xi[-1]), float(self.t[-1]))


def hamilton_rhs(params: DeformationParams, state: PhaseState, potential_gradient) -> tuple[float, float]:
    check_in_domain(params, state.x)
    return _rhs(params, state.x, state.xi, potential_gradient)


def _rhs(params, x, xi, grad):
    f = deformation_factor(params, x)
    return f * xi / params.mass, -f * grad(x)


def integrate_trajectory(params: DeformationParams, potential: Potential, state0: PhaseState,
                         t_end: float, dt: float) -> Trajectory:
    """Classic fourth-order Runge-Kutta with fixed step.

    ``t_end - state0.t`` must be a whole number of steps (to 1e-9 relative).
    If a step would leave ``[-ell_max, ell_max]`` the trajectory stops at
    the last interior state with ``event="boundary"``.
    """
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    check_in_domain(params, state0.x)
    span = t_end - state0.t
    steps = int(round(span / dt))
    if steps < 0 or abs(steps * dt - span) > 1e-9 * max(abs(span), dt):
        raise ValueError("t_end - t0 must be a non-negative whole number of steps")
    grad = potential.gradient
    ell = params.ell_max
    xs = np.empty(steps + 1)
    ps = np.empty(steps + 1)
    xs[0], ps[0] = state0.x, state0.xi
    x, p = float(state0.x), float(state0.xi)
    event = None
    done = steps
    for k in range(steps):
        k1x, k1p = _rhs(params, x, p, grad)
        k2x, k2p = _rhs(params, x + 0.5 * dt * k1x, p + 0.5 * dt * k1p, grad)
        k3x, k3p = _rhs(params, x + 0.5 * dt * k2x, p + 0.5 * dt * k2p, grad)
        k4x, k4p = _rhs(params, x + dt * k3x, p + dt * k3p, grad)
        xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        pn = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if abs(xn) >= ell:
            event = "boundary"
            done = k
            break
        x, p = float(xn), float(pn)
        xs[k + 1], ps[k + 1] = x, p
    t = state0.t + dt * np.arange(done + 1)
    return Trajectory(t, xs[: done + 1].copy(), ps[: done + 1].copy(), float(dt), potential.label, event)


def hamiltonian_value(params: DeformationParams, potential: Potential, x, xi):
    return np.asarray(xi) ** 2 / (2.0 * params.mass) + potential.value(x)


def action_along_path(params: DeformationParams, trajectory: Trajectory, potential: Potential) -> float:
    """``S = int dt [x' xi / f - h]`` with ``x'`` from second-order differences and trapezoid in ``t``.

    The velocity is taken from the sampled path, so perturbed (off-shell)
    paths can be compared with the classical one.
    """
    n = trajectory.t.size
    if n < 2:
        return 0.0
    x, xi = trajectory.x, trajectory.xi
    xdot = np.gradient(x, trajectory.t, edge_order=2) if n > 2 else np.full(2, (x[1] - x[0]) / trajectory.dt)
    integrand = xdot * xi / deformation_factor(params, x) - hamiltonian_value(params, potential, x, xi)
    return float(np.trapezoid(integrand, trajectory.t))


def energy_drift(trajectory: Trajectory, params: DeformationParams, potential: Potential) -> float:
    """``max |h(t) - h(0)| / |h(0)|`` (absolute when ``h(0) = 0``)."""
    h = hamiltonian_value(params, potential, trajectory.x, trajectory.xi)
    scale = abs(h[0]) if h[0] != 0 else 1.0
    return float(np.max(np.abs(h - h[0])) / scale)


def flat_coordinate(params: DeformationParams, trajectory: Trajectory) -> np.ndarray:
    return u_of_x(params, trajectory.x)


def time_reversed(state: PhaseState) -> PhaseState:
    """Same point with the momentum flipped; integrating it retraces the path."""
    return PhaseState(state.x, -state.xi, state.t)


def poisson_bracket_xi(params: DeformationParams, x):
    """``{x, xi}_tau = f(x)``."""
    return deformation_factor(params, x)


def write_trajectory_csv(path, trajectory: Trajectory, params: DeformationParams, potential: Potential) -> None:
    u = u_of_x(params, trajectory.x)
    h = hamiltonian_value(params, potential, trajectory.x, trajectory.xi)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "xi", "u", "h"])
        for row in zip(trajectory.t, trajectory.x, trajectory.xi, u, h):
            w.writerow([repr(float(v)) for v in row])

