"""Quantum mechanics on the position-deformed algebra ``[x, p] = i hbar (1 - tau x + tau^2 x^2)``."""
from .deformation import (
    DeformationParams, DomainBounds, DomainError, deformation_factor, deformation_factor_prime,
    make_params, u_of_x, x_of_u,
)
from .grid import Grid, WaveFunction, inner_product, inner_product_metric, integrate_deformed, integrate_flat, make_grid
from .operators import (
    OperatorMatrix, ResidualReport, dyson_matrix, hamiltonian_matrix, metric_matrix,
    momentum_matrix_hermitian, momentum_matrix_nonhermitian, position_matrix, verify_relations,
)
from .transform import (
    MomentumSample, SpectralFunction, apply_operator_spectral, eigenfunction, forward_transform,
    inverse_transform, momentum_lattice, normalization_constant, overlap_closed, overlap_quadrature,
)
from .propagators import (
    ActionValue, Kernel, bound_scan, free_action, free_kinetic, free_propagator_closed, ft_propagator,
    spectral_propagator, standard_baseline, timeslice_propagator,
)
from .classical import PhaseState, Trajectory, action_along_path, energy_drift, hamilton_rhs, integrate_trajectory

__version__ = "0.1.0"
