"""Momentum eigenstates are not orthogonal on the finite flat interval.

Prints the overlap modulus next to the real-sinc reference, then checks
Parseval and the round trip for a wave packet.
"""
import numpy as np

from posdeform import forward_transform, inverse_transform, make_grid, make_params, overlap_closed, overlap_quadrature
from posdeform.grid import WaveFunction
from posdeform.transform import lattice_step, overlap_modulus_reference, parseval_ratio, xi_window

p = make_params(0.1)
g = make_grid(p, 2049)
step = lattice_step(p)

print("n   |overlap| quad   closed        real-sinc reference")
for n in range(0, 7):
    d = n * step
    print(f"{n:<3d} {abs(overlap_quadrature(g, d, 0.0)):.3e}   {abs(overlap_closed(p, d, 0.0)):.3e}"
          f"     {overlap_modulus_reference(p, d, 0.0):+.3e}")
# even n are zeros of the exact overlap; the reference vanishes at every n

u = g.u_nodes
centre = 0.5 * (p.u_min + p.u_max)
psi = WaveFunction(g, np.exp(-0.5 * (u - centre) ** 2 + 2j * u) / np.sqrt(g.f))
spec = forward_transform(g, psi, xi_window(g))
back = inverse_transform(p, spec, g)
print(f"\nParseval ratio {spec.norm_squared() / psi.norm() ** 2:.12f}  expected {parseval_ratio(p):.12f}")
print(f"round trip error {np.max(np.abs(back.samples - psi.samples)):.2e}, tail {spec.tail_bound():.1e}")
