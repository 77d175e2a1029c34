"""
Second order and the Dyson series
=================================

With prices switching from 1 to 0 a state two exchanges away becomes
reachable.  First order misses it; second order does not.
"""
import numpy as np

from qmarket import (
    BasisState,
    MarketConfig,
    PriceTrajectory,
    SectorKey,
    StateVector,
    c2_piecewise_M3,
    dyson_coefficients,
    enumerate_sector,
    p1_transition,
)
from qmarket.exact import Propagator

coupling = np.zeros((2, 2, 1))
coupling[0, 1, 0] = coupling[1, 0, 0] = 0.1
cfg = MarketConfig([[1.0], [2.0]], [0.3, 0.5], coupling, 0.01)
basis = enumerate_sector(cfg, SectorKey((1,), 2))
F0 = BasisState([[0], [1]], [2, 0])
G = BasisState([[0], [1]], [1, 1])

traj = PriceTrajectory(1.0, [[1], [0]])
d = dyson_coefficients(cfg, basis, traj, F0, 2, 2.0)
print("P1(F0 -> G) =", p1_transition(cfg, basis, traj, F0, G, 2.0))
print("c2(F0 -> G) =", d.coeffs[2][basis.index_of(G)])

# %%
# Three price intervals have a closed form for the second-order coefficient.
traj3 = PriceTrajectory(0.7, [[1], [0], [2]])
d3 = dyson_coefficients(cfg, basis, traj3, F0, 2, traj3.horizon)
for i, s in enumerate(basis):
    print(f"  {s}: closed form {c2_piecewise_M3(cfg, basis, traj3, F0, s):+.6f}  Dyson {d3.coeffs[2][i]:+.6f}")

# %%
# Partial sums of the series converge to the exact amplitudes, even at a
# coupling large enough that first order is useless.
strong = cfg.with_lambda(0.5)
exact = Propagator(strong, basis, traj3, StateVector.basis_vector(basis, F0)).amplitudes(traj3.horizon)
d = dyson_coefficients(strong, basis, traj3, F0, 8, traj3.horizon)
for n in range(9):
    print(f"  order {n}: max amplitude error {np.max(np.abs(d.amplitudes(n) - exact)):.2e}")
