"""
First-order transition probability against exact evolution
==========================================================

The buyer (trader 0) takes the share from trader 1 at price 1.  Exact
propagation and first-order perturbation theory are compared as the
coupling shrinks.
"""
import numpy as np

from qmarket import (
    BasisState,
    MarketConfig,
    PriceTrajectory,
    SectorKey,
    enumerate_sector,
    exact_transition_probability,
    golden_rule_rate,
    p1_transition,
)

coupling = np.zeros((2, 2, 1))
coupling[0, 1, 0] = coupling[1, 0, 0] = 0.1
cfg = MarketConfig([[1.0], [2.0]], [0.3, 0.5], coupling, 0.01)
basis = enumerate_sector(cfg, SectorKey((1,), 2))

F0 = BasisState([[0], [1]], [2, 0])
Ff = BasisState([[1], [0]], [1, 1])
traj = PriceTrajectory(1.0, [[1]] * 4)

print(" lambda      exact        first order   rel. error")
for lam in (1e-1, 5e-2, 1e-2, 5e-3, 2.5e-3):
    c = cfg.with_lambda(lam)
    ex = exact_transition_probability(c, basis, traj, F0, Ff, 2.0)
    p1 = p1_transition(c, basis, traj, F0, Ff, 2.0)
    print(f"{lam:8.4f}  {ex:.6e}  {p1:.6e}  {abs(p1 - ex) / ex:.3e}")

# %%
# The sector splits into 2x2 blocks, so the exact probability is even in the
# coupling and the relative error above drops fourfold per halving of lambda.

# %%
# Off resonance the probability oscillates below 4 lam^2 |h|^2 / dE^2 ...
g = golden_rule_rate(cfg, basis, F0, Ff, [1])
print(f"dE = {g.delta_e:.2f}, |h| = {abs(g.h):.4f}, bound = {g.bound:.3e}")
for t in np.linspace(0.5, 4, 8):
    print(f"  t = {t:4.2f}  P1 = {p1_transition(cfg, basis, traj, F0, Ff, t):.3e}")

# %%
# ... while tuning the buyer's cash frequency to 1.3 makes the pair degenerate
# and the probability grows as t^2.
res = MarketConfig([[1.0], [2.0]], [0.3, 1.3], coupling, 0.01)
rb = enumerate_sector(res, SectorKey((1,), 2))
for t in (1.0, 2.0, 4.0):
    print(f"  resonant t = {t}: P1 / t^2 = {p1_transition(res, rb, traj, F0, Ff, t) / t**2:.6e}")
print("golden-rule rate:", golden_rule_rate(res, rb, F0, Ff, [1]).rate)
