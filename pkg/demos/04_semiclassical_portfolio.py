"""
Semiclassical holdings and portfolios
=====================================

Three traders, two share types, prices that jump twice.  The second-order
shifts of holdings come from pair weights and oscillatory integrals; the
sum rule says a trader's wealth moves only through price changes.
"""
import numpy as np

from qmarket import (
    BasisState,
    MarketConfig,
    PriceTrajectory,
    delta_occupations,
    portfolio_evolution,
    sum_rule_residual,
)

p = np.zeros((3, 3, 2))
for (j, l), v in {(0, 1): 0.12, (0, 2): 0.08, (1, 2): 0.15}.items():
    p[j, l] = p[l, j] = v
cfg = MarketConfig([[1.0, 1.4], [1.6, 0.9], [2.1, 1.2]], [0.3, 0.45, 0.7], p, 0.05)
F0 = BasisState([[1, 0], [0, 2], [1, 1]], [2, 1, 3])
traj = PriceTrajectory(1.0, [[1, 2], [2, 2], [2, 1]])

print("   t    dn_0       dn_1       dk        Pi_0     residual")
for t in np.linspace(0, 3, 13):
    dn, dk = delta_occupations(cfg, F0, traj, 0, t)
    pi = portfolio_evolution(cfg, F0, traj, 0, t)
    r = sum_rule_residual(cfg, F0, traj, 0, t)
    print(f"{t:5.2f} {dn[0]:+.3e} {dn[1]:+.3e} {dk:+.3e} {pi:8.4f} {r:+.1e}")

# %%
# Shares and cash only change hands, so the shifts cancel across traders.
t = 2.3
shifts = [delta_occupations(cfg, F0, traj, l, t) for l in range(3)]
print("sum of share shifts:", sum(s[0] for s in shifts))
print("sum of cash shifts: ", sum(s[1] for s in shifts))
