"""
Sectors and the market Hamiltonian
===================================

Two traders, one share type, one share and two units of cash in total.
Trading conserves both totals, so the whole problem lives in a six-state
sector.
"""
import numpy as np

from qmarket import MarketConfig, PriceTrajectory, SectorKey, build_H, enumerate_sector, free_energy

coupling = np.zeros((2, 2, 1))
coupling[0, 1, 0] = coupling[1, 0, 0] = 0.1
cfg = MarketConfig(omega_share=[[1.0], [2.0]], omega_cash=[0.3, 0.5], coupling=coupling, lam=0.01)

basis = enumerate_sector(cfg, SectorKey(total_shares=(1,), total_cash=2))
print(f"sector dimension: {basis.dim}")
for i, s in enumerate(basis):
    print(f"  {i}: {s}   E = {free_energy(cfg, s):.2f}")

# %%
# At price 1 a share can move from a trader to one holding at least one unit
# of cash.  Each state has at most one such move, so H splits into 2x2 blocks.
traj = PriceTrajectory(step=1.0, prices=[[1]])
H = build_H(cfg, basis, traj, 0).toarray().real
np.set_printoptions(precision=4, suppress=True, linewidth=120)
print(H)
print("hermiticity defect:", np.max(np.abs(H - H.T)))

# %%
# At price 0 the share changes hands for free and different states connect.
print(build_H(cfg, basis, PriceTrajectory(1.0, [[0]]), 0).toarray().real)
