"""Exact Schrödinger evolution under piecewise-constant prices.

Each interval Hamiltonian is diagonalised once; the wave function is
carried across interval boundaries by the corresponding unitaries. This is
the reference every perturbative result is checked against.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .market import BasisState, MarketConfig, PriceTrajectory, SectorBasis, StateVector
from .operators import build_H

NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PropagationResult:
    psi_t: StateVector
    t: float
    checkpoints: tuple = ()


class Propagator:
    """Caches interval eigendecompositions and boundary states for one initial state."""

    def __init__(self, cfg: MarketConfig, basis: SectorBasis, trajectory: PriceTrajectory,
                 psi0: StateVector):
        if trajectory.n_share_types != cfg.n_share_types:
            raise ValidationError("trajectory has the wrong number of share types")
        if abs(psi0.norm() - 1.0) > NORM_TOL:
            raise ValidationError(f"initial state has norm {psi0.norm()!r}, expected 1")
        self.cfg = cfg
        self.basis = basis
        self.trajectory = trajectory
        self.psi0 = psi0
        self._eig = {}
        self._checkpoints = [psi0.amplitudes]
        self._lock = threading.Lock()

    def hamiltonian(self, k):
        return build_H(self.cfg, self.basis, self.trajectory, k).toarray()

    def _eigh(self, k):
        row = tuple(int(v) for v in self.trajectory.prices[k])
        if row not in self._eig:
            self._eig[row] = np.linalg.eigh(self.hamiltonian(k))
        return self._eig[row]

    def _evolve(self, k, psi, s):
        w, v = self._eigh(k)
        return v @ (np.exp(-1j * w * s) * (v.conj().T @ psi))

    def checkpoint(self, m):
        """Amplitudes at ``t_m = m * step``."""
        with self._lock:
            while len(self._checkpoints) <= m:
                k = len(self._checkpoints) - 1
                self._checkpoints.append(self._evolve(k, self._checkpoints[-1], self.trajectory.step))
            return self._checkpoints[m]

    def amplitudes(self, t):
        traj = self.trajectory
        if t < 0 or t > traj.horizon * (1 + 1e-12):
            raise ValidationError(f"t = {t} outside [0, {traj.horizon}]")
        m = min(int(np.floor(t / traj.step)), traj.n_intervals)
        psi = self.checkpoint(m)
        rest = t - m * traj.step
        if m < traj.n_intervals and rest != 0:
            with self._lock:
                psi = self._evolve(m, psi, rest)
        return psi

    def propagate(self, t) -> PropagationResult:
        m = min(int(np.floor(t / self.trajectory.step)), self.trajectory.n_intervals)
        psi = self.amplitudes(t)
        marks = tuple((k * self.trajectory.step, StateVector(self.basis, self.checkpoint(k)))
                      for k in range(m + 1))
        return PropagationResult(StateVector(self.basis, psi), float(t), marks)


def propagate(cfg, basis, trajectory, psi0: StateVector, t) -> PropagationResult:
    """Evolve ``psi0`` from 0 to ``t`` exactly."""
    return Propagator(cfg, basis, trajectory, psi0).propagate(t)


def exact_transition_probability(cfg, basis, trajectory, initial: BasisState,
                                 final: BasisState, t) -> float:
    """``|<final| U(t) |initial>|**2``."""
    j = basis.index_of(final)
    psi = Propagator(cfg, basis, trajectory, StateVector.basis_vector(basis, initial)).amplitudes(t)
    return float(abs(psi[j]) ** 2)


def expectation_occupations(result: PropagationResult, trader: int):
    """Expected shares (one per type) and cash of ``trader`` in the evolved state."""
    basis = result.psi_t.basis
    probs = result.psi_t.probabilities()
    n_traders = basis.states[0].n_traders
    if not 0 <= trader < n_traders:
        raise IndexError(f"trader {trader} out of range")
    shares = probs @ basis.share_table()[:, trader, :]
    cash = float(probs @ basis.cash_table()[:, trader])
    return shares, cash


def energy_expectation(cfg, basis, trajectory, psi: StateVector, interval) -> float:
    h = build_H(cfg, basis, trajectory, interval).matrix
    a = psi.amplitudes
    return float(np.real(np.vdot(a, h @ a)))
