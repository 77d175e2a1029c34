"""Time-dependent perturbation theory in the interaction strength.

The wave function is expanded as ``sum_F c_F(t) exp(-i E_F t) |F>`` with
``c_F = c0 + lam*c1 + lam**2*c2 + ...``. Prices are constant on each
interval, so every coefficient is an exponential polynomial in time and
all integrals are done in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BasisTooLarge, PerturbationError, ValidationError
from .kernels import ExpPolyKernel, phase_integral
from .market import BasisState, MarketConfig, PriceTrajectory, SectorBasis, portfolio_value
from .operators import apply_exchange, build_HI, exchange_moves, interaction_matrices


def degeneracy_tol(basis: SectorBasis) -> float:
    """Energy gaps below this are treated as exact degeneracies."""
    return 1e-8 * max(1.0, float(np.max(np.abs(basis.energies))))


def energy_gap(basis, final, initial) -> float:
    return float(basis.energies[basis.index_of(final)] - basis.energies[basis.index_of(initial)])


def h_element(cfg: MarketConfig, basis: SectorBasis, final: BasisState, initial: BasisState, prices) -> float:
    """``<final| H_I |initial>`` at fixed prices, summed move by move."""
    basis.index_of(final)
    basis.index_of(initial)
    total = 0.0
    for m in exchange_moves(cfg):
        hit = apply_exchange(initial, m, int(prices[m.share]))
        if hit is not None and hit[0] == final:
            total += cfg.coupling[m.buyer, m.seller, m.share] * hit[1]
    return 2.0 * total


def _check_time(trajectory, t):
    if t < 0 or t > trajectory.horizon * (1 + 1e-12):
        raise ValidationError(f"t = {t} outside [0, {trajectory.horizon}]")


def _segments(trajectory, t):
    """(k, start, end) for the portion of every interval inside [0, t]."""
    _check_time(trajectory, t)
    out = []
    for k in range(trajectory.n_intervals):
        a = k * trajectory.step
        if a >= t:
            break
        out.append((k, a, min(a + trajectory.step, t)))
    return out


def c1_coefficient(cfg, basis, trajectory, initial, final, t) -> complex:
    """First-order coefficient of ``final`` starting from ``initial``.

    Each interval contributes ``-i h_k exp(i dE t_k) exp(i dE h/2) 2 sin(dE h/2)/dE``
    (``-i h_k h`` at resonance); a final partial interval is truncated at ``t``.
    """
    f, i = basis.index_of(final), basis.index_of(initial)
    de = basis.energies[f] - basis.energies[i]
    tol = degeneracy_tol(basis)
    hs = interaction_matrices(cfg, basis, trajectory)
    total = 0j
    for k, a, b in _segments(trajectory, t):
        hk = hs[k][f, i]
        if hk == 0:
            continue
        if b - a == trajectory.step and abs(de) >= tol:
            w = np.exp(1j * de * a) * np.exp(1j * de * trajectory.step / 2) \
                * 2 * np.sin(de * trajectory.step / 2) / de
        else:
            w = phase_integral(de, a, b, tol)
        total += hk * w
    return complex(-1j * total)


def p1_transition(cfg, basis, trajectory, initial, final, t) -> float:
    """First-order transition probability ``lam**2 |c1|**2`` for ``final != initial``."""
    if final == initial:
        raise PerturbationError("first-order probability is undefined for final == initial")
    return cfg.lam**2 * abs(c1_coefficient(cfg, basis, trajectory, initial, final, t)) ** 2


class GoldenRule(NamedTuple):
    rate: float
    resonant: bool
    delta_e: float
    h: float
    # sup over t of the first-order probability; inf at resonance (t**2 growth)
    bound: float


def golden_rule_rate(cfg, basis, initial, final, prices) -> GoldenRule:
    """Long-time transition rate at constant prices on a discrete spectrum.

    The delta function of the energy gap becomes an exact-degeneracy test:
    degenerate pairs grow like ``t**2`` and get rate ``2 pi lam**2 |h|**2``,
    all others oscillate below ``lam**2 |h|**2 (2/dE)**2`` and get rate 0.
    """
    de = energy_gap(basis, final, initial)
    h = h_element(cfg, basis, final, initial, prices)
    if abs(de) < degeneracy_tol(basis):
        return GoldenRule(2 * math.pi * cfg.lam**2 * h**2, True, de, h, math.inf)
    return GoldenRule(0.0, False, de, h, cfg.lam**2 * h**2 * (2 / de) ** 2)


def _f(x, t, tol):
    """(exp(ixt) - 1)/x and its x -> 0 limit."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < tol
    xs = np.where(small, 1.0, x)
    series = 1j * t - x * t**2 / 2 - 1j * x**2 * t**3 / 6
    return np.where(small, series, (np.exp(1j * xs * t) - 1) / xs)


def _df(x, t, tol):
    """d/dx of (exp(ixt) - 1)/x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < tol
    xs = np.where(small, 1.0, x)
    e = np.exp(1j * xs * t)
    direct = (1j * t * xs * e - (e - 1)) / xs**2
    series = -(t**2) / 2 - 1j * x * t**3 / 3 + x**2 * t**4 / 8
    return np.where(small, series, direct)


def second_order_weight(e_mid, e0, ef, t, tol):
    """The function multiplying ``h_fF h_F0`` in the constant-price second-order coefficient."""
    a = np.asarray(e_mid, dtype=float) - e0
    b = ef - e0
    c = ef - np.asarray(e_mid, dtype=float)
    small = np.abs(a) < tol
    safe_a = np.where(small, 1.0, a)
    direct = (_f(b, t, tol) - _f(c, t, tol)) / safe_a
    return np.where(small, _df(b - a / 2, t, tol), direct)


def c2_constant(cfg, basis, initial, final, prices, t) -> complex:
    """Second-order coefficient at constant prices.

    The factor ``(-i)**2`` of the iterated integral cancels against the two
    ``1/i`` of the time integrations, leaving
    ``sum_F h_fF h_F0 E_F(t)`` with no extra sign.
    """
    i, f = basis.index_of(initial), basis.index_of(final)
    h = build_HI(cfg, basis, prices).toarray().real
    e = basis.energies
    weights = second_order_weight(e, e[i], e[f], t, degeneracy_tol(basis))
    return complex(np.sum(h[f, :] * h[:, i] * weights))


def _I(de, tj, t, tol):
    return phase_integral(de, tj, t, tol)


def _J(de, dl, tj, t, tol):
    """integral_{tj}^t I_j(s) exp(i dl s) ds with I_j(s) = integral_{tj}^s exp(i de u) du."""
    inner = ExpPolyKernel.phase(de).integral(tj, tol)
    return inner.shift_freq(dl).integral(tj, tol)(t)


def c2_piecewise_M3(cfg, basis, trajectory, initial, final, t=None) -> complex:
    """Second-order coefficient for three price intervals, evaluated at ``t = 3h``.

    Written term by term: both interactions in the same interval give the
    double integrals ``J_k``, interactions in different intervals factor
    into products of single integrals ``I_k``.
    """
    if trajectory.n_intervals != 3:
        raise ValidationError(f"three price intervals required, got {trajectory.n_intervals}")
    step = trajectory.step
    t = 3 * step if t is None else t
    t0, t1, t2, t3 = 0.0, step, 2 * step, t
    i0, f = basis.index_of(initial), basis.index_of(final)
    h = interaction_matrices(cfg, basis, trajectory)
    e = basis.energies
    e0, ef = e[i0], e[f]
    tol = degeneracy_tol(basis)
    total = 0j
    for m in range(basis.dim):
        em = e[m]
        into = [h[k][m, i0] for k in range(3)]
        out = [h[k][f, m] for k in range(3)]
        if not any(into) or not any(out):
            continue
        I0_in = _I(em - e0, t0, t1, tol)
        I1_in = _I(em - e0, t1, t2, tol)
        term = out[0] * into[0] * _J(em - e0, ef - em, t0, t1, tol)
        term += out[1] * (into[0] * I0_in * _I(ef - em, t1, t2, tol)
                          + into[1] * _J(em - e0, ef - em, t1, t2, tol))
        term += out[2] * ((into[0] * I0_in + into[1] * I1_in) * _I(ef - em, t2, t3, tol)
                          + into[2] * _J(em - e0, ef - em, t2, t3, tol))
        total += term
    return complex((-1j) ** 2 * total)


@dataclass(frozen=True, eq=False)
class DysonCoefficients:
    """Coefficients ``c^(j)_F(t)`` for ``j = 0..order`` over a sector basis."""

    order: int
    coeffs: np.ndarray  # shape (order + 1, dim)
    lam: float
    t: float
    basis: SectorBasis

    def partial_sum(self, order=None):
        n = self.order if order is None else order
        powers = self.lam ** np.arange(n + 1)
        return powers @ self.coeffs[: n + 1]

    def amplitudes(self, order=None):
        """Truncated Schrödinger amplitudes ``<F|Psi(t)>``."""
        return self.partial_sum(order) * np.exp(-1j * self.basis.energies * self.t)

    def probabilities(self, order=None):
        return np.abs(self.partial_sum(order)) ** 2


def dyson_coefficients(cfg, basis, trajectory, initial, order, t, max_work=2e9) -> DysonCoefficients:
    """All perturbative coefficients up to ``order`` at time ``t``.

    On each interval (local time ``s``) the order-j coefficient of state F is
    stored as ``sum_{G,m} C[G, m, F] s**m exp(i (E_F - E_G) s)``: G labels the
    state the phase came from, which keeps the representation closed under
    the recursion ``dc^(j)/ds = -i H~ c^(j-1)``. Integration is exact.
    """
    if order < 0:
        raise ValidationError("order must be nonnegative")
    dim = basis.dim
    if dim**3 * max(order, 1) > max_work:
        raise BasisTooLarge(f"dimension {dim} at order {order} exceeds the work cap {max_work:g}")
    i0 = basis.index_of(initial)
    e = basis.energies
    tol = degeneracy_tol(basis)
    w = e[:, None] - e[None, :]           # w[F, G] = E_F - E_G
    wt = w.T                              # indexed [G, F]
    resonant = np.abs(wt) < tol
    safe = np.where(resonant, 1.0, wt)
    hs = interaction_matrices(cfg, basis, trajectory)
    diag = np.arange(dim)

    values = np.zeros((order + 1, dim), dtype=complex)
    values[0, i0] = 1.0
    for k, a, b in _segments(trajectory, t):
        htil = hs[k] * np.exp(1j * w * a)
        kernels = []
        c = np.zeros((dim, 1, dim), dtype=complex)
        c[diag, 0, diag] = values[0]
        kernels.append(c)
        for j in range(1, order + 1):
            prev = kernels[-1]
            d = -1j * (prev @ htil.T)      # integrand, same (G, m, F) layout
            p = prev.shape[1]
            new = np.zeros((dim, p + 1, dim), dtype=complex)
            const = np.zeros(dim, dtype=complex)
            for m in range(p):
                dm = d[:, m, :]
                new[:, m + 1, :] += np.where(resonant, dm / (m + 1), 0)
                nz = np.where(resonant, 0, dm)
                for r in range(m + 1):
                    new[:, m - r, :] += nz * ((-1) ** r * math.perm(m, r)) / (1j * safe) ** (r + 1)
                # antiderivative at s = 0 keeps only r = m
                const -= np.sum(nz * ((-1) ** m * math.factorial(m)) / (1j * safe) ** (m + 1), axis=0)
            new[diag, 0, diag] += values[j] + const
            kernels.append(new)
        s = b - a
        phase = np.exp(1j * wt * s)
        for j, c in enumerate(kernels):
            pw = s ** np.arange(c.shape[1])
            values[j] = np.einsum("gmf,m,gf->f", c, pw, phase)
    return DysonCoefficients(order, values, cfg.lam, float(t), basis)


def truncated_probabilities(cfg, basis, trajectory, initial, t, order):
    """Probabilities over the sector at a perturbative order, or ``order='exact'``."""
    if order == "exact":
        from .exact import Propagator
        from .market import StateVector
        prop = Propagator(cfg, basis, trajectory, StateVector.basis_vector(basis, initial))
        return np.abs(prop.amplitudes(t)) ** 2
    order = int(order)
    if order < 1:
        raise ValidationError("perturbative order must be at least 1")
    return dyson_coefficients(cfg, basis, trajectory, initial, order, t).probabilities()


def portfolio_distribution(cfg, basis, trajectory, initial, trader, t, order="exact"):
    """Probability of every achievable portfolio value of ``trader`` at time ``t``.

    Final states are grouped by portfolio value at the prices in force at
    ``t``; returns a dict ``value -> probability`` sorted by value.
    """
    probs = truncated_probabilities(cfg, basis, trajectory, initial, t, order)
    prices = trajectory.prices_at(t)
    out = {}
    for s, p in zip(basis.states, probs):
        v = portfolio_value(s, prices, trader)
        out[v] = out.get(v, 0.0) + float(p)
    return dict(sorted(out.items()))


def portfolio_transition_probability(cfg, basis, trajectory, initial, trader, target, t, order="exact") -> float:
    """Probability that ``trader`` holds portfolio value ``target`` at time ``t``."""
    return portfolio_distribution(cfg, basis, trajectory, initial, trader, t, order).get(int(target), 0.0)


def validity_indicator(cfg, basis, trajectory, t) -> float:
    """``lam * max|h| * t``; first order is trustworthy only while this is small."""
    hmax = max(float(np.max(np.abs(h))) if h.size else 0.0
               for h in interaction_matrices(cfg, basis, trajectory))
    return cfg.lam * hmax * t
