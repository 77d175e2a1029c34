"""Second-order semiclassical shifts of holdings and portfolios.

Prices are external classical functions of time. The occupation and cash
shifts of a trader are built from pair weights ``M`` (set by the initial
number state) and the oscillatory integrals ``Theta0..Theta3`` of each
(j, l, share) triple, all evaluated in closed form for piecewise-constant
prices.
"""
from __future__ import annotations

import bisect
import math
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .kernels import ExpPolyKernel
from .market import BasisState, MarketConfig, PriceTrajectory, portfolio_value
from .operators import falling, rising


class ThetaValues(NamedTuple):
    theta0: float
    theta1: complex
    theta2: complex
    theta3: complex


class PairWeight(NamedTuple):
    M: float
    Mtilde: float


class _Prices:
    """Right-continuous piecewise-constant prices; a plain sequence means constant forever."""

    def __init__(self, prices):
        if isinstance(prices, PriceTrajectory):
            self.table = np.asarray(prices.prices, dtype=float)
            self.starts = [k * prices.step for k in range(prices.n_intervals)]
            self.end = prices.horizon
        else:
            row = [int(p) for p in prices]
            if any(p < 0 for p in row):
                raise ValidationError("prices must be nonnegative")
            self.table = np.asarray([row], dtype=float)
            self.starts = [0.0]
            self.end = math.inf

    def segment(self, t, side="right"):
        if t < 0 or t > self.end * (1 + 1e-12):
            raise ValidationError(f"t = {t} outside the price trajectory [0, {self.end}]")
        if side == "left" and t > 0:
            k = bisect.bisect_left(self.starts, t) - 1
        else:
            k = bisect.bisect_right(self.starts, t) - 1
        return max(0, min(k, len(self.starts) - 1))

    def at(self, t, side="right"):
        return self.table[self.segment(t, side)]

    def initial(self):
        return self.table[0]


class ThetaSet:
    """Theta0..Theta3 of one (j, l, share) triple as functions of time."""

    def __init__(self, cfg: MarketConfig, prices, j, l, share):
        self.prices = prices if isinstance(prices, _Prices) else _Prices(prices)
        dw_cash = cfg.omega_cash[j] - cfg.omega_cash[l]
        dw_share = cfg.omega_share[j, share] - cfg.omega_share[l, share]
        self.rates = [dw_cash * row[share] - dw_share for row in self.prices.table]
        self.share = share
        self._segments = []
        th0, th1, th2, th3 = 0.0, 0j, 0j, 0j
        starts = self.prices.starts
        for k, start in enumerate(starts):
            p = self.prices.table[k][share]
            e = ExpPolyKernel.phase(-self.rates[k], np.exp(-1j * th0))
            k1 = ExpPolyKernel.constant(th1) + e.integral()
            inner = (k1 * e).integral()
            k2 = ExpPolyKernel.constant(th2) + inner
            k3 = ExpPolyKernel.constant(th3) + p * inner
            self._segments.append((start, th0, k1, k2, k3))
            if k + 1 < len(starts):
                d = starts[k + 1] - start
                th0, th1, th2, th3 = th0 + self.rates[k] * d, k1(d), k2(d), k3(d)

    def __call__(self, t, side="right") -> ThetaValues:
        k = self.prices.segment(t, side)
        start, th0, k1, k2, k3 = self._segments[k]
        s = t - start
        return ThetaValues(float(th0 + self.rates[k] * s), k1(s), k2(s), k3(s))

    def derivatives(self, t, side="right"):
        """Time derivatives of (Theta1, Theta2, Theta3), i.e. their integrands at ``t``."""
        k = self.prices.segment(t, side)
        start, th0, k1, _, _ = self._segments[k]
        s = t - start
        e = np.exp(-1j * (th0 + self.rates[k] * s))
        d2 = k1(s) * e
        return e, d2, self.prices.table[k][self.share] * d2


def theta_integrals(cfg, prices, j, l, share, t) -> ThetaValues:
    """Theta0..Theta3 for traders ``j``, ``l`` and share type ``share`` at time ``t``."""
    return ThetaSet(cfg, prices, j, l, share)(t)


def _m(nj, nl, kj, kl, price):
    return (nj * nl * rising(kj, price) * rising(kl, price)
            - nj * (1 + nl) * rising(kj, price) * falling(kl, price))


def pair_weight(state: BasisState, price, j, l, share) -> PairWeight:
    """``M_{j,l}`` and its antisymmetrisation ``M_{j,l} - M_{l,j}`` for one share type."""
    price = int(price)
    nj, nl = state.shares[j][share], state.shares[l][share]
    kj, kl = state.cash[j], state.cash[l]
    m_jl = _m(nj, nl, kj, kl, price)
    m_lj = _m(nl, nj, kl, kj, price)
    return PairWeight(m_jl, m_jl - m_lj)


def _terms(cfg, initial, prices, trader):
    """Yield (j, share, p_lj**2 * Mtilde_{j,l}, ThetaSet) for every coupled pair."""
    p0 = prices.initial()
    for j in range(cfg.n_traders):
        for a in range(cfg.n_share_types):
            p = cfg.coupling[trader, j, a]
            if p == 0:
                continue
            mt = pair_weight(initial, p0[a], j, trader, a).Mtilde
            if mt == 0:
                continue
            yield j, a, p * p * mt, ThetaSet(cfg, prices, j, trader, a)


def delta_occupations(cfg: MarketConfig, initial: BasisState, prices, trader, t):
    """Order ``lam**2`` shifts of the shares (one per type) and cash of ``trader``.

    ``prices`` is a :class:`PriceTrajectory` or a constant price per share type.
    Pair weights use the prices at ``t = 0``.
    """
    prices = prices if isinstance(prices, _Prices) else _Prices(prices)
    dn = np.zeros(cfg.n_share_types)
    dk = 0.0
    for _, a, w, theta in _terms(cfg, initial, prices, trader):
        th = theta(t)
        dn[a] -= w * th.theta2.real
        dk += w * th.theta3.real
    scale = 8 * cfg.lam**2
    return scale * dn, scale * dk


def portfolio_evolution(cfg, initial: BasisState, prices, trader, t) -> float:
    """Expected portfolio value of ``trader`` at ``t`` to second order."""
    prices = prices if isinstance(prices, _Prices) else _Prices(prices)
    p0, pt = prices.initial(), prices.at(t)
    dn, dk = delta_occupations(cfg, initial, prices, trader, t)
    n = np.asarray(initial.shares[trader], dtype=float)
    pi0 = portfolio_value(initial, [int(v) for v in p0], trader)
    return float(pi0 + n @ (pt - p0) + pt @ dn + dk)


def sum_rule_residual(cfg, initial: BasisState, prices, trader, t, side="right") -> float:
    """``sum_a P_a(t) d(dn_a)/dt + d(dk)/dt`` from analytic derivatives.

    At a price jump the derivative is one-sided; ``side`` picks which.
    """
    prices = prices if isinstance(prices, _Prices) else _Prices(prices)
    pt = prices.at(t, side)
    ddn = np.zeros(cfg.n_share_types)
    ddk = 0.0
    for _, a, w, theta in _terms(cfg, initial, prices, trader):
        _, d2, d3 = theta.derivatives(t, side)
        ddn[a] -= w * d2.real
        ddk += w * d3.real
    scale = 8 * cfg.lam**2
    return float(scale * (pt @ ddn + ddk))
