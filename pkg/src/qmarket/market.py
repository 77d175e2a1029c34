"""Market configuration, conserved-sector Fock bases and classical prices.

Traders and share types are indexed from 0. A market configuration is a
number state: ``shares[j][a]`` shares of type ``a`` and ``cash[j]``
monetary units held by trader ``j``. The Hamiltonian conserves the total
number of shares of every type and the total cash, so all dynamics is
carried out inside one :class:`SectorBasis`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DiagonalCoupling,
    DimensionMismatch,
    NonpositiveFrequency,
    StateNotInSector,
    SymmetryViolation,
    ValidationError,
)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarketConfig:
    """Traders, share types, free frequencies and exchange couplings.

    Parameters
    ----------
    omega_share : array_like, shape (N, L)
        Frequency attached to each share holding of each trader.
    omega_cash : array_like, shape (N,)
        Frequency attached to the cash of each trader.
    coupling : array_like, shape (N, N, L)
        ``coupling[i, j, a]`` is the amplitude for traders ``i`` and ``j``
        to exchange a share of type ``a``. Must be symmetric in ``i, j``
        with a vanishing diagonal (see :func:`validate_config`).
    lam : float
        Overall interaction strength.
    """

    omega_share: np.ndarray
    omega_cash: np.ndarray
    coupling: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        ws = _frozen(self.omega_share)
        wc = _frozen(self.omega_cash)
        p = _frozen(self.coupling)
        if ws.ndim != 2:
            raise DimensionMismatch("omega_share must have shape (N, L)")
        n, l = ws.shape
        if n < 1 or l < 1:
            raise DimensionMismatch("need at least one trader and one share type")
        if wc.shape != (n,):
            raise DimensionMismatch(f"omega_cash must have shape ({n},), got {wc.shape}")
        if p.shape != (n, n, l):
            raise DimensionMismatch(f"coupling must have shape ({n}, {n}, {l}), got {p.shape}")
        object.__setattr__(self, "omega_share", ws)
        object.__setattr__(self, "omega_cash", wc)
        object.__setattr__(self, "coupling", p)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def n_traders(self) -> int:
        return self.omega_share.shape[0]

    @property
    def n_share_types(self) -> int:
        return self.omega_share.shape[1]

    def with_lambda(self, lam) -> "MarketConfig":
        return MarketConfig(self.omega_share, self.omega_cash, self.coupling, lam)


def validate_config(cfg: MarketConfig) -> MarketConfig:
    """Return ``cfg`` unchanged if it satisfies the model invariants.

    Raises
    ------
    SymmetryViolation
        ``coupling[i, j, a] != coupling[j, i, a]`` for some entry.
    DiagonalCoupling
        A trader is coupled to itself.
    NonpositiveFrequency
        Some frequency is not strictly positive.
    ValidationError
        Negative coupling or negative ``lam``.
    """
    p = cfg.coupling
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError("couplings must be finite and nonnegative")
    asym = np.argwhere(p != np.transpose(p, (1, 0, 2)))
    if asym.size:
        i, j, a = asym[0]
        raise SymmetryViolation(
            f"coupling[{i}, {j}, {a}] = {p[i, j, a]} but coupling[{j}, {i}, {a}] = {p[j, i, a]}"
        )
    diag = np.argwhere(np.einsum("iia->ia", p) != 0)
    if diag.size:
        i, a = diag[0]
        raise DiagonalCoupling(f"coupling[{i}, {i}, {a}] = {p[i, i, a]} must vanish")
    for name, w in (("omega_share", cfg.omega_share), ("omega_cash", cfg.omega_cash)):
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise NonpositiveFrequency(f"{name} must be strictly positive")
    if not math.isfinite(cfg.lam) or cfg.lam < 0:
        raise ValidationError("lambda must be a nonnegative number")
    return cfg


def _nonneg_int(x, what):
    if isinstance(x, (bool, np.bool_)):
        raise ValidationError(f"{what} must be an integer, got {x!r}")
    if isinstance(x, (float, np.floating)):
        if not float(x).is_integer():
            raise ValidationError(f"{what} must be an integer, got {x!r}")
        x = int(x)
    if not isinstance(x, (int, np.integer)):
        raise ValidationError(f"{what} must be an integer, got {x!r}")
    if x < 0:
        raise ValidationError(f"{what} must be nonnegative, got {x}")
    return int(x)


@dataclass(frozen=True)
class SectorKey:
    """Conserved totals: shares of each type and total cash."""

    total_shares: tuple
    total_cash: int

    def __post_init__(self):
        shares = tuple(_nonneg_int(v, "sector share total") for v in self.total_shares)
        object.__setattr__(self, "total_shares", shares)
        object.__setattr__(self, "total_cash", _nonneg_int(self.total_cash, "sector cash"))


@dataclass(frozen=True, order=True)
class BasisState:
    """A number state: ``shares[j][a]`` and ``cash[j]`` for every trader ``j``."""

    shares: tuple
    cash: tuple

    def __post_init__(self):
        shares = tuple(tuple(_nonneg_int(v, "share count") for v in row) for row in self.shares)
        cash = tuple(_nonneg_int(v, "cash") for v in self.cash)
        if len(shares) != len(cash):
            raise DimensionMismatch("shares and cash must list the same number of traders")
        if len({len(r) for r in shares}) > 1:
            raise DimensionMismatch("ragged share table")
        object.__setattr__(self, "shares", shares)
        object.__setattr__(self, "cash", cash)

    @property
    def n_traders(self):
        return len(self.cash)

    @property
    def n_share_types(self):
        return len(self.shares[0]) if self.shares else 0

    @property
    def flat(self):
        """Occupations in sort order: ``n_00, ..., n_{N-1,L-1}, k_0, ..., k_{N-1}``."""
        return tuple(v for row in self.shares for v in row) + self.cash

    def key(self) -> SectorKey:
        totals = tuple(sum(col) for col in zip(*self.shares))
        return SectorKey(totals, sum(self.cash))

    def replace(self, shares=None, cash=None) -> "BasisState":
        return BasisState(self.shares if shares is None else shares,
                          self.cash if cash is None else cash)

    def __str__(self):
        return f"n={list(map(list, self.shares))} k={list(self.cash)}"


def _check_dims(cfg, s):
    if s.n_traders != cfg.n_traders or s.n_share_types != cfg.n_share_types:
        raise DimensionMismatch(
            f"state has {s.n_traders} traders x {s.n_share_types} share types, "
            f"config has {cfg.n_traders} x {cfg.n_share_types}"
        )


def free_energy(cfg: MarketConfig, s: BasisState) -> float:
    """Eigenvalue of the free Hamiltonian on ``s``."""
    _check_dims(cfg, s)
    n = np.asarray(s.shares, dtype=float)
    k = np.asarray(s.cash, dtype=float)
    return float(np.sum(cfg.omega_share * n) + np.dot(cfg.omega_cash, k))


def portfolio_value(s: BasisState, prices_at_t, trader: int) -> int:
    """Cash plus price-weighted share holdings of one trader."""
    if not 0 <= trader < s.n_traders:
        raise IndexError(f"trader {trader} out of range for {s.n_traders} traders")
    prices = list(prices_at_t)
    if len(prices) != s.n_share_types:
        raise DimensionMismatch("one price per share type expected")
    return sum(p * n for p, n in zip(prices, s.shares[trader])) + s.cash[trader]


def compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``, ascending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ordered, complete basis of one conservation sector."""

    key: SectorKey
    states: tuple
    energies: np.ndarray
    index: dict = field(repr=False)

    @property
    def dim(self):
        return len(self.states)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, s):
        return s in self.index

    def index_of(self, s: BasisState) -> int:
        try:
            return self.index[s]
        except KeyError:
            raise StateNotInSector(f"state {s} is not in sector {self.key}") from None

    def share_table(self):
        """Occupations as an array of shape (dim, N, L)."""
        return np.array([s.shares for s in self.states], dtype=float)

    def cash_table(self):
        """Cash as an array of shape (dim, N)."""
        return np.array([s.cash for s in self.states], dtype=float)


def enumerate_sector(cfg: MarketConfig, key: SectorKey) -> SectorBasis:
    """Enumerate every number state with the totals fixed by ``key``.

    States are sorted lexicographically on :attr:`BasisState.flat`, so the
    ordering (and every matrix built on it) is reproducible.
    """
    n, l = cfg.n_traders, cfg.n_share_types
    if len(key.total_shares) != l:
        raise DimensionMismatch(f"sector lists {len(key.total_shares)} share totals, config has {l}")
    per_type = [list(compositions(tot, n)) for tot in key.total_shares]
    cash_splits = list(compositions(key.total_cash, n))
    flats = []
    for combo in itertools.product(*per_type, cash_splits):
        cols, cash = combo[:-1], combo[-1]
        shares = tuple(tuple(cols[a][j] for a in range(l)) for j in range(n))
        flats.append((tuple(v for row in shares for v in row) + cash, shares, cash))
    flats.sort(key=lambda x: x[0])
    states = tuple(BasisState(sh, ca) for _, sh, ca in flats)
    energies = _frozen([free_energy(cfg, s) for s in states])
    index = {s: i for i, s in enumerate(states)}
    return SectorBasis(key, states, energies, index)


def merge_sectors(cfg: MarketConfig, keys) -> SectorBasis:
    """Union of several sector bases, sorted the same way; ``key`` is None.

    Useful for checking that operators never connect different sectors.
    """
    states = sorted({s for key in keys for s in enumerate_sector(cfg, key).states},
                    key=lambda s: s.flat)
    energies = _frozen([free_energy(cfg, s) for s in states])
    return SectorBasis(None, tuple(states), energies, {s: i for i, s in enumerate(states)})


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a sector basis."""

    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise DimensionMismatch(f"expected {self.basis.dim} amplitudes, got {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis_vector(cls, basis: SectorBasis, s: BasisState) -> "StateVector":
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.index_of(s)] = 1.0
        return cls(basis, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, s: BasisState) -> complex:
        return complex(self.amplitudes[self.basis.index_of(s)])


@dataclass(frozen=True, eq=False)
class PriceTrajectory:
    """Integer share prices, constant on each interval ``[k*step, (k+1)*step)``.

    ``prices[k, a]`` is the price of share type ``a`` during interval ``k``.
    """

    step: float
    prices: np.ndarray

    def __post_init__(self):
        step = float(self.step)
        if not math.isfinite(step) or step <= 0:
            raise ValidationError(f"time of transaction must be positive, got {self.step!r}")
        raw = np.asarray(self.prices)
        if raw.ndim != 2 or raw.shape[0] < 1 or raw.shape[1] < 1:
            raise ValidationError("prices must be a non-empty M x L table")
        table = [[_nonneg_int(v, f"price[{k}][{a}]") for a, v in enumerate(row)]
                 for k, row in enumerate(raw.tolist())]
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "prices", _frozen(table, dtype=np.int64))

    @classmethod
    def constant(cls, prices, step=1.0, intervals=1) -> "PriceTrajectory":
        return cls(step, [list(prices)] * intervals)

    @property
    def n_intervals(self):
        return self.prices.shape[0]

    @property
    def n_share_types(self):
        return self.prices.shape[1]

    @property
    def horizon(self):
        return self.n_intervals * self.step

    def times(self):
        """Interval start times ``t_k = k * step``."""
        return self.step * np.arange(self.n_intervals)

    def interval_of(self, t) -> int:
        """Index of the interval containing ``t``; ``t == horizon`` maps to the last one."""
        if t < 0 or t > self.horizon * (1 + 1e-12):
            raise ValidationError(f"t = {t} outside [0, {self.horizon}]")
        return min(int(math.floor(t / self.step)), self.n_intervals - 1)

    def prices_at(self, t):
        return tuple(int(v) for v in self.prices[self.interval_of(t)])

    def is_constant(self):
        return bool(np.all(self.prices == self.prices[0]))
