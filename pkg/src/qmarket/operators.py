"""Exchange moves on number states and sparse matrices of the market Hamiltonian."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import StateNotInSector, ValidationError
from .market import BasisState, MarketConfig, PriceTrajectory, SectorBasis


@dataclass(frozen=True)
class ExchangeMove:
    """Trader ``seller`` sells one share of type ``share`` to trader ``buyer``."""

    buyer: int
    seller: int
    share: int

    def __post_init__(self):
        if self.buyer == self.seller:
            raise ValidationError("buyer and seller must differ")


def rising(k, p):
    """(k+p)!/k! as a product of p consecutive integers."""
    return float(math.prod(range(k + 1, k + p + 1)))


def falling(k, p):
    """k!/(k-p)!, zero when k < p."""
    if k < p:
        return 0.0
    return float(math.prod(range(k - p + 1, k + 1)))


def apply_exchange(s: BasisState, m: ExchangeMove, price: int):
    """Act with ``a+_{buyer} a_{seller} c_buyer^P c+_seller^P`` on ``s``.

    Returns ``(target, gamma)`` or ``None`` when the vector is annihilated
    (the seller holds no share of that type, or the buyer cannot pay).
    """
    i, j, a = m.buyer, m.seller, m.share
    n_seller = s.shares[j][a]
    if n_seller < 1 or s.cash[i] < price:
        return None
    n_buyer = s.shares[i][a]
    gamma = math.sqrt(rising(s.cash[j], price) * falling(s.cash[i], price)
                      * n_seller * (1 + n_buyer))
    shares = [list(row) for row in s.shares]
    shares[j][a] -= 1
    shares[i][a] += 1
    cash = list(s.cash)
    cash[j] += price
    cash[i] -= price
    return BasisState(shares, cash), gamma


def exchange_moves(cfg: MarketConfig):
    """Ordered (buyer, seller, share) triples with nonzero coupling."""
    n, l = cfg.n_traders, cfg.n_share_types
    return [ExchangeMove(i, j, a) for i in range(n) for j in range(n) for a in range(l)
            if i != j and cfg.coupling[i, j, a] != 0]


class SparseHermitian:
    """Hermitian matrix over a sector basis, stored in CSR form.

    Entries are accumulated in a deterministic order, and :meth:`dump`
    writes them sorted by (row, col) so that text output is byte stable.
    """

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=complex)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        self.matrix = m

    @property
    def dim(self):
        return self.matrix.shape[0]

    def entry(self, row, col) -> complex:
        return complex(self.matrix[row, col])

    def toarray(self):
        return self.matrix.toarray()

    def __add__(self, other):
        return SparseHermitian(self.matrix + other.matrix)

    def __mul__(self, scalar):
        return SparseHermitian(self.matrix * scalar)

    __rmul__ = __mul__

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def items(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            yield int(r), int(c), complex(v)

    def dump(self, fh):
        """Coordinate text: ``row col re im`` per line, sorted by (row, col)."""
        for r, c, v in self.items():
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def build_H0(cfg: MarketConfig, basis: SectorBasis) -> SparseHermitian:
    return SparseHermitian(sp.diags(basis.energies, format="csr"))


def _exchange_operator(cfg, basis, prices):
    """Sum over ordered pairs of p * gamma |target><source|, plus the violation count."""
    rows, cols, vals = [], [], []
    moves = exchange_moves(cfg)
    for src, s in enumerate(basis.states):
        for m in moves:
            hit = apply_exchange(s, m, int(prices[m.share]))
            if hit is None:
                continue
            target, gamma = hit
            # the move conserves both totals by construction, so a miss is a bug
            dst = basis.index.get(target)
            if dst is None:
                raise StateNotInSector(f"exchange {m} maps {s} outside the sector")
            rows.append(dst)
            cols.append(src)
            vals.append(cfg.coupling[m.buyer, m.seller, m.share] * gamma)
    return sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()


def build_HI(cfg: MarketConfig, basis: SectorBasis, prices) -> SparseHermitian:
    """Interaction matrix for fixed integer prices (one per share type).

    Every ordered (buyer, seller) pair contributes its move; with symmetric
    couplings the reverse move is also present, so adding the Hermitian
    conjugate yields twice the ordered sum, as in the paired form of the
    interaction.
    """
    prices = [int(p) for p in prices]
    if len(prices) != cfg.n_share_types or any(p < 0 for p in prices):
        raise ValidationError("one nonnegative integer price per share type expected")
    a = _exchange_operator(cfg, basis, prices)
    return SparseHermitian(a + a.conj().T)


def build_H(cfg: MarketConfig, basis: SectorBasis, trajectory: PriceTrajectory, interval: int) -> SparseHermitian:
    if not 0 <= interval < trajectory.n_intervals:
        raise ValidationError(f"interval {interval} outside [0, {trajectory.n_intervals})")
    h0 = build_H0(cfg, basis)
    if cfg.lam == 0:
        return h0
    return h0 + cfg.lam * build_HI(cfg, basis, trajectory.prices[interval])


def interaction_matrices(cfg, basis, trajectory):
    """Dense H_I for each interval; identical price rows share one array."""
    cache = {}
    out = []
    for row in trajectory.prices:
        key = tuple(int(v) for v in row)
        if key not in cache:
            cache[key] = build_HI(cfg, basis, key).toarray().real
        out.append(cache[key])
    return out


def number_operators(basis: SectorBasis):
    """Diagonal matrices of the conserved totals: one per share type, then total cash."""
    shares = basis.share_table().sum(axis=1)
    ops = [sp.diags(shares[:, a], format="csr") for a in range(shares.shape[1])]
    ops.append(sp.diags(basis.cash_table().sum(axis=1), format="csr"))
    return ops
