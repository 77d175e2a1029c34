import io
import math

import numpy as np
import pytest

from qmarket import (
    BasisState,
    ExchangeMove,
    PriceTrajectory,
    SectorKey,
    ValidationError,
    apply_exchange,
    build_H,
    build_H0,
    build_HI,
    enumerate_sector,
    merge_sectors,
)
from qmarket.operators import number_operators

from conftest import random_config, random_key, two_trader_config


def ladder(state, op, mode, power=1):
    """Apply a single-mode ladder operator one quantum at a time.

    ``state`` is a dict {occupation tuple: amplitude}; ``mode`` indexes the tuple.
    Only a+|n> = sqrt(n+1)|n+1> and a|n> = sqrt(n)|n-1> are used.
    """
    out = state
    for _ in range(power):
        nxt = {}
        for occ, amp in out.items():
            n = occ[mode]
            if op == "create":
                new, fac = n + 1, math.sqrt(n + 1)
            else:
                if n == 0:
                    continue
                new, fac = n - 1, math.sqrt(n)
            key = occ[:mode] + (new,) + occ[mode + 1:]
            nxt[key] = nxt.get(key, 0.0) + amp * fac
        out = nxt
    return out


def brute_exchange(s, buyer, seller, share, price):
    """a+_{buyer} a_{seller} c_buyer^P c+_seller^P, rightmost factor first."""
    n, l = s.n_traders, s.n_share_types
    share_mode = lambda j: j * l + share
    cash_mode = lambda j: n * l + j
    vec = {s.flat: 1.0}
    vec = ladder(vec, "create", cash_mode(seller), price)
    vec = ladder(vec, "destroy", cash_mode(buyer), price)
    vec = ladder(vec, "destroy", share_mode(seller))
    vec = ladder(vec, "create", share_mode(buyer))
    return vec


class TestApplyExchange:
    def test_worked_example(self):
        s = BasisState([[0], [1]], [2, 0])
        target, gamma = apply_exchange(s, ExchangeMove(0, 1, 0), 1)
        assert target == BasisState([[1], [0]], [1, 1])
        assert gamma == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_seller_without_share(self):
        assert apply_exchange(BasisState([[0], [0]], [2, 0]), ExchangeMove(0, 1, 0), 1) is None

    def test_buyer_cannot_pay(self):
        assert apply_exchange(BasisState([[0], [1]], [1, 0]), ExchangeMove(0, 1, 0), 2) is None

    def test_zero_price_moves_no_cash(self):
        target, gamma = apply_exchange(BasisState([[0], [2]], [0, 0]), ExchangeMove(0, 1, 0), 0)
        assert target.cash == (0, 0) and gamma == pytest.approx(math.sqrt(2))

    def test_same_trader_rejected(self):
        with pytest.raises(ValidationError):
            ExchangeMove(1, 1, 0)

    def test_matches_ladder_oracle(self, rng):
        for _ in range(200):
            n, l = int(rng.integers(2, 4)), int(rng.integers(1, 3))
            shares = rng.integers(0, 4, (n, l))
            cash = rng.integers(0, 6, n)
            s = BasisState(shares.tolist(), cash.tolist())
            i, j = rng.choice(n, 2, replace=False)
            a, price = int(rng.integers(l)), int(rng.integers(0, 4))
            hit = apply_exchange(s, ExchangeMove(int(i), int(j), a), price)
            oracle = brute_exchange(s, int(i), int(j), a, price)
            if hit is None:
                assert oracle == {}
            else:
                (flat, amp), = oracle.items()
                assert hit[0].flat == flat
                assert hit[1] == pytest.approx(amp, rel=1e-13)

    def test_large_cash_does_not_overflow(self):
        s = BasisState([[0], [1]], [400, 300])
        _, gamma = apply_exchange(s, ExchangeMove(0, 1, 0), 3)
        expected = math.sqrt(301 * 302 * 303 * 400 * 399 * 398)
        assert gamma == pytest.approx(expected, rel=1e-13)


class TestMatrices:
    def test_h0_diagonal(self, six):
        cfg, basis, _, _ = six
        h0 = build_H0(cfg, basis)
        i = basis.index_of(BasisState([[1], [0]], [2, 0]))
        assert h0.entry(i, i) == pytest.approx(1.6)
        dense = h0.toarray()
        assert np.count_nonzero(dense - np.diag(np.diag(dense))) == 0
        assert np.trace(dense).real == pytest.approx(basis.energies.sum())

    def test_hi_worked_entry(self, six):
        cfg, basis, F0, Ff = six
        hi = build_HI(cfg, basis, [1])
        assert abs(hi.entry(basis.index_of(Ff), basis.index_of(F0))) == pytest.approx(0.2 * math.sqrt(2))

    def test_zero_coupling(self, six):
        _, basis, _, _ = six
        cfg = two_trader_config(p=0.0)
        assert build_HI(cfg, basis, [1]).matrix.nnz == 0

    def test_two_exchange_pair_is_zero(self, six):
        cfg, basis, F0, _ = six
        hi = build_HI(cfg, basis, [1]).toarray()
        far = BasisState([[0], [1]], [0, 2])
        assert hi[basis.index_of(far), basis.index_of(F0)] == 0

    def test_build_h_lambda_zero(self, six):
        _, basis, _, _ = six
        cfg = two_trader_config(lam=0.0)
        traj = PriceTrajectory(1.0, [[1]])
        assert np.array_equal(build_H(cfg, basis, traj, 0).toarray(), build_H0(cfg, basis).toarray())

    def test_interval_out_of_range(self, six):
        cfg, basis, _, _ = six
        with pytest.raises(ValidationError):
            build_H(cfg, basis, PriceTrajectory(1.0, [[1]]), 1)

    def test_price_change_only_touches_off_diagonal(self, six):
        cfg, basis, F0, _ = six
        traj = PriceTrajectory(1.0, [[1], [0]])
        a, b = build_H(cfg, basis, traj, 0).toarray(), build_H(cfg, basis, traj, 1).toarray()
        assert np.array_equal(np.diag(a), np.diag(b))
        assert not np.array_equal(a, b)
        # price 0 moves the share without cash: gamma = sqrt(n_seller (1 + n_buyer)) = 1
        to = basis.index_of(BasisState([[1], [0]], [2, 0]))
        assert b[to, basis.index_of(F0)] == pytest.approx(cfg.lam * 2 * 0.1 * 1.0)

    def test_hermitian_and_real(self, rng):
        for _ in range(20):
            cfg = random_config(rng)
            basis = enumerate_sector(cfg, random_key(rng, cfg))
            prices = rng.integers(0, 3, cfg.n_share_types)
            hi = build_HI(cfg, basis, prices)
            assert hi.hermiticity_defect() == 0
            assert np.all(hi.toarray().imag == 0)

    def test_commutes_with_totals_on_merged_sectors(self, rng):
        for _ in range(10):
            cfg = random_config(rng, n=3)
            keys = {random_key(rng, cfg) for _ in range(3)}
            basis = merge_sectors(cfg, keys)
            h = (build_H0(cfg, basis) + cfg.lam * build_HI(cfg, basis, [1] * cfg.n_share_types)).matrix
            for op in number_operators(basis):
                comm = h @ op - op @ h
                assert (abs(comm).max() if comm.nnz else 0.0) < 1e-12

    def test_dump_sorted_and_stable(self, six):
        cfg, basis, _, _ = six
        h = build_H(cfg, basis, PriceTrajectory(1.0, [[1]]), 0)
        out1, out2 = io.StringIO(), io.StringIO()
        h.dump(out1)
        h.dump(out2)
        assert out1.getvalue() == out2.getvalue()
        keys = [tuple(map(int, line.split()[:2])) for line in out1.getvalue().splitlines()]
        assert keys == sorted(keys)
