import numpy as np
import pytest

from qmarket import BasisState, MarketConfig, SectorKey, enumerate_sector

_ACCEPTANCE_LINES = []


def record_criterion(line):
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def two_trader_config(lam=0.01, p=0.1, omega_share=(1.0, 2.0), omega_cash=(0.3, 0.5)):
    coupling = np.zeros((2, 2, 1))
    coupling[0, 1, 0] = coupling[1, 0, 0] = p
    return MarketConfig([[omega_share[0]], [omega_share[1]]], list(omega_cash), coupling, lam)


def random_config(rng, n=None, l=None, lam=None, sparsity=0.3):
    n = n or int(rng.integers(1, 4))
    l = l or int(rng.integers(1, 3))
    p = rng.uniform(0.02, 0.2, size=(n, n, l))
    p *= rng.random((n, n, l)) > sparsity
    p = np.triu(p.transpose(2, 0, 1), 1)
    p = (p + p.transpose(0, 2, 1)).transpose(1, 2, 0)
    return MarketConfig(rng.uniform(0.5, 2.0, (n, l)), rng.uniform(0.1, 1.0, n), p,
                        rng.uniform(0.05, 0.5) if lam is None else lam)


def random_key(rng, cfg, max_shares=2, max_cash=4):
    return SectorKey(tuple(int(v) for v in rng.integers(0, max_shares + 1, cfg.n_share_types)),
                     int(rng.integers(0, max_cash + 1)))


@pytest.fixture
def six():
    """The 6-state sector: 2 traders, 1 share type, one share and two units of cash."""
    cfg = two_trader_config()
    basis = enumerate_sector(cfg, SectorKey((1,), 2))
    F0 = BasisState([[0], [1]], [2, 0])
    Ff = BasisState([[1], [0]], [1, 1])
    return cfg, basis, F0, Ff


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
