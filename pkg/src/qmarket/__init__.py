"""Bosonic toy stock market: sector bases, exact evolution and perturbation theory."""
from .errors import (
    BasisTooLarge,
    DiagonalCoupling,
    MarketError,
    NonpositiveFrequency,
    ParseError,
    PerturbationError,
    StateNotInSector,
    SymmetryViolation,
    ValidationError,
)
from .exact import Propagator, exact_transition_probability, expectation_occupations, propagate
from .kernels import ExpPolyKernel
from .market import (
    BasisState,
    MarketConfig,
    PriceTrajectory,
    SectorBasis,
    SectorKey,
    StateVector,
    enumerate_sector,
    free_energy,
    merge_sectors,
    portfolio_value,
    validate_config,
)
from .operators import ExchangeMove, SparseHermitian, apply_exchange, build_H, build_H0, build_HI
from .perturbation import (
    DysonCoefficients,
    c1_coefficient,
    c2_constant,
    c2_piecewise_M3,
    dyson_coefficients,
    golden_rule_rate,
    h_element,
    p1_transition,
    portfolio_transition_probability,
)
from .semiclassical import (
    ThetaSet,
    delta_occupations,
    pair_weight,
    portfolio_evolution,
    sum_rule_residual,
    theta_integrals,
)

__version__ = "0.1.0"
