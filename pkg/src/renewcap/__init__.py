"""Replace-after-fixed-time and replace-after-random-time Poisson processes."""

from .errors import (
    DivergentModelError,
    DomainError,
    NumericalInstabilityError,
    RenewcapError,
    TruncatedPathError,
)
from .raft import (
    CurveSeries,
    JointPmf,
    RaftParams,
    RateDiagnostics,
    alive_expectation,
    death_pmf,
    expected_n,
    joint_pmf_cell,
    joint_pmf_table,
    lemma1_prob,
    n_pmf,
    rate_curve,
    rate_diagnostics,
    rate_limit,
)
from .rart import (
    Finiteness,
    Fixed,
    RartExpectation,
    RartModel,
    ShiftedExponential,
    Tabulated,
    Uniform,
    divergence_check,
    expected_n_rart,
    parse_distribution,
    quadrature_term_tabulated,
    rart_rate_curve,
    term_shifted_exponential,
    term_uniform,
)
from .series import binom, compensated_alternating_sum, lemma2_sum, poisson_tail
from .simulation import SimConfig, SimEstimate, simulate, simulate_path

__version__ = "0.1.0"
