"""Exact distributions for the replace-after-fixed-time (RaFT) process.

Parts fail at constant hazard ``lam``; a part still working at age ``r`` is
replaced anyway. ``A(t)`` counts those age replacements and ``D(t)`` counts
failures, so ``N(t) = A(t) + D(t)``.

Block convention: ``j = floor(t / r)`` with ``j*r <= t < (j+1)*r``. When
``t/r`` is within 4 ulps of an integer the point is treated as lying exactly
on the boundary (the lower end of the upper block), so an age replacement
landing at ``t`` is counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .errors import DomainError, NumericalInstabilityError
from .series import (
    binom,
    compensated_alternating_sum,
    log_binom,
    log_poisson_pmf,
    poisson_pmf,
    poisson_tail,
)

MAX_BLOCKS = 200
# Digits of cancellation beyond which a cell is recomputed with mpmath.
CANCELLATION_DIGITS = 12.0
# Absolute-error budget per cell in double precision; terms larger than this
# divided by the per-term relative error force the mpmath path as well.
CELL_ABS_ERROR = 1e-14
_TERM_REL_ERROR = 1e-14
NEGATIVE_CLAMP = 1e-14


@dataclass(frozen=True)
class RaftParams:
    """Failure hazard ``lam`` (1/time) and fixed replacement age ``r`` (time)."""

    lam: float
    r: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be a positive finite real, got {self.lam}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError(f"r must be a positive finite real, got {self.r}")


def _check_t(t: float) -> None:
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"t must be a positive finite real, got {t}")


def block_index(t: float, r: float) -> int:
    """Number of whole replacement ages in ``[0, t]``, snapping 4-ulp near misses up."""
    q = t / r
    n = round(q)
    if n >= 1 and abs(q - n) <= 4 * math.ulp(float(n)):
        return int(n)
    return math.floor(q)


def _residual(t: float, m: int, r: float) -> float:
    return max(0.0, t - m * r)


def lemma1_prob(params: RaftParams, n: int, t: float) -> float:
    """P(S_n <= t and X_1, ..., X_n <= r) for i.i.d. exponential X_k.

    Inclusion-exclusion over how many of the ``n`` lifetimes exceed ``r``;
    each term is ``e^{-lam*i*r}`` times a Poisson tail at ``lam*(t - i*r)``.
    """
    _check_t(t)
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    lam, r = params.lam, params.r
    j = block_index(t, r)
    terms = []
    for i in range(min(j, n) + 1):
        x = lam * _residual(t, i, r)
        v = binom(n, i) * math.exp(-lam * i * r) * poisson_tail(x, n)
        terms.append(-v if i % 2 else v)
    value = compensated_alternating_sum(terms).value
    return _clamp_probability(value, f"lemma1_prob(n={n}, t={t})")


def _clamp_probability(value: float, what: str) -> float:
    if value < 0.0:
        if value >= -NEGATIVE_CLAMP:
            return 0.0
        raise NumericalInstabilityError(f"{what} evaluated to {value!r}")
    if value > 1.0:
        if value <= 1.0 + NEGATIVE_CLAMP:
            return 1.0
        raise NumericalInstabilityError(f"{what} evaluated to {value!r}")
    return value


def _cell_terms(lam: float, r: float, t: float, j: int, k: int, l: int) -> list[float]:
    log_c = log_binom(k + l, k)
    terms = []
    for i in range(min(j - k, l + 1) + 1):
        m = i + k
        x = lam * _residual(t, m, r)
        lp = log_poisson_pmf(x, l)
        v = math.exp(log_c + log_binom(l + 1, i) - lam * m * r + lp) if lp > -math.inf else 0.0
        terms.append(-v if i % 2 else v)
    return terms


def _cell_mp(lam: float, r: float, t: float, j: int, k: int, l: int, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        lam_, r_, t_ = mpmath.mpf(lam), mpmath.mpf(r), mpmath.mpf(t)
        s = mpmath.mpf(0)
        for i in range(min(j - k, l + 1) + 1):
            base = lam_ * (t_ - (i + k) * r_)
            if base < 0:
                base = mpmath.mpf(0)
            s += (-1) ** i * binom(l + 1, i) * base**l
        val = mpmath.exp(-lam_ * t_) * binom(k + l, k) * s / mpmath.factorial(l)
        return float(val)


def _joint_cell(lam: float, r: float, t: float, j: int, k: int, l: int) -> float:
    if k > j or k < 0 or l < 0:
        return 0.0
    # With j - k >= l + 1 the sum is a full (l+1)-th finite difference of a
    # degree-l polynomial in i, hence exactly zero: at least j - l - 1 of the
    # first j blocks must end in an age replacement.
    if k + l + 1 <= j:
        return 0.0
    terms = _cell_terms(lam, r, t, j, k, l)
    total = compensated_alternating_sum(terms)
    biggest = max(abs(v) for v in terms)
    if total.cancellation_digits > CANCELLATION_DIGITS or biggest * _TERM_REL_ERROR * len(terms) > CELL_ABS_ERROR:
        value = _cell_mp(lam, r, t, j, k, l)
    else:
        value = total.value
    return _clamp_probability(value, f"P(A={k}, D={l}) at t={t}")


def joint_pmf_cell(params: RaftParams, t: float, k: int, l: int) -> float:
    """P(A(t) = k, D(t) = l).

    ``e^{-lam t} C(k+l, k) sum_{i=0}^{j-k} (-1)^i C(l+1, i) (lam (t-(i+k) r))^l / l!``,
    evaluated term-by-term in log space and summed exactly. Cells that lose
    more than 12 digits to cancellation are recomputed in 40-digit arithmetic.
    Returns 0 for ``k > floor(t/r)``.
    """
    _check_t(t)
    j = block_index(t, params.r)
    if j > MAX_BLOCKS:
        raise NumericalInstabilityError(f"t/r = {t / params.r:.6g} exceeds the supported {MAX_BLOCKS} blocks")
    return _joint_cell(params.lam, params.r, t, j, k, l)


@dataclass
class JointPmf:
    """Truncated table of P(A(t) = k, D(t) = l) for ``k <= j``, ``l <= l_max``.

    ``probs[k, l]`` holds the cell; ``truncated_mass`` is the exact Poisson
    mass of the omitted rows ``l > l_max``.
    """

    params: RaftParams
    t: float
    j: int
    l_max: int
    probs: np.ndarray
    truncated_mass: float

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        return {(k, l): float(self.probs[k, l]) for k in range(self.j + 1) for l in range(self.l_max + 1)}

    def total(self) -> float:
        return math.fsum(self.probs.ravel())

    def death_marginal(self) -> np.ndarray:
        return np.array([math.fsum(self.probs[:, l]) for l in range(self.l_max + 1)])

    def alive_marginal(self) -> np.ndarray:
        return np.array([math.fsum(self.probs[k, :]) for k in range(self.j + 1)])

    def n_marginal(self) -> np.ndarray:
        out = np.zeros(self.j + self.l_max + 1)
        for n in range(out.size):
            out[n] = math.fsum(self.probs[k, n - k] for k in range(self.j + 1) if 0 <= n - k <= self.l_max)
        return out

    def mean_alive(self) -> float:
        return math.fsum(k * p for k, p in enumerate(self.alive_marginal()))


def poisson_truncation(x: float, mass_tol: float) -> int:
    """Smallest ``L`` with ``P(Poisson(x) > L) < mass_tol``."""
    L = max(0, int(x))
    while poisson_tail(x, L + 1) >= mass_tol:
        L += 1
    while L > 0 and poisson_tail(x, L) < mass_tol:
        L -= 1
    return L


def joint_pmf_table(params: RaftParams, t: float, mass_tol: float = 1e-12) -> JointPmf:
    """All cells with ``k <= j`` and ``l <= l_max``.

    ``l_max`` comes from the exact Poisson(lam*t) law of ``D(t)``, so the
    omitted probability equals ``truncated_mass < mass_tol`` up to roundoff.
    """
    _check_t(t)
    if not (0.0 < mass_tol < 1.0):
        raise DomainError(f"mass_tol must lie in (0, 1), got {mass_tol}")
    lam, r = params.lam, params.r
    j = block_index(t, r)
    if j > MAX_BLOCKS:
        raise NumericalInstabilityError(f"t/r = {t / r:.6g} exceeds the supported {MAX_BLOCKS} blocks")
    x = lam * t
    l_max = poisson_truncation(x, mass_tol)
    probs = np.zeros((j + 1, l_max + 1))
    for k in range(j + 1):
        for l in range(l_max + 1):
            probs[k, l] = _joint_cell(lam, r, t, j, k, l)
    return JointPmf(params, t, j, l_max, probs, poisson_tail(x, l_max + 1))


def death_pmf(lam: float, t: float, l: int) -> float:
    """P(D(t) = l): failures form a Poisson process of rate ``lam`` regardless of ``r``."""
    _check_t(t)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if l < 0:
        return 0.0
    return poisson_pmf(lam * t, l)


def alive_expectation(params: RaftParams, t: float) -> float:
    """E[A(t)] = sum_{m=1}^{j} e^{-lam m r} (1 + lam (t - m r))."""
    _check_t(t)
    lam, r = params.lam, params.r
    j = block_index(t, r)
    return math.fsum(math.exp(-lam * m * r) * (1.0 + lam * _residual(t, m, r)) for m in range(1, j + 1))


def expected_n(params: RaftParams, t: float) -> float:
    return params.lam * t + alive_expectation(params, t)


def n_pmf(params: RaftParams, t: float, n: int) -> float:
    """P(N(t) = n) = sum_k P(A = k, D = n - k)."""
    _check_t(t)
    if n < 0:
        return 0.0
    j = block_index(t, params.r)
    if j > MAX_BLOCKS:
        raise NumericalInstabilityError(f"t/r = {t / params.r:.6g} exceeds the supported {MAX_BLOCKS} blocks")
    cells = [_joint_cell(params.lam, params.r, t, j, k, n - k) for k in range(min(j, n) + 1)]
    return _clamp_probability(math.fsum(cells), f"P(N={n}) at t={t}")


def rate_limit(params: RaftParams) -> float:
    """Long-run renewal rate ``lam / (1 - e^{-lam r})`` = 1 / E[min(X, r)]."""
    return -params.lam / math.expm1(-params.lam * params.r)


@dataclass
class CurveSeries:
    """Sampled rate curve ``t -> E[N(t)]/t``.

    ``jump_markers`` are the discontinuities inside the grid range (multiples
    of the replacement age; for random ages, multiples of the lower support
    end). ``solid_markers`` holds a second marker family (multiples of the
    upper support end for uniform ages).
    """

    params: object
    t: np.ndarray
    values: np.ndarray
    asymptote: float
    jump_markers: tuple[float, ...] = ()
    solid_markers: tuple[float, ...] = field(default=())

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.values.tolist()))

    def marker_at(self, t: float) -> str:
        if any(_same_point(t, m) for m in self.jump_markers):
            return "open"
        if any(_same_point(t, m) for m in self.solid_markers):
            return "solid"
        return "none"


def _same_point(a: float, b: float) -> bool:
    return abs(a - b) <= 4 * math.ulp(max(abs(a), abs(b)))


def multiples_in(step: float, lo: float, hi: float) -> tuple[float, ...]:
    """Positive multiples ``m*step`` with ``lo <= m*step <= hi`` (4-ulp tolerant)."""
    if step <= 0:
        return ()
    out = []
    m = max(1, math.floor(lo / step))
    while True:
        v = m * step
        if v > hi and not _same_point(v, hi):
            break
        if v >= lo or _same_point(v, lo):
            out.append(v)
        m += 1
    return tuple(out)


def check_grid(t_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("t grid must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
        raise DomainError("t grid values must be positive and finite")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("t grid must be strictly increasing")
    return grid


def rate_curve(params: RaftParams, t_grid: Sequence[float]) -> CurveSeries:
    grid = check_grid(t_grid)
    values = np.array([expected_n(params, t) / t for t in grid])
    return CurveSeries(
        params=params,
        t=grid,
        values=values,
        asymptote=rate_limit(params),
        jump_markers=multiples_in(params.r, grid[0], grid[-1]),
    )


@dataclass(frozen=True)
class RateDiagnostics:
    """Block quantities behind the monotonicity of E[N(t)]/t.

    On ``[n r, (n+1) r)`` the rate is ``lam (1 + u_n) + (u_n - lam r v_n) / t``,
    so it increases across the block exactly when ``u_n < lam r v_n``.
    """

    n: int
    u_n: float
    v_n: float
    increasing_on_block: bool


_DIRECT_SUM_LIMIT = 1000


def rate_diagnostics(params: RaftParams, n: int) -> RateDiagnostics:
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    lam, r = params.lam, params.r
    if n <= _DIRECT_SUM_LIMIT:
        # Direct sums keep u_1 == v_1 exact; the closed forms agree to roundoff.
        u = math.fsum(math.exp(-lam * k * r) for k in range(1, n + 1))
        v = math.fsum(k * math.exp(-lam * k * r) for k in range(1, n + 1))
    else:
        u, v = rate_diagnostics_closed_form(params, n)
    return RateDiagnostics(n=n, u_n=u, v_n=v, increasing_on_block=u < lam * r * v)


def rate_diagnostics_closed_form(params: RaftParams, n: int) -> tuple[float, float]:
    """(u_n, v_n) from the geometric-series closed forms, for cross-checking."""
    lam, r = params.lam, params.r
    q = math.exp(-lam * r)
    one_minus_q = -math.expm1(-lam * r)
    u = q * (-math.expm1(-lam * n * r)) / one_minus_q
    v = q / one_minus_q**2 * (1.0 - (n + 1) * math.exp(-lam * n * r) + n * math.exp(-lam * (n + 1) * r))
    return u, v
