"""Expected counts when the replacement age R is itself random (RaRT).

One age ``R`` is drawn per realization and shared by every interarrival,
making the process doubly stochastic. Conditioning on ``R`` and swapping the
block sum with the integral gives

    E[N(t)] = lam*t + sum_{m>=1} int_0^{t/m} e^{-lam m r} (1 + lam (t - m r)) f(r) dr.

The series diverges whenever ``f`` is bounded away from zero near the
origin, and converges when ``f(r) < r^eps`` there.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import integrate

from . import raft
from .errors import DivergentModelError, DomainError
from .quadrature import integrate_intervals

NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class Fixed:
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError(f"fixed replacement age must be positive, got {self.r}")

    @property
    def support_start(self) -> float:
        return self.r

    def sample(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), self.r)

    def spec(self) -> str:
        return f"fixed:{self.r!r}"


@dataclass(frozen=True)
class ShiftedExponential:
    """R = eta + Exp(nu)."""

    nu: float
    eta: float

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise DomainError(f"nu must be positive, got {self.nu}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise DomainError(f"eta must be nonnegative, got {self.eta}")

    @property
    def support_start(self) -> float:
        return self.eta

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self.eta, self.nu * np.exp(-self.nu * np.maximum(r - self.eta, 0.0)), 0.0)

    def sample(self, u: np.ndarray) -> np.ndarray:
        return self.eta - np.log1p(-u) / self.nu

    def spec(self) -> str:
        return f"sexp:{self.nu!r},{self.eta!r}"


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b and math.isfinite(self.b)):
            raise DomainError(f"uniform replacement age needs 0 <= a < b, got a={self.a}, b={self.b}")

    @property
    def support_start(self) -> float:
        return self.a

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        return np.where((r >= self.a) & (r <= self.b), 1.0 / (self.b - self.a), 0.0)

    def sample(self, u: np.ndarray) -> np.ndarray:
        return self.a + (self.b - self.a) * u

    def spec(self) -> str:
        return f"unif:{self.a!r},{self.b!r}"


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Piecewise-linear density through ``(r_i, density_i)``, zero outside the knots.

    Construct through :meth:`from_pairs` or :meth:`from_csv` to get the
    normalization check (and optional rescaling).
    """

    r: np.ndarray
    density: np.ndarray
    source: str = ""

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        f = np.asarray(self.density, dtype=float)
        if r.ndim != 1 or r.size < 2 or r.shape != f.shape:
            raise DomainError("tabulated density needs at least two (r, density) knots")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(f)):
            raise DomainError("tabulated density must be finite")
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise DomainError("tabulated knots must be nonnegative and strictly increasing")
        if np.any(f < 0):
            raise DomainError("tabulated density must be nonnegative")
        mass = float(np.trapezoid(f, r))
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"tabulated density integrates to {mass!r}, not 1 (pass renormalize to rescale)")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "density", f)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], renormalize: bool = False, source: str = "") -> "Tabulated":
        arr = np.asarray(list(pairs), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DomainError("expected (r, density) pairs")
        r, f = arr[:, 0], arr[:, 1]
        if renormalize:
            mass = float(np.trapezoid(f, r))
            if not mass > 0:
                raise DomainError("cannot renormalize a density with zero mass")
            f = f / mass
        return cls(r, f, source)

    @classmethod
    def from_csv(cls, path, renormalize: bool = False) -> "Tabulated":
        """Two-column ``r,density`` file; a non-numeric first row is taken as a header."""
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh)):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2:
                    raise DomainError(f"{path}:{lineno + 1}: expected two columns, got {len(row)}")
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if lineno == 0:
                        continue
                    raise DomainError(f"{path}:{lineno + 1}: non-numeric value") from None
        return cls.from_pairs(rows, renormalize=renormalize, source=str(path))

    @property
    def support_start(self) -> float:
        """Left end of the region where the interpolated density is positive."""
        pos = np.nonzero(self.density > 0)[0]
        first = int(pos[0])
        return float(self.r[first - 1]) if first > 0 else float(self.r[0])

    def pdf(self, r):
        return np.interp(r, self.r, self.density, left=0.0, right=0.0)

    def cdf_knots(self) -> np.ndarray:
        seg = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.r)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def sample(self, u: np.ndarray) -> np.ndarray:
        cdf = self.cdf_knots()
        target = np.asarray(u) * cdf[-1]
        idx = np.clip(np.searchsorted(cdf, target, side="right") - 1, 0, self.r.size - 2)
        h = self.r[idx + 1] - self.r[idx]
        f0 = self.density[idx]
        slope = (self.density[idx + 1] - f0) / h
        need = target - cdf[idx]
        # Root of f0*s + slope*s^2/2 = need written without cancellation.
        disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * need, 0.0))
        denom = f0 + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(denom > 0, 2.0 * need / denom, 0.0)
        return self.r[idx] + np.clip(s, 0.0, h)

    def spec(self) -> str:
        return f"table:{self.source}"


ReplacementDistribution = Union[Fixed, ShiftedExponential, Uniform, Tabulated]


def parse_distribution(spec: str, renormalize: bool = False) -> ReplacementDistribution:
    """Parse ``fixed:r``, ``sexp:nu,eta``, ``unif:a,b`` or ``table:path``."""
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise DomainError(f"distribution spec {spec!r} must look like kind:args")
    kind = kind.strip().lower()
    if kind == "table":
        return Tabulated.from_csv(Path(rest), renormalize=renormalize)
    try:
        args = [float(v) for v in rest.split(",")]
    except ValueError:
        raise DomainError(f"distribution spec {spec!r} has non-numeric arguments") from None
    expected = {"fixed": 1, "sexp": 2, "unif": 2}
    if kind not in expected:
        raise DomainError(f"unknown distribution kind {kind!r}; use fixed, sexp, unif or table")
    if len(args) != expected[kind]:
        raise DomainError(f"{kind} takes {expected[kind]} argument(s), got {len(args)}")
    if kind == "fixed":
        return Fixed(*args)
    if kind == "sexp":
        return ShiftedExponential(*args)
    return Uniform(*args)


class Finiteness(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    UNKNOWN = "unknown"


def divergence_check(dist: ReplacementDistribution) -> Finiteness:
    return _divergence(dist)[0]


def divergence_reason(dist: ReplacementDistribution) -> str:
    return _divergence(dist)[1]


def _divergence(dist) -> tuple[Finiteness, str]:
    if isinstance(dist, Fixed):
        return Finiteness.FINITE, "fixed age: finitely many blocks before t"
    if isinstance(dist, Uniform):
        if dist.a == 0:
            return Finiteness.INFINITE, (
                "density equals 1/b > 0 on (0, b): a density bounded below near 0 makes E[N(t)] infinite"
            )
        return Finiteness.FINITE, f"density vanishes on (0, {dist.a!r})"
    if isinstance(dist, ShiftedExponential):
        if dist.eta == 0:
            return Finiteness.INFINITE, (
                "density tends to nu > 0 at 0: a density bounded below near 0 makes E[N(t)] infinite"
            )
        return Finiteness.FINITE, f"density vanishes on (0, {dist.eta!r})"
    if isinstance(dist, Tabulated):
        if dist.r[0] > 0:
            return Finiteness.FINITE, f"density vanishes on (0, {dist.r[0]!r}) below the first knot"
        if dist.density[0] > 0:
            return Finiteness.INFINITE, (
                f"interpolated density starts at {dist.density[0]!r} > 0 at r=0: bounded below near 0"
            )
        if dist.support_start > 0:
            return Finiteness.FINITE, f"interpolated density vanishes on (0, {dist.support_start!r})"
        return Finiteness.UNKNOWN, (
            "interpolated density is 0 at r=0 but positive immediately after it; "
            "no usable tail bound certifies finiteness"
        )
    raise DomainError(f"unsupported distribution {dist!r}")


def _uniform_piece(m: int, lam: float, a: float, b: float, t: float) -> float:
    lo = a
    hi = min(b, t / m)
    if hi <= lo:
        return 0.0
    d = hi - lo
    # Antiderivative e^{-m lam r} (m r - t) / ((b - a) m), differenced via
    # expm1 so a short interval does not cancel.
    inner = (m * lo - t) * math.expm1(-m * lam * d) + m * d * math.exp(-m * lam * d)
    return math.exp(-m * lam * lo) * inner / (m * (b - a))


def term_uniform(m: int, lam: float, a: float, b: float, t: float) -> float:
    """``int_a^{min(b, t/m)} e^{-lam m r} (1 + lam (t - m r)) / (b - a) dr``, 0 if empty."""
    if m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    if not (0 <= a < b):
        raise DomainError(f"need 0 <= a < b, got a={a}, b={b}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return _uniform_piece(m, lam, a, b, t)


def _sexp_piece(m: int, lam: float, nu: float, eta: float, t: float) -> float:
    lo = eta
    hi = t / m
    if hi <= lo:
        return 0.0
    d = hi - lo
    c = nu + m * lam
    # Antiderivative e^{-m lam r} nu (lam c (m r - t) - nu) e^{-nu (r - eta)} / c^2;
    # the e^{-nu (r - eta)} factor stays <= 1 on [eta, t/m], so nothing overflows.
    inner = (lam * c * (m * lo - t) - nu) * math.expm1(-c * d) + lam * c * m * d * math.exp(-c * d)
    return nu * math.exp(-m * lam * lo) * inner / (c * c)


def term_shifted_exponential(m: int, lam: float, nu: float, eta: float, t: float) -> float:
    """``int_eta^{t/m} e^{-lam m r} (1 + lam (t - m r)) nu e^{-nu (r - eta)} dr``, 0 if empty."""
    if m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    if eta <= 0:
        raise DivergentModelError(
            "shifted exponential with eta = 0 has infinite E[N(t)]; see divergence_check",
            criterion="density bounded below near 0",
        )
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return _sexp_piece(m, lam, nu, eta, t)


def _block_integrand(m: int, lam: float, t: float, dist: Tabulated):
    def f(r):
        return np.exp(-lam * m * r) * (1.0 + lam * (t - m * r)) * dist.pdf(r)

    return f


def quadrature_term_tabulated(m: int, lam: float, dist: Tabulated, t: float, tol: float = 1e-12) -> float:
    """Adaptive Gauss-Kronrod value of ``int_0^{t/m} e^{-lam m r}(1 + lam(t - m r)) f(r) dr``.

    Integration runs knot interval by knot interval, so the kinks of the
    piecewise-linear density never sit inside a quadrature panel.
    """
    if m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    upper = t / m
    knots = dist.r[dist.r < upper]
    if knots.size == 0:
        return 0.0
    edges = np.append(knots, min(upper, dist.r[-1]))
    value, _ = integrate_intervals(_block_integrand(m, lam, t, dist), edges[:-1], edges[1:], tol)
    return max(value, 0.0)


def _term(dist, m: int, lam: float, t: float, tol: float) -> float:
    if isinstance(dist, Uniform):
        return _uniform_piece(m, lam, dist.a, dist.b, t)
    if isinstance(dist, ShiftedExponential):
        return _sexp_piece(m, lam, dist.nu, dist.eta, t)
    if isinstance(dist, Tabulated):
        return quadrature_term_tabulated(m, lam, dist, t, tol)
    if isinstance(dist, Fixed):
        return math.exp(-lam * m * dist.r) * (1.0 + lam * (t - m * dist.r)) if m <= raft.block_index(t, dist.r) else 0.0
    raise DomainError(f"unsupported distribution {dist!r}")


@dataclass(frozen=True)
class RartExpectation:
    """E[N(t)] under a random replacement age; ``value`` is ``inf`` when divergent."""

    value: float
    terms_used: int
    tail_bound: float
    diverged: bool


def geometric_tail_bound(lam: float, t: float, a0: float, m_done: int) -> float:
    """Upper bound on the terms m > m_done, using f = 0 below ``a0``."""
    q = math.exp(-lam * a0)
    return (1.0 + lam * t) * q ** (m_done + 1) / (-math.expm1(-lam * a0))


def _support_terms(t: float, a0: float) -> int:
    """Number of m >= 1 with t/m > a0."""
    m = math.ceil(t / a0) - 1
    while m >= 1 and t / m <= a0:
        m -= 1
    while t / (m + 1) > a0:
        m += 1
    return max(m, 0)


def _check_lam_t(lam: float, t: float) -> None:
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be positive, got {lam}")
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"t must be positive, got {t}")


def expected_n_rart(dist: ReplacementDistribution, lam: float, t: float, tol: float = 1e-10) -> RartExpectation:
    """Sum the conditioned series to absolute accuracy ``tol``.

    Terms vanish once ``t/m`` drops below the left end ``a0`` of the support,
    so the series is finite; it is cut earlier when the geometric bound on
    the remainder falls below ``tol / 2``. Uniform ages are always summed in
    full.
    """
    _check_lam_t(lam, t)
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if isinstance(dist, Fixed):
        params = raft.RaftParams(lam, dist.r)
        return RartExpectation(raft.expected_n(params, t), raft.block_index(t, dist.r), 0.0, False)

    status, reason = _divergence(dist)
    if status is Finiteness.INFINITE:
        return RartExpectation(math.inf, 0, math.inf, True)
    if status is Finiteness.UNKNOWN:
        raise DivergentModelError(f"cannot certify finiteness of E[N(t)]: {reason}", criterion="unknown")

    a0 = dist.support_start
    m_max = _support_terms(t, a0)
    tail = 0.0
    if not isinstance(dist, Uniform):
        m = 0
        while m < m_max and geometric_tail_bound(lam, t, a0, m) >= 0.5 * tol:
            m += 1
        if m < m_max:
            tail = geometric_tail_bound(lam, t, a0, m)
            m_max = m
    per_term_tol = 0.5 * tol / max(m_max, 1)
    terms = [_term(dist, m, lam, t, per_term_tol) for m in range(1, m_max + 1)]
    return RartExpectation(lam * t + math.fsum(terms), m_max, tail, False)


def partial_sums(dist: ReplacementDistribution, lam: float, t: float, n_terms: int) -> list[float]:
    """``lam t + sum_{m<=M} term_m`` for M = 1..n_terms, computed even for divergent ages."""
    _check_lam_t(lam, t)
    out = []
    acc = [lam * t]
    for m in range(1, n_terms + 1):
        acc.append(_term(dist, m, lam, t, 1e-12))
        out.append(math.fsum(acc))
    return out


def rate_limit_rart(dist: ReplacementDistribution, lam: float) -> float:
    """Long-run rate ``E[lam / (1 - e^{-lam R})]``."""
    def g(r):
        return -lam / np.expm1(-lam * np.asarray(r, dtype=float))

    if isinstance(dist, Fixed):
        return raft.rate_limit(raft.RaftParams(lam, dist.r))
    if isinstance(dist, Uniform):
        val, _ = integrate.quad(lambda r: float(g(r)), dist.a, dist.b, epsabs=1e-13, epsrel=1e-12)
        return val / (dist.b - dist.a)
    if isinstance(dist, ShiftedExponential):
        val, _ = integrate.quad(
            lambda s: float(g(dist.eta + s)) * dist.nu * math.exp(-dist.nu * s), 0, math.inf, epsabs=1e-13, epsrel=1e-12
        )
        return val
    if isinstance(dist, Tabulated):
        val, _ = integrate_intervals(lambda r: g(r) * dist.pdf(r), dist.r[:-1], dist.r[1:], 1e-12)
        return val
    raise DomainError(f"unsupported distribution {dist!r}")


def marker_families(dist: ReplacementDistribution) -> tuple[float, float | None]:
    """(open-marker step, solid-marker step) for the rate-curve figure."""
    if isinstance(dist, Fixed):
        return dist.r, None
    if isinstance(dist, Uniform):
        return dist.a, dist.b
    if isinstance(dist, ShiftedExponential):
        return dist.eta, None
    return dist.support_start, None


def rart_rate_curve(
    dist: ReplacementDistribution, lam: float, t_grid: Sequence[float], tol: float = 1e-10
) -> raft.CurveSeries:
    status, reason = _divergence(dist)
    if status is not Finiteness.FINITE:
        raise DivergentModelError(f"E[N(t)] is not certified finite: {reason}", criterion=reason)
    grid = raft.check_grid(t_grid)
    _check_lam_t(lam, float(grid[0]))
    values = np.array([expected_n_rart(dist, lam, t, tol).value / t for t in grid])
    open_step, solid_step = marker_families(dist)
    lo, hi = float(grid[0]), float(grid[-1])
    return raft.CurveSeries(
        params=RartModel(dist, lam),
        t=grid,
        values=values,
        asymptote=rate_limit_rart(dist, lam),
        jump_markers=raft.multiples_in(open_step, lo, hi),
        solid_markers=raft.multiples_in(solid_step, lo, hi) if solid_step else (),
    )


@dataclass(frozen=True)
class RartModel:
    dist: ReplacementDistribution
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be positive, got {self.lam}")
