"""Numerical kernels shared by the analytic modules.

Poisson probabilities are evaluated with Loader's saddle-point form, which
keeps the exponent accurate to a few ulps even when ``x`` and ``k`` are in
the hundreds; naive ``-x + k*log(x) - lgamma(k+1)`` loses roughly
``log10(x)`` digits to cancellation.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import mpmath

from .errors import DomainError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirlerr_table(n_max: int = 15) -> list[float]:
    with mpmath.workdps(40):
        out = [0.0]
        for n in range(1, n_max + 1):
            v = mpmath.loggamma(n + 1) - (n + mpmath.mpf(0.5)) * mpmath.log(n) + n - mpmath.log(mpmath.sqrt(2 * mpmath.pi))
            out.append(float(v))
    return out


_STIRLERR = _stirlerr_table()


def stirlerr(n: int) -> float:
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integer ``n >= 1``."""
    if n < len(_STIRLERR):
        return _STIRLERR[n]
    nn = float(n) * n
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    if n > 500:
        return (s0 - s1 / nn) / n
    if n > 80:
        return (s0 - (s1 - s2 / nn) / nn) / n
    if n > 35:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n


def bd0(k: float, x: float) -> float:
    """Deviance term ``k*log(k/x) + x - k`` without cancellation near k == x."""
    if abs(k - x) < 0.1 * (k + x):
        v = (k - x) / (k + x)
        s = (k - x) * v
        ej = 2.0 * k * v
        v2 = v * v
        j = 1
        while True:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return k * math.log(k / x) + x - k


def log_poisson_pmf(x: float, k: int) -> float:
    """log P(Poisson(x) = k)."""
    if k == 0:
        return -x
    if x == 0.0:
        return -math.inf
    return -stirlerr(k) - bd0(k, x) - _LOG_SQRT_2PI - 0.5 * math.log(k)


def poisson_pmf(x: float, k: int) -> float:
    if x < 0 or k < 0:
        raise DomainError(f"poisson_pmf needs x >= 0 and k >= 0, got x={x}, k={k}")
    return math.exp(log_poisson_pmf(x, k))


def poisson_tail(x: float, n: int) -> float:
    """P(Poisson(x) >= n), i.e. ``e^{-x} * sum_{k>=n} x^k / k!``.

    Parameters
    ----------
    x : float
        Poisson mean, ``x >= 0``.
    n : int
        Lower summation index, ``n >= 0``.

    Notes
    -----
    For ``n <= x`` the result is at least about one half, so it is taken as
    the complement of the (decreasing, downward-recursed) head sum. For
    ``n > x`` the tail is summed directly from index ``n`` with the ratio
    ``x/(k+1)``. Neither branch subtracts nearly equal quantities.
    """
    if not (x >= 0.0) or math.isinf(x):
        raise DomainError(f"poisson_tail needs a finite x >= 0, got {x}")
    if n < 0:
        raise DomainError(f"poisson_tail needs n >= 0, got {n}")
    if n == 0:
        return 1.0
    if x == 0.0:
        return 0.0

    if n <= x:
        k = n - 1
        p = poisson_pmf(x, k)
        terms = [p]
        while k > 0 and p > 0.0:
            p *= k / x
            k -= 1
            terms.append(p)
            if p < 1e-20 * terms[0]:
                break
        return min(1.0, max(0.0, 1.0 - math.fsum(terms)))

    k = n
    p = poisson_pmf(x, k)
    terms = [p]
    while p > 0.0:
        k += 1
        p *= x / k
        terms.append(p)
        if p < 1e-20 * terms[0]:
            break
    return min(1.0, math.fsum(terms))


def binom(n: int, k: int) -> int:
    """Exact binomial coefficient, 0 outside ``0 <= k <= n``."""
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def log_binom(n: int, k: int) -> float:
    c = binom(n, k)
    if c == 0:
        return -math.inf
    return math.log(c)


class CompensatedSum(NamedTuple):
    value: float
    cancellation_digits: float


def compensated_alternating_sum(terms: Iterable[float]) -> CompensatedSum:
    """Correctly rounded sum plus the number of decimal digits lost to cancellation.

    ``cancellation_digits = log10(max|term| / |sum|)``; it is ``inf`` when the
    terms cancel exactly and ``0`` for an empty or all-zero sequence.
    """
    terms = [float(v) for v in terms]
    value = math.fsum(terms)
    biggest = max((abs(v) for v in terms), default=0.0)
    if biggest == 0.0:
        return CompensatedSum(value, 0.0)
    if value == 0.0:
        return CompensatedSum(value, math.inf)
    return CompensatedSum(value, math.log10(biggest / abs(value)))


def lemma2_sum(m: int, d: int) -> int:
    """Exact value of ``sum_{k=0}^m (-1)^k C(m, k) k^d`` for ``0 <= d <= m``."""
    if m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    if d < 0 or d > m:
        raise DomainError(f"d must lie in [0, m={m}], got {d}")
    return sum((-1) ** k * math.comb(m, k) * k**d for k in range(m + 1))


def lemma2_closed_form(m: int, d: int) -> int:
    """Right-hand side of the identity: 0 for d < m, (-1)^m m! for d == m."""
    if d < m:
        return 0
    return (-1) ** m * math.factorial(m)
