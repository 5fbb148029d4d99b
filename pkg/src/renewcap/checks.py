"""Cross-module consistency checks run by ``renewcap verify``.

Each check measures one error against a pinned tolerance. Functions are
looked up through their modules at call time, so a patched implementation
is what gets checked.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from . import raft, rart, series
from . import simulation as sim

GRID_LAMBDAS = (0.05, 0.1, 0.5)
GRID_RS = (2.0, 6.0, 12.0)
GRID_T_FACTORS = (0.5, 3.7, 15.2)


def parameter_grid():
    for lam in GRID_LAMBDAS:
        for r in GRID_RS:
            for f in GRID_T_FACTORS:
                yield raft.RaftParams(lam, r), f * r


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<38} error={self.error:.3e}  tol={self.tolerance:.1e}  ({self.seconds:.2f}s)"


def check_normalization() -> float:
    worst = 0.0
    for params, t in parameter_grid():
        table = raft.joint_pmf_table(params, t, mass_tol=1e-13)
        worst = max(worst, abs(table.total() + table.truncated_mass - 1.0))
    return worst


def check_death_marginal(l_top: int = 40) -> float:
    worst = 0.0
    for params, t in parameter_grid():
        table = raft.joint_pmf_table(params, t, mass_tol=1e-13)
        marg = table.death_marginal()
        for l in range(l_top + 1):
            got = marg[l] if l <= table.l_max else 0.0
            worst = max(worst, abs(got - raft.death_pmf(params.lam, t, l)))
    return worst


def check_alive_mean() -> float:
    worst = 0.0
    for params, t in parameter_grid():
        table = raft.joint_pmf_table(params, t, mass_tol=1e-13)
        worst = max(worst, abs(table.mean_alive() - raft.alive_expectation(params, t)))
    return worst


def check_fixed_degeneracy() -> float:
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(20):
        lam = float(rng.uniform(0.02, 1.0))
        r = float(rng.uniform(0.5, 15.0))
        t = float(rng.uniform(0.1, 20.0 * r))
        got = rart.expected_n_rart(rart.Fixed(r), lam, t).value
        worst = max(worst, abs(got - raft.expected_n(raft.RaftParams(lam, r), t)))
    return worst


def _integrand(m: int, lam: float, t: float) -> Callable[[float], float]:
    return lambda r: math.exp(-lam * m * r) * (1.0 + lam * (t - m * r))


def check_closed_forms(n_cases: int = 40) -> float:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(n_cases):
        lam = float(rng.uniform(0.02, 1.0))
        a = float(rng.uniform(0.1, 8.0))
        b = a + float(rng.uniform(0.01, 10.0))
        nu = float(rng.uniform(0.05, 3.0))
        t = float(rng.uniform(0.5, 40.0))
        m = int(rng.integers(1, 4))
        g = _integrand(m, lam, t)
        hi = min(b, t / m)
        ref = integrate.quad(g, a, hi, epsabs=1e-14, epsrel=1e-13)[0] / (b - a) if hi > a else 0.0
        worst = max(worst, abs(rart.term_uniform(m, lam, a, b, t) - ref))
        hi = t / m
        if hi > a:
            ref = integrate.quad(lambda r: g(r) * nu * math.exp(-nu * (r - a)), a, hi, epsabs=1e-14, epsrel=1e-13)[0]
        else:
            ref = 0.0
        worst = max(worst, abs(rart.term_shifted_exponential(m, lam, nu, a, t) - ref))
    return worst


def check_binomial_identity(m_top: int = 15) -> float:
    bad = 0
    for m in range(1, m_top + 1):
        for d in range(m + 1):
            bad += series.lemma2_sum(m, d) != series.lemma2_closed_form(m, d)
    return float(bad)


def truncated_cdf_quadrature(params: raft.RaftParams, n: int, t: float) -> float:
    """Direct integration of the lifetime density over {x_k <= r, sum x_k <= t}."""
    lam, r = params.lam, params.r
    opts = {"epsabs": 1e-13, "epsrel": 1e-12, "limit": 200}

    def dens(*xs):
        return lam ** len(xs) * math.exp(-lam * sum(xs))

    if n == 2:
        def inner(x1):
            hi = min(r, t - x1)
            return integrate.quad(lambda x2: dens(x1, x2), 0.0, hi, **opts)[0] if hi > 0 else 0.0

        pts = [t - r] if 0 < t - r < min(r, t) else None
        return integrate.quad(inner, 0.0, min(r, t), points=pts, **opts)[0]
    if n == 3:
        def inner2(x1, x2):
            hi = min(r, t - x1 - x2)
            return integrate.quad(lambda x3: dens(x1, x2, x3), 0.0, hi, **opts)[0] if hi > 0 else 0.0

        def inner1(x1):
            top = min(r, t - x1)
            if top <= 0:
                return 0.0
            pts = [t - x1 - r] if 0 < t - x1 - r < top else None
            return integrate.quad(lambda x2: inner2(x1, x2), 0.0, top, points=pts, **opts)[0]

        brk = [p for p in (t - r, t - 2 * r) if 0 < p < min(r, t)]
        return integrate.quad(inner1, 0.0, min(r, t), points=brk or None, **opts)[0]
    raise ValueError("quadrature oracle implemented for n in {2, 3}")


def check_truncated_cdf(ns=(2, 3), ts=(5.0, 10.0, 14.0)) -> float:
    params = raft.RaftParams(0.1, 6.0)
    worst = 0.0
    for n in ns:
        for t in ts:
            worst = max(worst, abs(raft.lemma1_prob(params, n, t) - truncated_cdf_quadrature(params, n, t)))
    return worst


def check_asymptote() -> float:
    worst = 0.0
    for params, _ in parameter_grid():
        t = 100.0 * max(params.r, 1.0 / params.lam)
        lim = raft.rate_limit(params)
        worst = max(worst, abs(raft.expected_n(params, t) / t - lim) / lim)
    return worst


def monte_carlo_joint(params: raft.RaftParams, t: float, reps: int, seed: int, min_mass: float = 1e-3) -> float:
    """Largest |simulated - analytic| / binomial SE over cells of mass >= min_mass."""
    est = sim.simulate(sim.SimConfig(reps, seed, t, params, oracle=True))
    table = raft.joint_pmf_table(params, t, mass_tol=1e-12)
    worst = 0.0
    for (k, l), p in table.entries.items():
        if p >= min_mass:
            se = math.sqrt(p * (1.0 - p) / est.replications_completed)
            worst = max(worst, abs(est.frequency(k, l) - p) / se)
    return worst


def monte_carlo_rart(reps: int, seed: int, bs=(7.0, 11.0), ts=(10.0, 20.0, 36.0)) -> float:
    worst = 0.0
    for b in bs:
        dist = rart.Uniform(6.0, b)
        for t in ts:
            est = sim.simulate(sim.SimConfig(reps, seed, t, rart.RartModel(dist, 0.1), oracle=True))
            exact = rart.expected_n_rart(dist, 0.1, t).value
            worst = max(worst, abs(est.mean_n - exact) / est.se_n)
    return worst


def run_checks(level: str = "fast", seed: int = 42) -> list[CheckResult]:
    plan: list[tuple[str, Callable[[], float], float]] = [
        ("joint pmf normalization", check_normalization, 1e-10),
        ("death marginal is Poisson", check_death_marginal, 1e-10),
        ("alive mean vs table", check_alive_mean, 1e-8),
        ("fixed-age degeneracy", check_fixed_degeneracy, 1e-12),
        ("closed forms vs quadrature", check_closed_forms, 1e-10),
        ("alternating binomial identity (misses)", check_binomial_identity, 0.0),
        ("truncated-lifetime CDF vs quadrature", (lambda: check_truncated_cdf(ns=(2,))) if level == "fast" else check_truncated_cdf, 1e-8),
        ("rate asymptote (relative)", check_asymptote, 5e-3),
    ]
    if level == "fast":
        plan.append(("MC joint cells, 1e5 reps (z)", lambda: monte_carlo_joint(raft.RaftParams(0.1, 6.0), 10.0, 10**5, seed), 4.0))
    elif level == "full":
        plan.append(("MC joint cells, 1e6 reps (z)", lambda: monte_carlo_joint(raft.RaftParams(0.1, 6.0), 10.0, 10**6, seed), 4.0))
        plan.append(("MC uniform-age means, 1e6 (z)", lambda: monte_carlo_rart(10**6, seed), 4.0))
    else:
        raise ValueError(f"unknown level {level!r}")

    results = []
    for name, fn, tol in plan:
        start = time.perf_counter()
        try:
            err = float(fn())
        except Exception:  # a crashing check is a failing check
            err = math.inf
        results.append(CheckResult(name, err, tol, time.perf_counter() - start))
    return results
