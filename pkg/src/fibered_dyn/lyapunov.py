"""Lyapunov exponents of fibered maps and the critical-Green pairing formula.

``Lambda_theta`` averages the log of the base derivative over the base
measure, ``Lambda_sigma`` averages the log of the sectional Jacobian over the
equilibrium measure, and ``Lambda_f`` is their sum.  Independently,
``log d + pairing`` with the pairing equal to the average over base points of
the relative Green function summed over the fiber's critical points gives a
second route to ``Lambda_sigma``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .algebra import batch_roots
from .errors import DegenerateFiber, SingularSample
from .geometry import (FiberedMap, base_derivative, full_jacobian, horizontal_weight,
                       require_valid, sectional_jacobian)
from .green import DEFAULT_TOL, iterations_for, map_defect, relative_green_arrays
from .sampling import (Cycle, SampleSet, combined_se, jackknife, periodic_base_points,
                       sample_base, sample_equilibrium)

LAMBDA_0 = 0.0
CRITICAL_PROXIMITY = 1e-13
LOG_FLOOR = math.log(1e-300)
MAX_DROP_FRACTION = 0.01
# absolute allowance added to 3-SE bands so that exact cases (SE ~ 1e-13) compare cleanly
ROUNDING_FLOOR = 1e-10


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n: int
    method: str

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ExponentReport:
    lambda_f: Estimate
    lambda_theta: Estimate
    lambda_sigma: Estimate
    lambda_0: float = LAMBDA_0
    lambda_f_direct: Optional[Estimate] = None
    dropped: int = 0

    def to_json(self) -> dict:
        out = {k: (v.to_json() if isinstance(v, Estimate) else v) for k, v in
               [("lambda_f", self.lambda_f), ("lambda_theta", self.lambda_theta),
                ("lambda_sigma", self.lambda_sigma), ("lambda_f_direct", self.lambda_f_direct)]}
        out.update(lambda_0=self.lambda_0, dropped=self.dropped)
        return out


@dataclass(frozen=True)
class BJReport:
    lambda_sigma_direct: Estimate
    pairing: Estimate
    d: int
    exponents: Optional[ExponentReport] = None

    @property
    def lambda_sigma_formula(self) -> float:
        return math.log(self.d) + LAMBDA_0 + self.pairing.value

    @property
    def discrepancy(self) -> float:
        return self.lambda_sigma_direct.value - self.lambda_sigma_formula

    @property
    def combined_se(self) -> float:
        return combined_se(self.lambda_sigma_direct.se, self.pairing.se)

    @property
    def within_band(self) -> bool:
        return abs(self.discrepancy) <= 3 * self.combined_se + ROUNDING_FLOOR

    def to_json(self) -> dict:
        return {
            "lambda_sigma_direct": self.lambda_sigma_direct.to_json(),
            "pairing": self.pairing.to_json(),
            "lambda_sigma_formula": {"value": self.lambda_sigma_formula, "se": self.pairing.se},
            "discrepancy": {"value": self.discrepancy, "se": self.combined_se},
            "within_3se": self.within_band,
            "exponents": self.exponents.to_json() if self.exponents else None,
        }


def _log_average(values: np.ndarray, weights: np.ndarray, method: str) -> tuple[Estimate, int]:
    """Jackknife mean of ``log(values)`` with the near-critical drop policy."""
    keep = values >= CRITICAL_PROXIMITY
    dropped = int(np.sum(~keep))
    if dropped > MAX_DROP_FRACTION * len(values):
        raise SingularSample(f"{dropped} of {len(values)} points lie on a critical zero",
                             dropped=dropped, total=len(values))
    logs = np.maximum(np.log(np.where(keep, values, 1.0)), LOG_FLOOR)
    w = np.where(keep, weights, 0.0)
    mean, se = jackknife(logs, w / w.sum())
    return Estimate(mean, se, int(keep.sum()), method), dropped


def exponents(f: FiberedMap, sample_f: SampleSet, sample_theta: SampleSet) -> ExponentReport:
    """``Lambda_theta`` on the base sample, ``Lambda_sigma`` on the P^2 sample.

    ``Lambda_f`` is ``Lambda_theta`` measured on the projected P^2 sample
    plus ``Lambda_sigma``, with its SE from the jackknife of the per-point
    sum.  ``lambda_f_direct`` averages the log of the full Jacobian, which
    differs pointwise from that sum by a coboundary.
    """
    m = f.arrays
    X = sample_f.points
    w = sample_f.weights
    lt, drop_t = _log_average(base_derivative(m, sample_theta.points), sample_theta.weights,
                              "log|D theta| over base sample")
    jac_s = sectional_jacobian(m, X)
    ls, drop_s = _log_average(jac_s, w, "log|Jac_sigma| over P^2 sample")
    base_on_f = base_derivative(m, X[:, :2])
    both = np.minimum(jac_s, base_on_f) >= CRITICAL_PROXIMITY
    summed = np.where(both, np.log(np.where(both, base_on_f * jac_s, 1.0)), 0.0)
    ww = np.where(both, w, 0.0)
    mf, sf = jackknife(summed, ww / ww.sum())
    lf = Estimate(mf, sf, int(both.sum()), "Lambda_theta(pi_* sample) + Lambda_sigma")
    direct, drop_f = _log_average(full_jacobian(m, X), w, "log|Jac f| over P^2 sample")
    return ExponentReport(lf, lt, ls, LAMBDA_0, direct, drop_t + drop_s)


def _critical_points(m, lifts: np.ndarray, seed: int = 0) -> np.ndarray:
    """Critical points ``[s0 : s1 : c]`` of each fiber map; shape ``(..., d-1, 3)``."""
    crit = batch_roots(m.critical_fiber_coeffs(lifts), seed=seed)
    s = np.broadcast_to(lifts[..., None, :], crit.shape + (2,))
    return np.concatenate([s, crit[..., None]], axis=-1)


def fiber_critical_green(f: FiberedMap, lifts: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Sum over the ``d - 1`` critical points of each fiber of the relative Green function."""
    MF, MT = map_defect(f, "F").M, map_defect(f, "theta").M
    n = max(iterations_for(MF, f.d, tol), iterations_for(MT, f.d, tol))
    pts = _critical_points(f.arrays, np.asarray(lifts, complex))
    g = relative_green_arrays(f.arrays, pts, n)
    if not np.all(np.isfinite(g)):
        raise DegenerateFiber("a fiber critical point has infinite Green value")
    return g.sum(axis=-1)


def per_fiber_exponent(f: FiberedMap, cycle, tol: float = DEFAULT_TOL) -> float:
    """Exponent of the fiber map ``f^n`` over a base cycle of period ``n``.

    Equals ``n log d`` plus the sum of relative Green values over the
    critical points of every fiber in the cycle.
    """
    pts = cycle.points if isinstance(cycle, Cycle) else np.array(
        [np.asarray(getattr(a, "coords", a), complex)[:2] for a in cycle])
    return len(pts) * math.log(f.d) + float(np.sum(fiber_critical_green(f, pts, tol)))


@dataclass(frozen=True)
class PeriodicApprox:
    n: int
    value: float
    table: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"n": self.n, "value": self.value, "cycles": self.table}


def sigma_periodic_approx(f: FiberedMap, n: int, tol: float = DEFAULT_TOL,
                          seed: int = 0) -> PeriodicApprox:
    """Average of fiber exponents over all period-``n`` base points.

    A point of exact period ``k`` dividing ``n`` contributes
    ``(n / k)`` times the exponent over its ``k``-cycle; the total is divided
    by ``n d^n``.
    """
    pset = periodic_base_points(f, n, seed=seed)
    total = 0.0
    table = []
    for c in pset.cycles:
        lam = per_fiber_exponent(f, c, tol)
        k = c.period
        total += c.multiplicity * k * (n // k) * lam
        table.append({"period": k, "multiplicity": c.multiplicity, "exponent": lam,
                      "residual": c.residual,
                      "base_point": [[z.real, z.imag] for z in c.points[0]]})
    return PeriodicApprox(n, total / (n * f.d**n), table)


def bj_pairing(f: FiberedMap, sample_theta: SampleSet, tol: float = DEFAULT_TOL) -> Estimate:
    """Average over base samples of the critical relative Green sum in each fiber."""
    vals = fiber_critical_green(f, sample_theta.points, tol)
    if np.any(vals < -2 * tol * (f.d - 1)):
        raise SingularSample("negative Green summand below tolerance", dropped=0, total=len(vals))
    mean, se = jackknife(vals, sample_theta.weights)
    return Estimate(mean, se, len(vals), "mean critical Green sum over base sample")


def bj_check(f: FiberedMap, N: int, seed: int = 0, tol: float = DEFAULT_TOL) -> BJReport:
    """Compare the direct sectional exponent with ``log d + pairing`` on fresh samples.

    The P^2 sample, the base sample for the exponents and the base sample
    for the pairing use three seeds derived from ``seed``.
    """
    require_valid(f)
    ss = np.random.SeedSequence(seed).spawn(3)
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in ss]
    sf = sample_equilibrium(f, N, seed=seeds[0])
    st = sample_base(f, N, seed=seeds[1])
    rep = exponents(f, sf, st)
    pairing = bj_pairing(f, sample_base(f, N, seed=seeds[2]), tol)
    return BJReport(rep.lambda_sigma, pairing, f.d, rep)


def chain_rule_defect(f: FiberedMap, X: np.ndarray) -> np.ndarray:
    """Pointwise ``log|Jac f| - log|D theta| - log|Jac_sigma| - log h(f x) + log h(x)``.

    ``h = |y| / |X|`` accounts for the quotient metric on P^2 differing from
    the pullback of the base metric; the defect is zero up to rounding.
    """
    m = f.arrays
    X = np.asarray(X, complex)
    FX = m.lift(X)
    return (np.log(full_jacobian(m, X)) - np.log(base_derivative(m, X[..., :2]))
            - np.log(sectional_jacobian(m, X))
            - np.log(horizontal_weight(FX)) + np.log(horizontal_weight(X)))
