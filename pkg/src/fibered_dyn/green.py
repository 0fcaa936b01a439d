"""Green functions by renormalized escape-rate iteration.

For a homogeneous lift ``F`` of degree ``d`` and ``|X|_inf = 1``::

    G_F(X) = sum_{n >= 0} d^-(n+1) log |F(X_n)|_inf,   X_{n+1} = F(X_n) / |F(X_n)|_inf

and the tail after ``N`` terms is at most ``M d^-N / (d - 1)`` where ``M``
bounds ``|log |F(X)|_inf|`` on the unit sphere of the sup norm.  Iteration
runs on the canonically scaled lift ``F / kappa`` (``kappa`` = largest
coefficient modulus) and adds ``log(kappa) / (d - 1)`` back, so the number of
iterations and hence the relative Green function do not depend on how the
stored lift happens to be scaled.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .algebra import BinaryForm, normalize_max
from .errors import DegenerateFiber, ToleranceUnreachable
from .geometry import FiberedMap, MapArrays, ProjPoint, normalize_lift

DEFAULT_TOL = 1e-9
MAX_ITERATIONS = 200
SPHERE_SAMPLES = 10_000
SPHERE_INFLATION = 2.0
BAILOUT = 1e12


@dataclass(frozen=True)
class EscapeDefect:
    M: float
    method: str


@dataclass(frozen=True)
class GreenValue:
    """Green-function evaluation; arrays when evaluated on many points."""

    value: np.ndarray
    truncation_bound: float
    iterations_used: int
    tol: float = DEFAULT_TOL

    @property
    def is_infinite(self):
        return np.isinf(self.value)

    def __float__(self):
        return float(self.value)

    def to_json(self) -> dict:
        return {
            "value": float(self.value) if np.ndim(self.value) == 0 else np.asarray(self.value).tolist(),
            "truncation_bound": self.truncation_bound,
            "iterations_used": self.iterations_used,
            "tol": self.tol,
        }


# ---------------------------------------------------------------------------
# Escape defect
# ---------------------------------------------------------------------------


def _kappa(m: MapArrays, part: str) -> np.ndarray:
    parts = [np.abs(m.th0), np.abs(m.th1)]
    if part == "F":
        parts.append(np.abs(m.rc))
    return np.max(np.concatenate(parts, axis=-1), axis=-1)


def _scaled(m: MapArrays, kappa: np.ndarray) -> MapArrays:
    k = np.asarray(kappa)[..., None]
    return MapArrays(m.d, m.th0 / k, m.th1 / k, m.exps, m.rc / k)


def _sup_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Uniform-ish samples of ``{|X|_inf = 1}`` in C^dim."""
    rad = np.sqrt(rng.uniform(size=(n, dim)))
    rad[np.arange(n), rng.integers(0, dim, size=n)] = 1.0
    return rad * np.exp(2j * np.pi * rng.uniform(size=(n, dim)))


def _binary_lower_bound(th0: np.ndarray, th1: np.ndarray) -> float:
    """Guaranteed lower bound of ``|Theta(y)|_inf`` on ``|y|_inf = 1``.

    Solves the Bezout identities ``A Theta0 + B Theta1 = a^(2d-1)`` and
    ``= b^(2d-1)`` (degree ``d-1`` cofactors) through the Sylvester system.
    """
    d = len(th0) - 1
    size = 2 * d
    syl = np.zeros((size, size), complex)
    # columns: coefficients of A (d of them) then B; rows: monomials a^(2d-1-k) b^k
    for i in range(d):
        syl[i:i + d + 1, i] = th0
        syl[i:i + d + 1, d + i] = th1
    worst = 0.0
    for k in (0, size - 1):
        rhs = np.zeros(size, complex)
        rhs[k] = 1.0
        try:
            sol = np.linalg.solve(syl, rhs)
        except np.linalg.LinAlgError:
            return 0.0
        worst = max(worst, np.abs(sol[:d]).sum() + np.abs(sol[d:]).sum())
    return 1.0 / worst


def escape_defect(m: MapArrays, part: str = "F", method: str = "sphere-sample",
                  n_samples: int = SPHERE_SAMPLES, seed: int = 0) -> EscapeDefect:
    """Bound ``M`` on ``|log |F(X)|_inf|`` over ``|X|_inf = 1`` (unbatched arrays)."""
    if m.batch_shape:
        raise ValueError("escape_defect takes an unbatched map; use escape_defect_batch")
    if method == "sphere-sample":
        rng = np.random.default_rng(seed)
        if part == "F":
            X = _sup_sphere(rng, n_samples, 3)
            vals = np.max(np.abs(m.lift(X)), axis=-1)
        else:
            y = _sup_sphere(rng, n_samples, 2)
            vals = np.max(np.abs(m.theta(y)), axis=-1)
        M = SPHERE_INFLATION * float(np.max(np.abs(np.log(vals))))
        return EscapeDefect(M, method)
    if method == "coefficient-bound":
        return EscapeDefect(float(_coefficient_bound(m, part)), method)
    raise ValueError(f"unknown defect method {method!r}")


def _coefficient_bound(m: MapArrays, part: str) -> float:
    upper = max(np.abs(m.th0).sum(), np.abs(m.th1).sum())
    c_theta = _binary_lower_bound(m.th0, m.th1)
    if part != "F":
        lower = c_theta
    else:
        upper = max(upper, np.abs(m.rc).sum())
        r_d = abs(complex(m.z_leading()))
        gamma = np.abs(m.rc).sum() - r_d
        delta = 1.0 if gamma <= 0 else min(1.0, r_d / (2 * gamma))
        lower = min(c_theta * delta**m.d, r_d / 2)
    if lower <= 0:
        return math.inf
    return max(abs(math.log(upper)), abs(math.log(lower)))


def escape_defect_batch(m: MapArrays, part: str = "F") -> np.ndarray:
    """Coefficient bound for every map in a batch (guaranteed, so no sampling)."""
    shape = m.batch_shape
    out = np.empty(shape)
    for idx in np.ndindex(*shape):
        out[idx] = _coefficient_bound(m.take(idx), part)
    return out


_DEFECTS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def map_defect(f: FiberedMap, part: str = "F", method: str = "sphere-sample") -> EscapeDefect:
    """Cached defect of the canonically scaled lift of ``f``."""
    cache = _DEFECTS.setdefault(f, {})
    key = (part, method)
    if key not in cache:
        m = f.arrays
        cache[key] = escape_defect(_scaled(m, _kappa(m, part)), part=part, method=method)
    return cache[key]


def iterations_for(M: float, d: int, tol: float, cap: int = MAX_ITERATIONS) -> int:
    if M <= 0:
        return 0
    if not math.isfinite(M):
        raise ToleranceUnreachable("escape defect is infinite")
    n = max(0, math.ceil(math.log(M / ((d - 1) * tol)) / math.log(d)))
    if n > cap:
        raise ToleranceUnreachable(f"need {n} iterations (cap {cap}) for tol {tol:g}")
    return n


def tail_bound(M: float, d: int, n: int) -> float:
    return M * float(d) ** (-n) / (d - 1)


# ---------------------------------------------------------------------------
# Evaluation kernels
# ---------------------------------------------------------------------------


def _escape_sum(step, X: np.ndarray, d: int, n: int) -> np.ndarray:
    nrm = np.max(np.abs(X), axis=-1)
    acc = np.log(nrm)
    X = X / nrm[..., None]
    for k in range(n):
        Y = step(X)
        nrm = np.max(np.abs(Y), axis=-1)
        acc = acc + np.log(nrm) * float(d) ** (-(k + 1))
        X = Y / nrm[..., None]
    return acc


def green_F_arrays(m: MapArrays, X: np.ndarray, n_iter: int) -> np.ndarray:
    kappa = _kappa(m, "F")
    ms = _scaled(m, kappa)
    return _escape_sum(ms.lift, np.asarray(X, complex), m.d, n_iter) + np.log(kappa) / (m.d - 1)


def green_theta_arrays(m: MapArrays, y: np.ndarray, n_iter: int) -> np.ndarray:
    kappa = _kappa(m, "theta")
    ms = _scaled(m, kappa)
    return _escape_sum(ms.theta, np.asarray(y, complex), m.d, n_iter) + np.log(kappa) / (m.d - 1)


def relative_green_arrays(m: MapArrays, X: np.ndarray, n_iter: int) -> np.ndarray:
    """``G_F(X) - G_Theta(y)`` with a common iteration count; ``+inf`` on ``I(pi)``."""
    X = np.asarray(X, complex)
    on_ip = np.all(X[..., :2] == 0, axis=-1)
    Xs = np.where(on_ip[..., None], np.array([1.0, 1.0, 1.0]), X)
    gF = green_F_arrays(m, Xs, n_iter)
    gT = green_theta_arrays(m, Xs[..., :2], n_iter)
    return np.where(on_ip, np.inf, gF - gT)


def _scalar(val):
    return float(val) if np.ndim(val) == 0 else val


def _defects(f: FiberedMap):
    return map_defect(f, "F").M, map_defect(f, "theta").M


def green_theta(f: FiberedMap, y, tol: float = DEFAULT_TOL) -> GreenValue:
    y = y.coords if isinstance(y, ProjPoint) else np.asarray(y, complex)
    if np.all(y == 0):
        raise ValueError("G_Theta is undefined at the origin")
    M = map_defect(f, "theta").M
    n = iterations_for(M, f.d, tol)
    return GreenValue(_scalar(green_theta_arrays(f.arrays, y, n)), tail_bound(M, f.d, n), n, tol)


def green_F(f: FiberedMap, X, tol: float = DEFAULT_TOL) -> GreenValue:
    X = X.coords if isinstance(X, ProjPoint) else np.asarray(X, complex)
    if np.all(X == 0):
        raise ValueError("G_F is undefined at the origin")
    M = map_defect(f, "F").M
    n = iterations_for(M, f.d, tol)
    return GreenValue(_scalar(green_F_arrays(f.arrays, X, n)), tail_bound(M, f.d, n), n, tol)


def relative_green(f: FiberedMap, x, tol: float = DEFAULT_TOL) -> GreenValue:
    """Relative Green function ``G = G_F - G_Theta`` on P^2 (``inf`` on ``I(pi)``).

    ``x`` may be a :class:`ProjPoint` or an array of points ``(..., 3)``.
    Each of the two series is truncated within ``tol``.
    """
    X = x.coords if isinstance(x, ProjPoint) else np.asarray(x, complex)
    MF, MT = _defects(f)
    n = max(iterations_for(MF, f.d, tol), iterations_for(MT, f.d, tol))
    val = _scalar(relative_green_arrays(f.arrays, X, n))
    return GreenValue(val, tail_bound(MF, f.d, n) + tail_bound(MT, f.d, n), n, tol)


def relative_green_batch(m: MapArrays, X: np.ndarray, tol: float = DEFAULT_TOL,
                         defects: Optional[tuple] = None) -> np.ndarray:
    """Relative Green values for a batched map; coefficient-bound defects by default."""
    if defects is None:
        MF = np.max(escape_defect_batch(m, "F")) if m.batch_shape else _coefficient_bound(m, "F")
        MT = np.max(escape_defect_batch(m, "theta")) if m.batch_shape else _coefficient_bound(m, "theta")
    else:
        MF, MT = defects
    n = max(iterations_for(MF, m.d, tol), iterations_for(MT, m.d, tol))
    return relative_green_arrays(m, X, n)


# ---------------------------------------------------------------------------
# Fiber Green function along a periodic base cycle
# ---------------------------------------------------------------------------


def cycle_fiber_maps(f: FiberedMap, cycle: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Normalized lifts ``s_i`` and fiber-map coefficients ``R(s_i, w) / lam_i``.

    ``lam_i`` is defined by projecting ``Theta(s_i)`` on ``s_{i+1}`` (indices mod n).
    """
    lifts = np.array([normalize_lift(np.asarray(getattr(a, "coords", a), complex)[:2]) for a in cycle])
    n = len(lifts)
    th = f.arrays.theta(lifts)
    nxt = np.roll(lifts, -1, axis=0)
    lam = np.sum(np.conj(nxt) * th, axis=-1) / np.sum(np.abs(nxt) ** 2, axis=-1)
    resid = np.max(np.abs(th - lam[:, None] * nxt), axis=-1) / np.max(np.abs(th), axis=-1)
    if np.any(resid > 1e-6):
        raise DegenerateFiber(f"points do not form a cycle (residual {resid.max():.3g})")
    coeffs = f.arrays.fiber_coeffs(lifts) / lam[:, None]
    return lifts, coeffs


def fiber_green(f: FiberedMap, cycle: Sequence, w, tol: float = DEFAULT_TOL) -> GreenValue:
    """Green function of the fiber map ``R_n`` over a periodic base cycle.

    ``w`` is the fiber coordinate in the first fiber, i.e. the point
    ``[s0 : s1 : w]`` with ``s`` the normalized lift of ``cycle[0]``.
    Iterates ``w -> P_i(w)`` around the cycle; once ``|w| > BAILOUT`` the
    remaining escape rate is summed in closed form from the leading
    coefficients.
    """
    _, coeffs = cycle_fiber_maps(f, cycle)
    n = len(coeffs)
    d = f.d
    w = np.array(w, dtype=complex)
    if np.any(np.isinf(w)):
        raise DegenerateFiber("fiber Green function is infinite at the fiber's point at infinity")
    lead = np.log(np.abs(coeffs[:, -1]))
    weights = float(d) ** -np.arange(1, n + 1)
    k_max = max(1, math.ceil(math.log(math.log(BAILOUT) / tol) / math.log(d)))
    if k_max > 10 * MAX_ITERATIONS:
        raise ToleranceUnreachable("fiber Green iteration cap exceeded")
    out = np.zeros(w.shape)
    done = np.zeros(w.shape, bool)
    cur = w.copy()
    for k in range(k_max + 1):
        big = (~done) & (np.abs(cur) > BAILOUT)
        if big.any():
            i = k % n
            tail = np.dot(np.roll(lead, -i), weights) / (1 - float(d) ** (-n))
            out[big] = float(d) ** (-k) * (np.log(np.abs(cur[big])) + tail)
            done |= big
        if done.all():
            break
        P = coeffs[k % n]
        acc = np.full(cur.shape, P[-1], complex)
        for c in P[-2::-1]:
            acc = acc * cur + c
        cur = np.where(done, 0, acc)
    rest = ~done
    out[rest] = float(d) ** (-k_max) * np.log(np.maximum(np.abs(cur[rest]), 1.0))
    bound = float(d) ** (-k_max) * math.log(BAILOUT) + tol
    val = float(out) if out.ndim == 0 else out
    return GreenValue(val, bound, k_max, tol)


def escape_rate_1d(poly_coeffs, z, tol: float = 1e-12, bailout: float = 1e12) -> float:
    """Green function of one polynomial ``P`` (ascending coeffs), for cross-checks."""
    c = np.asarray(poly_coeffs, complex)
    d = len(c) - 1
    k_max = math.ceil(math.log(math.log(bailout) / tol) / math.log(d))
    z = complex(z)
    for k in range(k_max):
        if abs(z) > bailout:
            return float(d) ** (-k) * (math.log(abs(z)) + math.log(abs(c[-1])) / (d - 1))
        acc = c[-1]
        for a in c[-2::-1]:
            acc = acc * z + a
        z = acc
    return float(d) ** (-k_max) * math.log(max(abs(z), 1.0))
