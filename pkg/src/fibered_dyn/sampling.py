"""Monte-Carlo samplers for equilibrium and fiber measures, periodic points, integration.

All samplers run many independent backward chains side by side as numpy
batches.  Points are stored chain-major (all points of chain 0, then chain 1,
...), so the 50 contiguous jackknife blocks used for standard errors consist
of whole chains whenever the chain count is a multiple of 50.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .algebra import (BinaryForm, aberth, batch_binary_roots, batch_roots, compose_binary_pair,
                      normalize_max)
from .errors import DegenerateFiber, NonConvergence
from .geometry import (FiberedMap, MapArrays, backward_step, backward_step_base, chordal,
                       crit_theta_points, normalize_lift, require_valid)

log = logging.getLogger(__name__)

DEFAULT_BURN_IN = 30
DEFAULT_DEPTH = 25
DEFAULT_CHAINS = 1000
JACKKNIFE_BLOCKS = 50
CRIT_EXCLUSION = 1e-6
PERIODIC_RESIDUAL = 1e-8
MAX_PERIODIC_DEGREE = 4096


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Weighted empirical measure on P^1 or P^2.

    Attributes
    ----------
    points : ndarray, shape (N, 2) or (N, 3)
        Homogeneous coordinates normalized to max-modulus 1.
    weights : ndarray, shape (N,)
        Nonnegative weights summing to one.
    seed, burn_in, method
        Provenance: RNG seed, discarded steps per chain, sampler name.
    n_chains : int
        Number of chains; points are stored chain-major.
    """

    points: np.ndarray
    weights: np.ndarray
    seed: int
    burn_in: int
    method: str
    n_chains: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[-1]

    def project(self) -> "SampleSet":
        """Push forward under ``pi`` (drop the fiber coordinate, renormalize)."""
        if self.dim != 3:
            raise ValueError("projection needs a P^2 sample")
        return SampleSet(normalize_max(self.points[:, :2]), self.weights, self.seed, self.burn_in,
                         self.method + "+projected", self.n_chains, dict(self.meta))

    def metadata(self) -> dict:
        return {"n": len(self), "dim": self.dim, "seed": self.seed, "burn_in": self.burn_in,
                "method": self.method, "n_chains": self.n_chains, **self.meta}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = []
        for k in range(self.dim):
            header += [f"re{k}", f"im{k}"]
        writer.writerow(header + ["weight"])
        for p, w in zip(self.points, self.weights):
            row = []
            for c in p:
                row += [repr(float(c.real)), repr(float(c.imag))]
            writer.writerow(row + [repr(float(w))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True)


def merge(samples: Sequence[SampleSet]) -> SampleSet:
    """Concatenate samples and renormalize weights by point count."""
    pts = np.concatenate([s.points for s in samples])
    w = np.concatenate([s.weights * len(s) for s in samples])
    first = samples[0]
    return SampleSet(pts, w / w.sum(), first.seed, first.burn_in, first.method,
                     sum(s.n_chains for s in samples), {"merged": len(samples)})


@dataclass(frozen=True)
class TestFunction:
    """``|y0|^2a |y1|^2b |z|^2c / |(y0, y1, z)|_2^(2(a+b+c))``.

    With two exponents it is the analogous function on P^1.
    """

    exponents: tuple

    __test__ = False  # not a pytest class

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        e = np.asarray(self.exponents)
        if X.shape[-1] != len(e):
            raise ValueError("test function arity does not match point dimension")
        a2 = np.abs(X) ** 2
        return np.prod(a2 ** e, axis=-1) / np.sum(a2, axis=-1) ** int(e.sum())

    @property
    def name(self) -> str:
        return "phi_" + "".join(str(k) for k in self.exponents)


P2_FUNCTIONS = tuple(TestFunction(e) for e in
                     [(0, 0, 1), (1, 0, 0), (0, 1, 0), (1, 0, 1), (1, 1, 0), (0, 1, 1)])
P1_FUNCTIONS = tuple(TestFunction(e) for e in [(1, 0), (1, 1), (2, 0)])


# ---------------------------------------------------------------------------
# Jackknife integration
# ---------------------------------------------------------------------------


def jackknife(values: np.ndarray, weights: Optional[np.ndarray] = None,
              blocks: int = JACKKNIFE_BLOCKS) -> tuple[float, float]:
    """Weighted mean and delete-one-block jackknife standard error.

    Blocks are contiguous slices of the input order.
    """
    v = np.asarray(values, dtype=float)
    w = np.full(len(v), 1.0 / len(v)) if weights is None else np.asarray(weights, dtype=float)
    total_w = math.fsum(w)
    mean = math.fsum(w * v) / total_w
    nb = min(blocks, len(v))
    if nb < 2:
        return mean, math.inf
    edges = np.linspace(0, len(v), nb + 1).astype(int)
    bw = np.add.reduceat(w, edges[:-1])
    bwv = np.add.reduceat(w * v, edges[:-1])
    loo = (math.fsum(w * v) - bwv) / (total_w - bw)
    se = math.sqrt((nb - 1) / nb * float(np.sum((loo - loo.mean()) ** 2)))
    return mean, se


def jackknife_rows(values: np.ndarray, weights: Optional[np.ndarray] = None,
                   blocks: int = JACKKNIFE_BLOCKS) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`jackknife` for a (rows, N) array sharing one weight vector."""
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    total_w = w.sum()
    wv = v * w
    sums = wv.sum(axis=-1)
    mean = sums / total_w
    nb = min(blocks, n)
    if nb < 2:
        return mean, np.full(mean.shape, math.inf)
    edges = np.linspace(0, n, nb + 1).astype(int)
    bw = np.add.reduceat(w, edges[:-1])
    bwv = np.add.reduceat(wv, edges[:-1], axis=-1)
    loo = (sums[..., None] - bwv) / (total_w - bw)
    se = np.sqrt((nb - 1) / nb * np.sum((loo - loo.mean(axis=-1, keepdims=True)) ** 2, axis=-1))
    return mean, se


def integrate(sample: SampleSet, phi: Callable) -> tuple[float, float]:
    """Weighted mean of ``phi`` over the sample with its jackknife SE."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    return jackknife(phi(sample.points), sample.weights)


def combined_se(*ses: float) -> float:
    return math.sqrt(sum(s * s for s in ses))


def bias_floor(d: int, burn_in: int = DEFAULT_BURN_IN, depth: int = DEFAULT_DEPTH) -> float:
    """Bound on the initial-condition bias left by finite burn-in and chain depth.

    Backward chains contract the influence of their starting point by a
    factor ``d`` per step.  Standard errors do not see this deterministic
    offset, which matters only when the SE itself is near rounding level
    (exactly solvable maps).
    """
    return float(d) ** -min(burn_in, depth)


# ---------------------------------------------------------------------------
# Backward-orbit samplers
# ---------------------------------------------------------------------------


def _chain_layout(N: int, n_chains: Optional[int]) -> tuple[int, int]:
    if n_chains is None:
        n_chains = min(N, DEFAULT_CHAINS)
    n_chains = max(1, min(n_chains, N))
    return n_chains, math.ceil(N / n_chains)


def _generic_points(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    X = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    return normalize_max(X)


def _run_chains(step, X: np.ndarray, rng: np.random.Generator, d: int, burn_in: int,
                length: int, n_choices: int) -> np.ndarray:
    out = np.empty((X.shape[0], length, X.shape[-1]), complex)
    for k in range(burn_in + length):
        choice = rng.integers(0, d, size=(n_choices, X.shape[0]))
        X = step(X, choice)
        if k >= burn_in:
            out[:, k - burn_in] = X
    return out


def _finish(out: np.ndarray, N: int, seed: int, burn_in: int, method: str, n_chains: int,
            meta: Optional[dict] = None) -> SampleSet:
    pts = out.reshape(-1, out.shape[-1])
    if len(pts) > N:
        # keep whole chain prefixes: drop trailing points of the last chains
        length = out.shape[1]
        keep = np.ones(out.shape[:2], bool)
        excess = len(pts) - N
        keep[n_chains - excess:, length - 1] = False
        pts = out[keep]
    return SampleSet(pts, np.full(len(pts), 1.0 / len(pts)), seed, burn_in, method, n_chains,
                     meta or {})


def sample_base(f: FiberedMap, N: int, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
                n_chains: Optional[int] = None) -> SampleSet:
    """Sample ``mu_theta`` by uniformly random backward orbits of the base map."""
    require_valid(f)
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    n_chains, length = _chain_layout(N, n_chains)
    m = f.arrays
    y = _generic_points(rng, n_chains, 2)
    out = _run_chains(lambda Y, c: backward_step_base(m, Y, c[0], seed), y, rng, f.d,
                      burn_in, length, 1)
    return _finish(out, N, seed, burn_in, "backward-orbit", n_chains)


def sample_equilibrium(f: FiberedMap, N: int, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
                       n_chains: Optional[int] = None) -> SampleSet:
    """Sample ``mu_f`` by uniformly random backward orbits on P^2.

    Each step picks one of the ``d`` base preimages, then one of the ``d``
    fiber preimages over it, so every one of the ``d^2`` preimages (counted
    with multiplicity) is equally likely.
    """
    require_valid(f)
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    n_chains, length = _chain_layout(N, n_chains)
    m = f.arrays
    X = _generic_points(rng, n_chains, 3)
    out = _run_chains(lambda Y, c: backward_step(m, Y, c[0], c[1], seed), X, rng, f.d,
                      burn_in, length, 2)
    return _finish(out, N, seed, burn_in, "backward-orbit", n_chains)


def base_orbit(m: MapArrays, lifts: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Forward base orbit lifts ``s_0..s_depth`` and scalars ``lam_i`` with ``Theta(s_i) = lam_i s_{i+1}``."""
    s = [normalize_lift(lifts)]
    lam = []
    for _ in range(depth):
        th = m.theta(s[-1])
        nxt = normalize_lift(th)
        lam.append(np.sum(np.conj(nxt) * th, axis=-1) / np.sum(np.abs(nxt) ** 2, axis=-1))
        s.append(nxt)
    return np.stack(s), np.stack(lam) if lam else np.zeros((0,) + lifts.shape[:-1], complex)


def fiber_chains(m: MapArrays, lifts: np.ndarray, K: int, rng: np.random.Generator,
                 depth: int = DEFAULT_DEPTH, seed: int = 0) -> np.ndarray:
    """``K`` fiber-measure samples over each base lift; returns shape ``(M, K, 3)``.

    Starts from a generic fiber coordinate over ``theta^depth(a)`` and pulls it
    back one fiber at a time, following a uniformly chosen root of
    ``R(s_i, w) = lam_i w'`` at each step.
    """
    lifts = np.asarray(lifts, complex).reshape(-1, 2)
    M = len(lifts)
    s, lam = base_orbit(m, lifts, depth)
    w = rng.normal(size=(M, K)) + 1j * rng.normal(size=(M, K))
    for i in range(depth - 1, -1, -1):
        coeffs = np.broadcast_to(m.fiber_coeffs(s[i])[:, None, :], (M, K, m.d + 1)).copy()
        coeffs[..., 0] -= lam[i][:, None] * w
        if np.any(np.abs(coeffs[..., -1]) == 0):
            raise DegenerateFiber("fiber form lost its leading coefficient")
        wr = batch_roots(coeffs, seed=seed)
        choice = rng.integers(0, m.d, size=(M, K))
        w = np.take_along_axis(wr, choice[..., None], axis=-1)[..., 0]
        if not np.all(np.isfinite(w)):
            raise DegenerateFiber("non-finite fiber preimage")
    pts = np.concatenate([np.broadcast_to(s[0][:, None, :], (M, K, 2)), w[..., None]], axis=-1)
    return normalize_max(pts)


def avoid_crit_theta(f: FiberedMap, lifts: np.ndarray, rng: np.random.Generator,
                     radius: float = CRIT_EXCLUSION) -> np.ndarray:
    """Perturb base points within ``radius`` (chordal) of a critical point of ``theta``."""
    lifts = np.array(lifts, complex).reshape(-1, 2)
    crit = crit_theta_points(f)
    if len(crit) == 0:
        return lifts
    dist = chordal(lifts[:, None, :], crit[None, :, :]).min(axis=1)
    close = dist < radius
    if close.any():
        log.warning("perturbing %d base point(s) within %g of a critical point of theta",
                    int(close.sum()), radius)
        kick = rng.normal(size=(close.sum(), 2)) + 1j * rng.normal(size=(close.sum(), 2))
        lifts[close] = normalize_max(lifts[close] + 10 * radius * kick)
    return lifts


def sample_fiber_measure(f: FiberedMap, a, N: int, seed: int = 0,
                         depth: int = DEFAULT_DEPTH) -> SampleSet:
    """Sample the fiber measure ``mu_a`` on the line over the base point ``a``."""
    require_valid(f)
    rng = np.random.default_rng(seed)
    lift = np.asarray(getattr(a, "coords", a), complex)[:2]
    lift = avoid_crit_theta(f, lift, rng)
    pts = fiber_chains(f.arrays, lift, N, rng, depth, seed)[0]
    return SampleSet(pts, np.full(N, 1.0 / N), seed, 0, "fiber-chain", N, {"depth": depth})


def nested_integral(f: FiberedMap, phi: Callable, base: SampleSet, K: int, seed: int = 0,
                    depth: int = DEFAULT_DEPTH) -> tuple[float, float]:
    """``int (int phi d mu_a) d mu_theta(a)`` with ``K`` fiber samples per base point.

    The SE is the jackknife over base-point blocks of the inner means.
    """
    rng = np.random.default_rng(seed)
    lifts = avoid_crit_theta(f, base.points, rng)
    inner = np.empty(len(lifts))
    chunk = max(1, 200_000 // max(K, 1))
    for start in range(0, len(lifts), chunk):
        pts = fiber_chains(f.arrays, lifts[start:start + chunk], K, rng, depth, seed)
        inner[start:start + chunk] = phi(pts).mean(axis=1)
    return jackknife(inner, base.weights)


# ---------------------------------------------------------------------------
# Periodic points of the base
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Cycle:
    """A base cycle: normalized lifts ``points[i+1] ~ theta(points[i])``."""

    points: np.ndarray
    multiplicity: int = 1
    residual: float = 0.0

    @property
    def period(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class PeriodicSet:
    n: int
    cycles: tuple

    @property
    def count(self) -> int:
        """Number of period-``n`` points counted with multiplicity."""
        return sum(c.period * c.multiplicity for c in self.cycles)

    def points(self) -> np.ndarray:
        return np.concatenate([c.points for c in self.cycles])

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.cycles)


def _rotation(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, _ = np.linalg.qr(Z)
    return q


def _periodic_ratio(m: MapArrays, U: np.ndarray, n: int):
    """Newton ratio of ``y1 Theta^n_0(y) - y0 Theta^n_1(y)`` at ``y = U (t, 1)``, by iteration."""
    def ratio(t):
        y = t[..., None] * U[:, 0] + U[:, 1]
        dy = np.broadcast_to(U[:, 0], y.shape)
        Y, dY = y.copy(), dy.copy()
        for _ in range(n):
            J = m.dtheta(Y)
            dY = np.einsum("...ij,...j->...i", J, dY)
            Y = m.theta(Y)
            sc = np.max(np.abs(Y), axis=-1, keepdims=True)
            Y, dY = Y / sc, dY / sc
        g = y[..., 1] * Y[..., 0] - y[..., 0] * Y[..., 1]
        dg = dy[..., 1] * Y[..., 0] + y[..., 1] * dY[..., 0] - dy[..., 0] * Y[..., 1] - y[..., 0] * dY[..., 1]
        return g / dg
    return ratio


def _theta_iter(m: MapArrays, y: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        y = normalize_max(m.theta(y))
    return y


def periodic_base_points(f: FiberedMap, n: int, seed: int = 0) -> PeriodicSet:
    """All solutions of ``theta^n(a) = a`` on P^1 (``d^n + 1`` with multiplicity), grouped into cycles.

    The expanded form ``y1 Theta^n_0 - y0 Theta^n_1`` only seeds the solver;
    Aberth iterations are then rerun with values and derivatives from
    iterated evaluation of ``Theta``, in a randomly rotated chart so that no
    root sits at infinity.
    """
    require_valid(f)
    d = f.d
    deg = d**n + 1
    if d**n > MAX_PERIODIC_DEGREE:
        raise ValueError(f"d^n = {d**n} exceeds {MAX_PERIODIC_DEGREE}")
    m = f.arrays
    pair = (f.theta0, f.theta1)
    it = pair
    for _ in range(n - 1):
        it = compose_binary_pair(pair, it)
    # y1 * It0 - y0 * It1; y0 is the form [1, 0] (a^1) and y1 is [0, 1] (b^1)
    form = BinaryForm([0.0, 1.0]) * it[0] - BinaryForm([1.0, 0.0]) * it[1]
    U = _rotation(seed + 17)
    Uinv = np.linalg.inv(U)
    seeds = np.array(roots_binary_seed(form, seed), complex)
    rot = seeds @ Uinv.T
    with np.errstate(all="ignore"):
        t0 = rot[:, 0] / rot[:, 1]
    bad = ~np.isfinite(t0) | (np.abs(t0) > 1e8)
    t0 = np.where(np.isfinite(t0), t0, 0)
    t0[bad] = 1e3 * np.exp(2j * np.pi * np.arange(bad.sum()) / max(1, bad.sum()))
    rng = np.random.default_rng(seed)
    t0 = t0 + 1e-9 * (rng.normal(size=t0.shape) + 1j * rng.normal(size=t0.shape)) * np.maximum(1, np.abs(t0))
    t, converged = _aberth_polish(_periodic_ratio(m, U, n), t0)
    pts = normalize_max(t[:, None] * U[:, 0] + U[:, 1])
    img = _theta_iter(m, pts, n)
    resid = chordal(img, pts)
    unpolished = int(np.sum(resid > PERIODIC_RESIDUAL))
    if unpolished:
        raise NonConvergence(f"{unpolished} periodic point(s) above residual {PERIODIC_RESIDUAL:g}",
                             unconverged=unpolished)
    result = PeriodicSet(n, tuple(_group_cycles(m, pts, resid)))
    if result.count != deg:
        raise NonConvergence(f"cycle grouping found {result.count} of {deg} periodic points",
                             unconverged=abs(deg - result.count))
    return result


def _aberth_polish(ratio, t0, maxiter: int = 200):
    return aberth(ratio, t0, maxiter=maxiter, eps=1e-15)


def roots_binary_seed(form: BinaryForm, seed: int) -> np.ndarray:
    """Seeds from the expanded form as normalized pairs (roots repeated by multiplicity)."""
    with np.errstate(all="ignore"):
        return batch_binary_roots(np.asarray(form.coeffs, complex), seed=seed)


def _group_cycles(m: MapArrays, pts: np.ndarray, resid: np.ndarray) -> list:
    # merge numerically coincident points into one with multiplicity
    n = len(pts)
    dist = chordal(pts[:, None, :], pts[None, :, :])
    rep = np.arange(n)
    for i in range(n):
        if rep[i] != i:
            continue
        close = np.flatnonzero((dist[i] < 1e-7) & (np.arange(n) > i))
        rep[close] = i
    uniq = np.unique(rep)
    mult = {int(u): int(np.sum(rep == u)) for u in uniq}
    upts = pts[uniq]
    ures = np.array([resid[rep == u].max() for u in uniq])
    img = normalize_max(m.theta(upts))
    nxt = np.argmin(chordal(img[:, None, :], upts[None, :, :]), axis=1)
    seen = np.zeros(len(uniq), bool)
    cycles = []
    for i in range(len(uniq)):
        if seen[i]:
            continue
        orbit = [i]
        seen[i] = True
        j = nxt[i]
        while j != i and not seen[j]:
            orbit.append(j)
            seen[j] = True
            j = nxt[j]
        cycles.append(Cycle(np.array([normalize_lift(upts[k]) for k in orbit]),
                            mult[int(uniq[orbit[0]])], float(ures[orbit].max())))
    return cycles
