"""Complex polynomial arithmetic: univariate polynomials, binary and ternary forms.

Conventions
-----------
* ``UniPoly.coeffs[k]`` multiplies ``t**k`` (ascending powers).
* ``BinaryForm.coeffs[j]`` multiplies ``a**(d-j) * b**j``.  Setting ``a = 1``
  turns a binary form into the univariate polynomial in ``b`` with the same
  coefficient array, which is how products and compositions are computed.
* ``TernaryForm.terms`` maps exponent triples ``(i, j, l)`` of
  ``y0**i * y1**j * z**l`` to coefficients.

Root finding uses Aberth-Ehrlich simultaneous iteration followed by Newton
polishing.  The batched kernels (``batch_roots``, ``batch_binary_roots``) work
on stacks of polynomials of one degree and are what the samplers use.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInput, NonConvergence

DEFAULT_COMPOSE_CAP = 4096
UNDERFLOW = 1e-300
CLUSTER_RADIUS = 1e-7
DEFAULT_ROOT_TOL = 1e-10


def _as_complex_array(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=complex).ravel()
    if arr.size == 0:
        raise DegenerateInput("empty coefficient list")
    return arr


def _strip(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs != 0)
    if nz.size == 0:
        return coeffs[:1] * 0
    return coeffs[: nz[-1] + 1]


def _pair(c: complex) -> list[float]:
    c = complex(c)
    return [c.real, c.imag]


def _unpair(p) -> complex:
    if isinstance(p, (int, float, complex)):
        return complex(p)
    return complex(p[0], p[1])


# ---------------------------------------------------------------------------
# Univariate polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UniPoly:
    """Univariate complex polynomial with exact degree bookkeeping.

    Trailing zero coefficients are stripped on construction, so ``degree`` is
    the index of the leading nonzero coefficient.  The zero polynomial is
    allowed and flagged through ``is_zero`` (its degree is reported as 0).
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = _strip(_as_complex_array(self.coeffs))
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.coeffs == 0))

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    def __call__(self, t):
        return horner(self.coeffs, t)

    def derivative(self) -> "UniPoly":
        if self.degree == 0:
            return UniPoly([0.0])
        k = np.arange(1, self.degree + 1)
        return UniPoly(self.coeffs[1:] * k)

    def __add__(self, other: "UniPoly") -> "UniPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        out = np.zeros(n, complex)
        out[: len(self.coeffs)] += self.coeffs
        out[: len(other.coeffs)] += other.coeffs
        return UniPoly(out)

    def __sub__(self, other: "UniPoly") -> "UniPoly":
        return self + UniPoly(-other.coeffs)

    def __mul__(self, other):
        if isinstance(other, UniPoly):
            return UniPoly(np.convolve(self.coeffs, other.coeffs))
        return UniPoly(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, UniPoly) and np.array_equal(self.coeffs, other.coeffs)

    def allclose(self, other: "UniPoly", rtol=1e-12, atol=0.0) -> bool:
        if self.degree != other.degree:
            return False
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def compose(self, inner: "UniPoly", cap: int = DEFAULT_COMPOSE_CAP) -> "UniPoly":
        return compose(self, inner, cap=cap)

    def norm1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [_pair(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "UniPoly":
        poly = cls([_unpair(c) for c in obj["coeffs"]])
        if "degree" in obj and int(obj["degree"]) != poly.degree:
            raise ValueError(f"declared degree {obj['degree']} != actual {poly.degree}")
        return poly

    def __repr__(self):
        return f"UniPoly({np.array2string(self.coeffs, precision=6)})"


def horner(coeffs, t):
    """Evaluate an ascending coefficient array at ``t`` (scalar or array)."""
    coeffs = np.asarray(coeffs)
    out = np.zeros(np.shape(t), dtype=complex) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * t + c
    if np.ndim(out) == 0:
        return complex(out)
    return out


def horner_with_derivative(coeffs, t):
    coeffs = np.asarray(coeffs)
    p = np.zeros(np.shape(t), dtype=complex) + coeffs[-1]
    dp = np.zeros_like(p)
    for c in coeffs[-2::-1]:
        dp = dp * t + p
        p = p * t + c
    return p, dp


def compose(outer: UniPoly, inner: UniPoly, cap: int = DEFAULT_COMPOSE_CAP) -> UniPoly:
    """Coefficients of ``outer(inner(t))``.

    Raises ``OverflowError`` when the product degree exceeds ``cap``.
    """
    if outer.degree * inner.degree > cap:
        raise OverflowError(
            f"composed degree {outer.degree * inner.degree} exceeds cap {cap}"
        )
    result = np.array([outer.coeffs[-1]], dtype=complex)
    for c in outer.coeffs[-2::-1]:
        result = np.convolve(result, inner.coeffs)
        result[0] += c
    return UniPoly(result)


# ---------------------------------------------------------------------------
# Binary forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinaryForm:
    """Homogeneous polynomial of degree ``d`` in two variables ``(a, b)``."""

    coeffs: np.ndarray
    degree: int = -1

    def __post_init__(self):
        arr = _as_complex_array(self.coeffs).copy()
        deg = self.degree
        if deg < 0:
            deg = len(arr) - 1
        if len(arr) < deg + 1:
            arr = np.concatenate([arr, np.zeros(deg + 1 - len(arr), complex)])
        if len(arr) != deg + 1:
            raise ValueError(f"binary form of degree {deg} needs {deg + 1} coefficients")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "degree", deg)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.coeffs == 0))

    def __call__(self, a, b):
        return eval_binary(self.coeffs, a, b)

    def derivative(self, index: int) -> "BinaryForm":
        """Partial derivative in ``a`` (index 0) or ``b`` (index 1)."""
        d = self.degree
        if d == 0:
            return BinaryForm([0.0], 0)
        j = np.arange(d + 1)
        if index == 0:
            out = (self.coeffs * (d - j))[:-1]
        elif index == 1:
            out = (self.coeffs * j)[1:]
        else:
            raise IndexError("binary forms have variable indices 0 and 1")
        return BinaryForm(out, d - 1)

    def __mul__(self, other):
        if isinstance(other, BinaryForm):
            return BinaryForm(np.convolve(self.coeffs, other.coeffs), self.degree + other.degree)
        return BinaryForm(self.coeffs * complex(other), self.degree)

    __rmul__ = __mul__

    def __add__(self, other: "BinaryForm") -> "BinaryForm":
        if other.degree != self.degree:
            raise ValueError("cannot add binary forms of different degree")
        return BinaryForm(self.coeffs + other.coeffs, self.degree)

    def __sub__(self, other: "BinaryForm") -> "BinaryForm":
        return self + (-1.0) * other

    def dehomogenize(self) -> UniPoly:
        """The polynomial ``t -> form(t, 1)``."""
        return UniPoly(self.coeffs[::-1])

    def norm1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [_pair(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "BinaryForm":
        return cls([_unpair(c) for c in obj["coeffs"]], int(obj["degree"]))

    @classmethod
    def from_unipoly(cls, p: UniPoly, degree: int) -> "BinaryForm":
        """Homogenize ``p`` to ``b**degree * p(a/b)``."""
        if p.degree > degree:
            raise ValueError("polynomial degree exceeds homogenization degree")
        c = np.zeros(degree + 1, complex)
        c[degree - p.degree:] = p.coeffs[::-1]
        return cls(c, degree)

    def __repr__(self):
        return f"BinaryForm(d={self.degree}, {np.array2string(self.coeffs, precision=6)})"


def eval_binary(coeffs, a, b):
    """Evaluate ``sum_j c_j a^(d-j) b^j``; broadcasts over leading axes of ``coeffs``."""
    coeffs = np.asarray(coeffs)
    a = np.asarray(a)
    b = np.asarray(b)
    out = coeffs[..., 0] * np.ones(np.broadcast(a, b).shape)
    for j in range(1, coeffs.shape[-1]):
        out = out * a + coeffs[..., j] * b**j
    # out currently equals sum c_j a^(d-j) b^j computed by Horner in a
    if out.ndim == 0:
        return complex(out)
    return out


def compose_binary_pair(outer: tuple[BinaryForm, BinaryForm],
                        inner: tuple[BinaryForm, BinaryForm],
                        cap: int = DEFAULT_COMPOSE_CAP) -> tuple[BinaryForm, BinaryForm]:
    """Compose two maps of P^1 given as pairs of binary forms."""
    d, e = outer[0].degree, inner[0].degree
    if d * e > cap:
        raise OverflowError(f"composed degree {d * e} exceeds cap {cap}")
    p0 = [np.array([1.0 + 0j])]
    p1 = [np.array([1.0 + 0j])]
    for _ in range(d):
        p0.append(np.convolve(p0[-1], inner[0].coeffs))
        p1.append(np.convolve(p1[-1], inner[1].coeffs))
    result = []
    for form in outer:
        acc = np.zeros(d * e + 1, complex)
        for j, c in enumerate(form.coeffs):
            if c != 0:
                acc += c * np.convolve(p0[d - j], p1[j])
        result.append(BinaryForm(acc, d * e))
    return result[0], result[1]


def resultant(f: BinaryForm, g: BinaryForm) -> complex:
    """Resultant of two binary forms (Sylvester determinant)."""
    m, n = f.degree, g.degree
    size = m + n
    if size == 0:
        return complex(1.0)
    syl = np.zeros((size, size), complex)
    for i in range(n):
        syl[i, i:i + m + 1] = f.coeffs
    for i in range(m):
        syl[n + i, i:i + n + 1] = g.coeffs
    return complex(np.linalg.det(syl))


# ---------------------------------------------------------------------------
# Ternary forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TernaryForm:
    """Homogeneous polynomial in ``(y0, y1, z)``; zero terms are dropped."""

    terms: dict
    degree: int

    def __post_init__(self):
        clean = {}
        for exp, c in dict(self.terms).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != 3 or min(exp) < 0:
                raise ValueError(f"bad exponent triple {exp}")
            if sum(exp) != self.degree:
                raise ValueError(f"exponent {exp} does not sum to degree {self.degree}")
            c = complex(c)
            if c != 0:
                clean[exp] = clean.get(exp, 0j) + c
        object.__setattr__(self, "terms", clean)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exp) -> complex:
        return self.terms.get(tuple(exp), 0j)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponent table ``(T, 3)`` and coefficient vector ``(T,)``."""
        if not self.terms:
            return np.zeros((1, 3), int) + [self.degree, 0, 0], np.zeros(1, complex)
        exps = np.array(sorted(self.terms), dtype=int)
        coeffs = np.array([self.terms[tuple(e)] for e in exps], dtype=complex)
        return exps, coeffs

    def __call__(self, y0, y1, z):
        exps, coeffs = self.arrays()
        return eval_ternary(exps, coeffs, y0, y1, z)

    def derivative(self, index: int) -> "TernaryForm":
        if self.degree == 0:
            return TernaryForm({}, 0)
        out = {}
        for exp, c in self.terms.items():
            if exp[index] > 0:
                new = list(exp)
                new[index] -= 1
                out[tuple(new)] = c * exp[index]
        return TernaryForm(out, self.degree - 1)

    def restrict_to_fiber(self, s0: complex, s1: complex) -> BinaryForm:
        """The binary form ``(a, b) -> R(a*s0, a*s1, b)``."""
        d = self.degree
        c = np.zeros(d + 1, complex)
        for (i, j, l), coef in self.terms.items():
            c[l] += coef * s0**i * s1**j
        return BinaryForm(c, d)

    def norm1(self) -> float:
        return float(sum(abs(c) for c in self.terms.values()))

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "terms": [{"exp": list(e), "c": _pair(c)} for e, c in sorted(self.terms.items())],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TernaryForm":
        terms = {}
        for t in obj["terms"]:
            key = tuple(t["exp"])
            terms[key] = terms.get(key, 0j) + _unpair(t["c"])
        return cls(terms, int(obj["degree"]))

    def __repr__(self):
        body = " + ".join(f"({c:.4g})y0^{i}y1^{j}z^{l}" for (i, j, l), c in sorted(self.terms.items()))
        return f"TernaryForm(d={self.degree}, {body or '0'})"


def eval_ternary(exps, coeffs, y0, y1, z):
    """Evaluate a ternary form from its exponent table; ``coeffs`` may carry batch axes."""
    y0 = np.asarray(y0, dtype=complex)[..., None]
    y1 = np.asarray(y1, dtype=complex)[..., None]
    z = np.asarray(z, dtype=complex)[..., None]
    mono = y0 ** exps[:, 0] * y1 ** exps[:, 1] * z ** exps[:, 2]
    out = np.sum(coeffs * mono, axis=-1)
    if out.ndim == 0:
        return complex(out)
    return out


# ---------------------------------------------------------------------------
# Roots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Root:
    value: complex
    multiplicity: int
    residual: float

    @property
    def is_infinite(self) -> bool:
        return cmath.isinf(self.value)


@dataclass(frozen=True)
class RootSet:
    roots: tuple
    degree: int
    tol: float = DEFAULT_ROOT_TOL

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)

    @property
    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    def values(self, with_multiplicity: bool = True) -> list:
        out = []
        for r in self.roots:
            out.extend([r.value] * (r.multiplicity if with_multiplicity else 1))
        return out

    def finite(self) -> list:
        return [r for r in self.roots if not r.is_infinite]


def cauchy_bound(coeffs, iterations: int = 60) -> np.ndarray:
    """Cauchy's root bound: the positive root of ``|c_n| x^n - sum_{k<n} |c_k| x^k``.

    Every root of the polynomial (ascending coefficients) has modulus at most
    this value.  Found by bisection in ``log x`` between the largest
    ``|c_k/c_n|^(1/(n-k))`` and twice that (Fujiwara's bound).
    """
    c = np.abs(np.asarray(coeffs, dtype=complex))
    n = c.shape[-1] - 1
    ratios = c[..., :-1] / c[..., -1:]
    k = np.arange(n)
    with np.errstate(divide="ignore"):
        hi = 2.0 * np.max(ratios ** (1.0 / (n - k)), axis=-1)
    hi = np.where(hi > 0, hi, 1.0)
    lo = hi / 2.0 / max(n, 1)
    log_ratios = np.log(np.where(ratios > 0, ratios, 1e-300))

    def excess(x):
        # sum_k |c_k/c_n| x^(k-n) - 1, evaluated in logs to avoid overflow
        return np.sum(np.exp(log_ratios + (k - n) * np.log(x)[..., None]), axis=-1) - 1.0

    for _ in range(iterations):
        mid = np.sqrt(lo * hi)
        above = excess(mid) > 0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return hi


def _initial_circle(coeffs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = coeffs.shape[-1] - 1
    radius = cauchy_bound(coeffs)
    batch = coeffs.shape[:-1]
    jitter = rng.uniform(-0.25, 0.25, size=batch + (n,)) * (2 * np.pi / n)
    angles = 2 * np.pi * np.arange(n) / n + 0.4 + jitter
    # different radii per root break the symmetry of equimodular root sets
    radii = radius[..., None] * (1.0 - 0.05 * np.arange(n) / max(n, 1))
    return radii * np.exp(1j * angles)


def aberth(newton_ratio: Callable[[np.ndarray], np.ndarray], z0: np.ndarray,
           maxiter: int = 500, eps: float = 1e-14) -> tuple[np.ndarray, bool]:
    """Aberth-Ehrlich simultaneous iteration.

    ``newton_ratio(z)`` must return ``p(z)/p'(z)`` elementwise for an array of
    shape ``(..., n)``.  Returns the final iterates and a convergence flag.
    """
    z = np.array(z0, dtype=complex)
    n = z.shape[-1]
    if n == 0:
        return z, True
    active = np.ones(z.shape[:-1], bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(maxiter):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = newton_ratio(z)
            diff = z[..., :, None] - z[..., None, :]
            inv = np.where(eye, 0, 1.0 / np.where(eye, 1, diff))
            repulsion = inv.sum(axis=-1)
            w = ratio / (1.0 - ratio * repulsion)
        w = np.where(np.isfinite(w), w, 0)
        w[~active] = 0
        z = z - w
        small = np.abs(w) <= eps * np.maximum(np.abs(z), 1.0)
        active = active & ~np.all(small, axis=-1)
        if not active.any():
            return z, True
    return z, False


def _poly_ratio(coeffs):
    def ratio(z):
        p, dp = _horner_batched(coeffs, z)
        return p / dp
    return ratio


def _horner_batched(coeffs, z):
    """Horner on ``coeffs`` of shape (..., n+1) at points ``z`` of shape (..., m)."""
    p = np.zeros(z.shape, complex) + coeffs[..., -1:]
    dp = np.zeros_like(p)
    for k in range(coeffs.shape[-1] - 2, -1, -1):
        dp = dp * z + p
        p = p * z + coeffs[..., k:k + 1]
    return p, dp


def _quadratic_roots(c: np.ndarray) -> np.ndarray:
    c0, c1, c2 = c[..., 0], c[..., 1], c[..., 2]
    disc = np.sqrt(c1 * c1 - 4 * c2 * c0)
    sign = np.where((np.conj(c1) * disc).real >= 0, 1.0, -1.0)
    q = -0.5 * (c1 + sign * disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / c2
        r2 = np.where(q != 0, c0 / np.where(q != 0, q, 1), 0)
    return np.stack([r1, r2], axis=-1)


def batch_roots(coeffs, seed: int = 0, maxiter: int = 500, polish: int = 2) -> np.ndarray:
    """All roots of a stack of polynomials with nonzero leading coefficient.

    ``coeffs`` has shape ``(..., n+1)`` in ascending order; the result has
    shape ``(..., n)``.  Degrees 1 and 2 use closed forms, higher degrees use
    Aberth iteration from jittered Cauchy-radius circles.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[-1] - 1
    if n < 1:
        return np.zeros(coeffs.shape[:-1] + (0,), complex)
    if n == 1:
        return (-coeffs[..., 0] / coeffs[..., 1])[..., None]
    if n == 2:
        z = _quadratic_roots(coeffs)
    else:
        rng = np.random.default_rng(seed)
        z, _ = aberth(_poly_ratio(coeffs), _initial_circle(coeffs, rng), maxiter=maxiter)
    for _ in range(polish):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            p, dp = _horner_batched(coeffs, z)
            step = p / dp
        z = np.where(np.isfinite(step) & (np.abs(step) < 1e-3 * np.maximum(1, np.abs(z))), z - step, z)
    return z


def batch_binary_roots(coeffs, seed: int = 0) -> np.ndarray:
    """Roots of a stack of binary forms as normalized homogeneous pairs.

    ``coeffs`` has shape ``(..., d+1)`` (``a^(d-j) b^j`` convention).  Each
    form is solved in whichever affine chart has the larger leading
    coefficient.  Returns shape ``(..., d, 2)`` with max-modulus coordinate 1.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    d = coeffs.shape[-1] - 1
    batch = coeffs.shape[:-1]
    flat = coeffs.reshape(-1, d + 1)
    out = np.empty((flat.shape[0], d, 2), complex)
    in_a = np.abs(flat[:, 0]) >= np.abs(flat[:, d])
    scale = np.abs(flat).max(axis=1)
    degenerate = np.maximum(np.abs(flat[:, 0]), np.abs(flat[:, d])) <= 1e-14 * scale
    for chart, sel in ((0, in_a & ~degenerate), (1, ~in_a & ~degenerate)):
        if not sel.any():
            continue
        rows = flat[sel]
        asc = rows[:, ::-1] if chart == 0 else rows
        r = batch_roots(asc, seed=seed)
        if chart == 0:
            pts = np.stack([r, np.ones_like(r)], axis=-1)
        else:
            pts = np.stack([np.ones_like(r), r], axis=-1)
        out[sel] = pts
    for idx in np.flatnonzero(degenerate):
        rs = binary_roots(BinaryForm(flat[idx], d))
        pts = []
        for root in rs:
            pt = (1.0, 0.0) if root.is_infinite else (root.value, 1.0)
            pts.extend([pt] * root.multiplicity)
        out[idx] = np.array(pts, complex)
    out = normalize_max(out)
    return out.reshape(batch + (d, 2))


def normalize_max(x: np.ndarray) -> np.ndarray:
    """Divide homogeneous coordinates (last axis) by the max-modulus entry."""
    x = np.asarray(x, dtype=complex)
    idx = np.argmax(np.abs(x), axis=-1)
    pivot = np.take_along_axis(x, idx[..., None], axis=-1)
    return x / pivot


def _cluster(values: np.ndarray, radius: float = CLUSTER_RADIUS):
    groups: list[list[complex]] = []
    for v in sorted(values, key=lambda c: (c.real, c.imag)):
        for g in groups:
            centre = np.mean(g)
            if abs(v - centre) <= radius * max(1.0, abs(centre)):
                g.append(v)
                break
        else:
            groups.append([v])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def _residual(coeffs: np.ndarray, r: complex) -> float:
    n = len(coeffs) - 1
    return abs(horner(coeffs, r)) / (np.abs(coeffs).sum() * max(1.0, abs(r)) ** n)


def _uni_roots(coeffs: np.ndarray, tol: float, seed: int, maxiter: int) -> list[Root]:
    if np.all(np.abs(coeffs) < UNDERFLOW):
        raise DegenerateInput("all coefficients below underflow threshold")
    coeffs = _strip(coeffs)
    # roots at zero are exact; deflate them first
    nz = np.flatnonzero(coeffs != 0)
    zeros = int(nz[0])
    core = coeffs[zeros:]
    n = len(core) - 1
    found = []
    if n >= 1:
        rng = np.random.default_rng(seed)
        z0 = _initial_circle(core[None, :], rng)
        z, converged = aberth(_poly_ratio(core[None, :]), z0, maxiter=maxiter)
        z = z[0]
        for _ in range(3):
            p, dp = horner_with_derivative(core, z)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dp != 0, p / np.where(dp != 0, dp, 1), 0)
            z = z - np.where(np.abs(step) < 1e-6 * np.maximum(1, np.abs(z)), step, 0)
        for value, mult in _cluster(z):
            res = _residual(core, value)
            found.append(Root(value, mult, float(res)))
        bad = [r for r in found if r.residual > tol]
        if bad:
            raise NonConvergence(
                f"{len(bad)} roots above residual tolerance {tol:g}", unconverged=len(bad)
            )
    if zeros:
        found.append(Root(0j, zeros, 0.0))
    return found


def roots(poly, tol: float = DEFAULT_ROOT_TOL, seed: int = 0, maxiter: int = 1000) -> RootSet:
    """Roots with multiplicity of a ``UniPoly`` or ``BinaryForm``."""
    if isinstance(poly, BinaryForm):
        return binary_roots(poly, tol=tol, seed=seed, maxiter=maxiter)
    if not isinstance(poly, UniPoly):
        poly = UniPoly(poly)
    if poly.degree < 1:
        raise DegenerateInput("roots() needs degree >= 1")
    if not np.all(np.isfinite(poly.coeffs)):
        raise DegenerateInput("non-finite coefficients")
    found = _uni_roots(np.array(poly.coeffs), tol, seed, maxiter)
    return RootSet(tuple(found), poly.degree, tol)


def binary_roots(form: BinaryForm, tol: float = DEFAULT_ROOT_TOL, seed: int = 0,
                 maxiter: int = 1000) -> RootSet:
    """Roots on P^1 of a binary form; ``(1:0)`` is reported as an infinite value.

    Finite roots are the values ``a`` with ``form(a, 1) = 0``; the multiplicity
    at infinity is the number of vanishing leading coefficients.
    """
    c = np.array(form.coeffs)
    if np.all(np.abs(c) < UNDERFLOW):
        raise DegenerateInput("all coefficients below underflow threshold")
    if not np.all(np.isfinite(c)):
        raise DegenerateInput("non-finite coefficients")
    d = form.degree
    k = 0
    while k <= d and c[k] == 0:
        k += 1
    found = []
    if k < d:
        asc = c[::-1][: d - k + 1]
        found = _uni_roots(asc, tol, seed, maxiter)
    if k:
        found.append(Root(complex(math.inf, 0), k, 0.0))
    return RootSet(tuple(found), d, tol)


def expand_roots(values: Sequence[complex]) -> UniPoly:
    """Monic polynomial with the given roots."""
    out = np.array([1.0 + 0j])
    for r in values:
        out = np.convolve(out, [-r, 1.0])
    return UniPoly(out)
