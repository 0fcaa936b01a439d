"""Projective points, fibered endomorphisms of P^2 and their derivatives.

A fibered map is stored through its homogeneous lift

    F(y0, y1, z) = (Theta0(y0, y1), Theta1(y0, y1), R(y0, y1, z))

so that the projection ``[y0:y1:z] -> [y0:y1]`` semiconjugates ``f`` to the
base map ``theta``.  Points of P^2 are arrays of shape ``(..., 3)`` normalized
so the max-modulus coordinate equals 1; points of P^1 are ``(..., 2)``.

The numerical kernels take a :class:`MapArrays` bundle whose coefficient
arrays may carry leading batch axes.  That is how a whole parameter grid is
pushed through the samplers in one pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import (
    BinaryForm,
    TernaryForm,
    UniPoly,
    batch_binary_roots,
    batch_roots,
    binary_roots,
    eval_binary,
    eval_ternary,
    normalize_max,
    resultant,
    roots,
)
from .errors import InvalidMap

INFINITY_POINT = np.array([0.0, 0.0, 1.0], dtype=complex)


# ---------------------------------------------------------------------------
# Projective points
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """A point of P^1 or P^2 with max-modulus coordinate equal to 1."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=complex).ravel()
        if c.size not in (2, 3):
            raise ValueError("projective points need 2 or 3 coordinates")
        if not np.any(c != 0):
            raise ValueError("the zero vector is not a projective point")
        c = normalize_max(c)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def affine(cls, t: complex, z: Optional[complex] = None) -> "ProjPoint":
        """``[t:1]`` or ``[t:1:z]`` from affine skew-product coordinates."""
        if z is None:
            return cls([t, 1.0])
        return cls([t, 1.0, z])

    def to_affine(self):
        c = self.coords
        if c[1] == 0:
            return (math.inf,) if c.size == 2 else (math.inf, math.inf)
        if c.size == 2:
            return (complex(c[0] / c[1]),)
        return complex(c[0] / c[1]), complex(c[2] / c[1])

    def distance(self, other: "ProjPoint") -> float:
        return float(chordal(self.coords, other.coords))

    def __len__(self):
        return self.coords.size

    def __repr__(self):
        inner = ":".join(f"{complex(v):.6g}" for v in self.coords)
        return f"[{inner}]"


def _coords(x) -> np.ndarray:
    return x.coords if isinstance(x, ProjPoint) else np.asarray(x, dtype=complex)


def chordal(x, y) -> np.ndarray:
    """Fubini-Study chordal distance ``|x ^ y| / (|x| |y|)``; broadcasts."""
    x = _coords(x)
    y = _coords(y)
    nx2 = np.sum(np.abs(x) ** 2, axis=-1)
    ny2 = np.sum(np.abs(y) ** 2, axis=-1)
    n = x.shape[-1]
    # explicit 2x2 minors; |x|^2|y|^2 - |<x,y>|^2 cancels catastrophically
    wedge2 = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            wedge2 = wedge2 + np.abs(x[..., i] * y[..., j] - x[..., j] * y[..., i]) ** 2
    return np.sqrt(wedge2 / (nx2 * ny2))


def normalize_lift(s) -> np.ndarray:
    """Max-modulus 1 with the first nonzero coordinate real-positive."""
    s = np.asarray(s, dtype=complex)
    s = s / np.max(np.abs(s), axis=-1, keepdims=True)
    first = np.where(np.abs(s[..., 0:1]) > 1e-300, s[..., 0:1], s[..., 1:2])
    return s * (np.abs(first) / first)


# ---------------------------------------------------------------------------
# Coefficient bundle used by all kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MapArrays:
    """Dense coefficient arrays of a lift, optionally batched.

    ``th0``, ``th1`` have shape ``batch + (d+1,)``; ``rc`` has shape
    ``batch + (T,)`` matching the exponent table ``exps`` of shape ``(T, 3)``.
    """

    d: int
    th0: np.ndarray
    th1: np.ndarray
    exps: np.ndarray
    rc: np.ndarray

    @property
    def batch_shape(self) -> tuple:
        return self.th0.shape[:-1]

    def expand(self, axis_len: int) -> "MapArrays":
        """Insert a trailing batch axis (for per-chain broadcasting)."""
        return MapArrays(self.d, self.th0[..., None, :], self.th1[..., None, :],
                         self.exps, self.rc[..., None, :])

    def take(self, index) -> "MapArrays":
        return MapArrays(self.d, self.th0[index], self.th1[index], self.exps, self.rc[index])

    # -- evaluation -------------------------------------------------------
    def theta(self, y: np.ndarray) -> np.ndarray:
        a, b = y[..., 0], y[..., 1]
        return np.stack(np.broadcast_arrays(eval_binary(self.th0, a, b),
                                            eval_binary(self.th1, a, b)), axis=-1)

    def lift(self, X: np.ndarray) -> np.ndarray:
        a, b, z = X[..., 0], X[..., 1], X[..., 2]
        r = eval_ternary(self.exps, self.rc, a, b, z)
        return np.stack(np.broadcast_arrays(eval_binary(self.th0, a, b),
                                            eval_binary(self.th1, a, b), r), axis=-1)

    def _dz_table(self):
        mask = self.exps[:, 2] > 0
        exps = self.exps[mask].copy()
        factor = exps[:, 2].astype(float)
        exps[:, 2] -= 1
        return exps, self.rc[..., mask] * factor

    def r_z(self, X: np.ndarray) -> np.ndarray:
        exps, coeffs = self._dz_table()
        if exps.shape[0] == 0:
            return np.zeros(X.shape[:-1], complex)
        return eval_ternary(exps, coeffs, X[..., 0], X[..., 1], X[..., 2])

    def r_grad(self, X: np.ndarray) -> np.ndarray:
        out = []
        for k in range(3):
            mask = self.exps[:, k] > 0
            exps = self.exps[mask].copy()
            if exps.shape[0] == 0:
                out.append(np.zeros(np.broadcast(X[..., 0], self.rc[..., 0]).shape, complex))
                continue
            coeffs = self.rc[..., mask] * exps[:, k]
            exps[:, k] -= 1
            out.append(eval_ternary(exps, coeffs, X[..., 0], X[..., 1], X[..., 2]))
        return np.stack(np.broadcast_arrays(*out), axis=-1)

    def dtheta(self, y: np.ndarray) -> np.ndarray:
        """Jacobian matrix of the base lift, shape ``(..., 2, 2)``."""
        d = self.d
        j = np.arange(d + 1)
        a, b = y[..., 0], y[..., 1]
        rows = []
        for th in (self.th0, self.th1):
            da = (th * (d - j))[..., :-1]
            db = (th * j)[..., 1:]
            rows.append(np.stack([eval_binary(da, a, b), eval_binary(db, a, b)], axis=-1))
        return np.stack(rows, axis=-2)

    def det_dtheta(self, y: np.ndarray) -> np.ndarray:
        m = self.dtheta(y)
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]

    # -- fiber restrictions -----------------------------------------------
    def fiber_coeffs(self, s: np.ndarray) -> np.ndarray:
        """Ascending coefficients in ``w`` of ``R(s0, s1, w)``, shape ``(..., d+1)``."""
        s0, s1 = s[..., 0:1], s[..., 1:2]
        mono = s0 ** self.exps[:, 0] * s1 ** self.exps[:, 1]
        contrib = self.rc * mono
        out = np.zeros(contrib.shape[:-1] + (self.d + 1,), complex)
        for t, l in enumerate(self.exps[:, 2]):
            out[..., l] += contrib[..., t]
        return out

    def critical_fiber_coeffs(self, s: np.ndarray) -> np.ndarray:
        """Ascending coefficients in ``w`` of ``dR/dz(s0, s1, w)``, degree d-1."""
        c = self.fiber_coeffs(s)
        return c[..., 1:] * np.arange(1, self.d + 1)

    def z_leading(self) -> np.ndarray:
        sel = self.exps[:, 2] == self.d
        if not sel.any():
            return np.zeros(self.batch_shape, complex)
        return self.rc[..., np.flatnonzero(sel)[0]]


# ---------------------------------------------------------------------------
# FiberedMap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "value": c.value, "threshold": c.threshold, "passed": c.passed}
                for c in self.checks
            ],
        }


@dataclass(frozen=True, eq=False)
class FiberedMap:
    """Degree-d endomorphism of P^2 preserving ``[y0:y1:z] -> [y0:y1]``.

    ``affine`` optionally records the skew-product view ``(p, q)`` where
    ``p`` is a :class:`UniPoly` and ``q`` maps ``(i, l)`` to the coefficient
    of ``t**i z**l``.  ``transform`` optionally stores a 3x3 matrix taking
    these fiber-adapted coordinates back to the coordinates the map was
    originally written in.
    """

    theta0: BinaryForm
    theta1: BinaryForm
    R: TernaryForm
    name: str = ""
    affine: Optional[tuple] = None
    transform: Optional[np.ndarray] = None
    _arrays: MapArrays = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = self.R.degree
        if self.theta0.degree != d or self.theta1.degree != d:
            raise ValueError("Theta0, Theta1 and R must share one degree")
        exps, rc = self.R.arrays()
        arrays = MapArrays(d, np.array(self.theta0.coeffs), np.array(self.theta1.coeffs), exps, rc)
        object.__setattr__(self, "_arrays", arrays)

    @property
    def d(self) -> int:
        return self.R.degree

    @property
    def arrays(self) -> MapArrays:
        return self._arrays

    @classmethod
    def from_skew(cls, p, q: dict, d: Optional[int] = None, name: str = "") -> "FiberedMap":
        """Homogenize a polynomial skew product ``(t, z) -> (p(t), q(t, z))``."""
        p = p if isinstance(p, UniPoly) else UniPoly(p)
        q = {tuple(k): complex(v) for k, v in q.items() if complex(v) != 0}
        if d is None:
            d = max(p.degree, max(i + l for i, l in q))
        th0 = BinaryForm.from_unipoly(p, d)
        th1 = BinaryForm([0.0] * d + [1.0], d)
        terms = {}
        for (i, l), c in q.items():
            if i + l > d:
                raise ValueError(f"term t^{i} z^{l} exceeds degree {d}")
            terms[(i, d - i - l, l)] = c
        return cls(th0, th1, TernaryForm(terms, d), name=name, affine=(p, q))

    def scaled(self, c: complex) -> "FiberedMap":
        """Same map, lift multiplied by the constant ``c``."""
        return FiberedMap(self.theta0 * c, self.theta1 * c,
                          TernaryForm({k: v * c for k, v in self.R.terms.items()}, self.d),
                          name=self.name, transform=self.transform)

    # -- JSON -----------------------------------------------------------
    def to_json(self) -> dict:
        obj = {
            "d": self.d,
            "theta0": self.theta0.to_json(),
            "theta1": self.theta1.to_json(),
            "R": self.R.to_json(),
        }
        if self.name:
            obj["name"] = self.name
        if self.affine is not None:
            p, q = self.affine
            obj["affine"] = {
                "p": p.to_json(),
                "q": [{"exp": [i, l], "c": [complex(c).real, complex(c).imag]} for (i, l), c in sorted(q.items())],
            }
        if self.transform is not None:
            obj["transform"] = [[[complex(v).real, complex(v).imag] for v in row] for row in self.transform]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "FiberedMap":
        if "theta0" not in obj and "affine" in obj:
            aff = obj["affine"]
            q = {tuple(t["exp"]): complex(*t["c"]) for t in aff["q"]}
            return cls.from_skew(UniPoly.from_json(aff["p"]), q, d=obj.get("d"), name=obj.get("name", ""))
        m = cls(
            BinaryForm.from_json(obj["theta0"]),
            BinaryForm.from_json(obj["theta1"]),
            TernaryForm.from_json(obj["R"]),
            name=obj.get("name", ""),
            transform=None if "transform" not in obj else np.array(
                [[complex(*v) for v in row] for row in obj["transform"]]),
        )
        if "d" in obj and int(obj["d"]) != m.d:
            raise ValueError(f"declared d={obj['d']} but forms have degree {m.d}")
        if "affine" in obj:
            aff = obj["affine"]
            q = {tuple(t["exp"]): complex(*t["c"]) for t in aff["q"]}
            other = cls.from_skew(UniPoly.from_json(aff["p"]), q, d=m.d)
            if not _same_lift(m, other):
                raise ValueError("affine view does not homogenize to the stored lift")
            m = cls(m.theta0, m.theta1, m.R, name=m.name, affine=other.affine, transform=m.transform)
        return m


def _same_lift(f: FiberedMap, g: FiberedMap) -> bool:
    return (np.array_equal(f.theta0.coeffs, g.theta0.coeffs)
            and np.array_equal(f.theta1.coeffs, g.theta1.coeffs)
            and f.R.terms == g.R.terms)


def validate(f: FiberedMap, rel_tol: float = 1e-12) -> ValidationReport:
    """Check that the lift defines an endomorphism of P^2.

    ``F^{-1}(0) = {0}`` holds iff ``Theta0, Theta1`` have no common root on
    P^1 and ``R(0, 0, z) = r_d z^d`` with ``r_d != 0``.
    """
    d = f.d
    res = abs(resultant(f.theta0, f.theta1))
    res_scale = f.theta0.norm1() ** d * f.theta1.norm1() ** d
    zd = abs(f.R.coefficient((0, 0, d)))
    r_scale = f.R.norm1()
    checks = (
        ValidationCheck("degree>=2", float(d), 2.0, d >= 2),
        ValidationCheck("resultant(Theta0,Theta1)", res, rel_tol * res_scale, res > rel_tol * res_scale),
        ValidationCheck("z^d coefficient of R", zd, rel_tol * r_scale, zd > rel_tol * r_scale),
    )
    return ValidationReport(checks)


def require_valid(f: FiberedMap) -> None:
    rep = validate(f)
    if not rep.passed:
        raise InvalidMap(f"map {f.name or '<anonymous>'} failed: {', '.join(rep.failures())}")


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------


def apply(f: FiberedMap, x) -> ProjPoint:
    X = _coords(x)
    if X.size != 3:
        raise ValueError("apply() expects a point of P^2")
    img = f.arrays.lift(X)
    assert np.any(img != 0), "validated maps never send a nonzero vector to 0"
    return ProjPoint(img)


def apply_base(f: FiberedMap, y) -> ProjPoint:
    return ProjPoint(f.arrays.theta(_coords(y)))


def apply_array(m: MapArrays, X: np.ndarray) -> np.ndarray:
    return normalize_max(m.lift(X))


def project(x) -> ProjPoint:
    X = _coords(x)
    if np.all(X[:2] == 0):
        raise ValueError("the indeterminacy point [0:0:1] has no image under the projection")
    return ProjPoint(X[:2])


def in_indeterminacy(X, tol: float = 0.0) -> np.ndarray:
    X = np.asarray(X)
    return np.max(np.abs(X[..., :2]), axis=-1) <= tol * np.max(np.abs(X), axis=-1)


def skew_apply(f: FiberedMap, t: complex, z: complex) -> tuple[complex, complex]:
    """Affine skew-product action ``(t, z) -> (p(t), q(t, z))``."""
    if f.affine is None:
        img = apply(f, ProjPoint.affine(t, z))
        return img.to_affine()
    p, q = f.affine
    return p(t), sum(c * t**i * z**l for (i, l), c in q.items())


def preimages(f: FiberedMap, x, tol: float = 1e-10) -> list[tuple[ProjPoint, int]]:
    """All ``d^2`` preimages of ``x`` with multiplicity.

    Base preimages solve ``y1' Theta0(s) - y0' Theta1(s) = 0``; in each
    base preimage fiber the fiber coordinate solves
    ``R(s0, s1, w) = lam * w'`` where ``Theta(s) = lam * y'``.
    """
    X = normalize_max(_coords(x))
    d = f.d
    if np.all(X[:2] == 0):
        return [(ProjPoint(INFINITY_POINT), d * d)]
    y = X[:2]
    form = f.theta0 * y[1] - f.theta1 * y[0]
    out = []
    for root in binary_roots(form, tol=tol):
        if root.is_infinite:
            s = np.array([1.0, 0.0], complex)
        else:
            s = normalize_lift(np.array([root.value, 1.0]))
        th = f.arrays.theta(s)
        lam = np.vdot(y, th) / np.vdot(y, y)
        coeffs = f.arrays.fiber_coeffs(s)
        coeffs[0] -= lam * X[2]
        for w in roots(UniPoly(coeffs), tol=tol):
            out.append((ProjPoint([s[0], s[1], w.value]), root.multiplicity * w.multiplicity))
    return out


def backward_step(m: MapArrays, X: np.ndarray, choose_base: np.ndarray,
                  choose_fiber: np.ndarray, seed: int = 0) -> np.ndarray:
    """One random backward step for a stack of points.

    ``choose_base`` and ``choose_fiber`` are integer arrays in ``[0, d)``
    selecting which root to follow.  Points on ``I(pi)`` stay there.
    """
    y = X[..., :2]
    w = X[..., 2]
    form = m.th0 * y[..., 1:2] - m.th1 * y[..., 0:1]
    base = batch_binary_roots(form, seed=seed)
    s = np.take_along_axis(base, choose_base[..., None, None], axis=-2)[..., 0, :]
    th = m.theta(s)
    lam = np.sum(np.conj(y) * th, axis=-1) / np.sum(np.abs(y) ** 2, axis=-1)
    coeffs = m.fiber_coeffs(s)
    coeffs[..., 0] -= lam * w
    wr = batch_roots(coeffs, seed=seed)
    wn = np.take_along_axis(wr, choose_fiber[..., None], axis=-1)[..., 0]
    out = normalize_max(np.stack([s[..., 0], s[..., 1], wn], axis=-1))
    return out


def backward_step_base(m: MapArrays, y: np.ndarray, choose: np.ndarray, seed: int = 0) -> np.ndarray:
    form = m.th0 * y[..., 1:2] - m.th1 * y[..., 0:1]
    base = batch_binary_roots(form, seed=seed)
    return np.take_along_axis(base, choose[..., None, None], axis=-2)[..., 0, :]


# ---------------------------------------------------------------------------
# Jacobians in the Fubini-Study metric
# ---------------------------------------------------------------------------


def _norm2(v):
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))


def sectional_jacobian(m, X) -> np.ndarray:
    """``|Jac_sigma f|`` along the fibers, FS metric, at points off ``I(pi)``.

    Uses ``|F(X) ^ DF_X(V)| |X|^2 / (|F(X)|^2 |X ^ V|)`` with ``V = (0, 0, 1)``;
    since ``DF_X(V) = (0, 0, dR/dz)`` this equals
    ``|dR/dz| |Theta(y)| |X|^2 / (|F(X)|^2 |y|)``.
    """
    m = m.arrays if isinstance(m, FiberedMap) else m
    X = _coords(X) if isinstance(X, ProjPoint) else np.asarray(X, dtype=complex)
    FX = m.lift(X)
    rz = np.abs(m.r_z(X))
    num = rz * _norm2(FX[..., :2]) * _norm2(X) ** 2
    den = _norm2(FX) ** 2 * _norm2(X[..., :2])
    return num / den


def base_derivative(m, y) -> np.ndarray:
    """FS derivative modulus of the base map: ``|det DTheta| |y|^2 / (d |Theta(y)|^2)``."""
    m = m.arrays if isinstance(m, FiberedMap) else m
    y = _coords(y) if isinstance(y, ProjPoint) else np.asarray(y, dtype=complex)
    return np.abs(m.det_dtheta(y)) * _norm2(y) ** 2 / (m.d * _norm2(m.theta(y)) ** 2)


def full_jacobian(m, X) -> np.ndarray:
    """Complex Jacobian modulus of ``f`` on P^2: ``|det DF| |X|^3 / (d |F(X)|^3)``."""
    m = m.arrays if isinstance(m, FiberedMap) else m
    X = _coords(X) if isinstance(X, ProjPoint) else np.asarray(X, dtype=complex)
    FX = m.lift(X)
    dth = m.dtheta(X[..., :2])
    grad = m.r_grad(X)
    jac = np.zeros(X.shape[:-1] + (3, 3), complex)
    jac[..., :2, :2] = dth
    jac[..., 2, :] = grad
    det = np.linalg.det(jac)
    return np.abs(det) * _norm2(X) ** 3 / (m.d * _norm2(FX) ** 3)


def horizontal_weight(X) -> np.ndarray:
    """``|y| / |X|``; its log is the coboundary linking base and quotient metrics."""
    X = np.asarray(X)
    return _norm2(X[..., :2]) / _norm2(X)


# ---------------------------------------------------------------------------
# Fibers and critical loci
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fiber:
    """The line ``L_a``; ``(a:b) -> [a s0 : a s1 : b]`` with ``s`` a normalized lift."""

    lift: np.ndarray

    def __post_init__(self):
        s = normalize_lift(np.asarray(self.lift, dtype=complex).ravel())
        s.setflags(write=False)
        object.__setattr__(self, "lift", s)

    @classmethod
    def over(cls, a) -> "Fiber":
        return cls(_coords(a)[:2])

    def point(self, a: complex, b: complex) -> ProjPoint:
        s = self.lift
        return ProjPoint([a * s[0], a * s[1], b])

    def at(self, w: complex) -> ProjPoint:
        """The point with fiber coordinate ``w`` (i.e. ``(a:b) = (1:w)``)."""
        return self.point(1.0, w)

    @property
    def base(self) -> ProjPoint:
        return ProjPoint(self.lift)


def fiber_form(f: FiberedMap, fiber: Fiber) -> BinaryForm:
    """``R_s(a, b) = R(a s0, a s1, b)``."""
    return f.R.restrict_to_fiber(*fiber.lift)


def base_map(f: FiberedMap, fiber: Fiber) -> tuple[Fiber, complex]:
    """Image fiber and the scalar ``lam`` with ``Theta(s) = lam * s'``.

    In fiber coordinates the map ``L_s -> L_s'`` reads ``w -> R(s0, s1, w) / lam``.
    """
    th = f.arrays.theta(np.asarray(fiber.lift))
    image = Fiber(th)
    lam = complex(np.vdot(image.lift, th) / np.vdot(image.lift, image.lift))
    return image, lam


def fiber_map(f: FiberedMap, fiber: Fiber) -> tuple[Fiber, UniPoly]:
    """The fiber map as an affine polynomial ``w -> R(s, w) / lam``."""
    image, lam = base_map(f, fiber)
    return image, UniPoly(f.arrays.fiber_coeffs(np.asarray(fiber.lift)) / lam)


@dataclass(frozen=True)
class CriticalLoci:
    c_sigma: TernaryForm
    crit_theta: BinaryForm


def critical_loci(f: FiberedMap) -> CriticalLoci:
    """``C_sigma = {dR/dz = 0}`` and ``Crit_theta = {det DTheta = 0}``."""
    t0a, t0b = f.theta0.derivative(0), f.theta0.derivative(1)
    t1a, t1b = f.theta1.derivative(0), f.theta1.derivative(1)
    return CriticalLoci(f.R.derivative(2), t0a * t1b - t0b * t1a)


def crit_theta_points(f: FiberedMap) -> np.ndarray:
    """Critical points of the base map as normalized P^1 points (with multiplicity)."""
    loci = critical_loci(f)
    pts = []
    for r in binary_roots(loci.crit_theta, tol=1e-8):
        pt = np.array([1.0, 0.0]) if r.is_infinite else np.array([r.value, 1.0])
        pts.extend([normalize_max(pt)] * r.multiplicity)
    return np.array(pts, dtype=complex).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Trapping region around I(pi)
# ---------------------------------------------------------------------------


def _trapped(m: MapArrays, eps: float, y: np.ndarray) -> bool:
    X = np.concatenate([eps * y, np.ones(y.shape[:-1] + (1,), complex)], axis=-1)
    FX = m.lift(X)
    return bool(np.all(np.max(np.abs(FX[..., :2]), axis=-1) <= 0.5 * eps * np.abs(FX[..., 2])))


def trapping_epsilon(f: FiberedMap, n_samples: int = 1000, seed: int = 0,
                     eps_min: float = 1e-8, steps: int = 20) -> Optional[float]:
    """Largest ``eps`` (by geometric bisection) with ``f(U_eps) in U_{eps/2}`` on samples.

    ``U_eps = {|y|_inf < eps |z|_inf}``.  Sample points have ``z = 1`` and
    ``y`` in the closed unit polydisk scaled by ``eps``, half of them on its
    distinguished boundary.  Returns ``None`` when no ``eps >= eps_min`` works.
    """
    rng = np.random.default_rng(seed)
    m = f.arrays
    rad = np.sqrt(rng.uniform(size=(n_samples, 2)))
    half = n_samples // 2
    rad[np.arange(half), np.argmax(rad[:half], axis=1)] = 1.0
    y = rad * np.exp(2j * np.pi * rng.uniform(size=(n_samples, 2)))
    hi = 1.0
    if _trapped(m, hi, y):
        return hi
    lo = hi
    while not _trapped(m, lo, y):
        lo /= 2
        if lo < eps_min:
            return None
    hi = 2 * lo
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if _trapped(m, mid, y):
            lo = mid
        else:
            hi = mid
    return lo
