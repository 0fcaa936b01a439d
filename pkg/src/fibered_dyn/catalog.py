"""Named example maps and parameter families, plus a random skew-product generator."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .algebra import BinaryForm, TernaryForm, UniPoly
from .bifurcation import ParamFamily
from .geometry import FiberedMap, trapping_epsilon, validate

# (y0, y1, w) = (x, z, y): the fiber coordinate of the standard fibration is
# the Desboves y-coordinate, so the preserved pencil of lines through
# [0:1:0] becomes the pencil through [0:0:1].
DESBOVES_TRANSFORM = [[1, 0, 0], [0, 0, 1], [0, 1, 0]]


def skew(p, q: dict, name: str) -> FiberedMap:
    """``(t, z) -> (p(t), q(t, z))`` with ``q`` given as ``{(i, l): c}`` for ``t^i z^l``."""
    return FiberedMap.from_skew(UniPoly(p), q, name=name)


def desboves() -> FiberedMap:
    """Degree-4 Desboves map in coordinates adapted to the standard fibration.

    In Desboves coordinates ``[x:y:z] -> [-x(x^3+2z^3) : y(y^3+2z^3) : z(2x^3+z^3)]``,
    which preserves the lines through ``[0:1:0]``.
    """
    th0 = BinaryForm([-1, 0, 0, -2, 0])   # -y0^4 - 2 y0 y1^3
    th1 = BinaryForm([0, 2, 0, 0, 1])     # 2 y0^3 y1 + y1^4
    R = TernaryForm({(0, 0, 4): 1, (0, 3, 1): 2}, 4)
    return FiberedMap(th0, th1, R, name="desboves", transform=DESBOVES_TRANSFORM)


_MAPS = {
    "torus": lambda: skew([0, 0, 1], {(0, 2): 1}, "torus"),
    "chebyshev": lambda: skew([-2, 0, 1], {(0, 2): 1}, "chebyshev"),
    "chebyshev_base": lambda: skew([-2, 0, 1], {(0, 2): 1}, "chebyshev_base"),
    "basilica_base": lambda: skew([-1, 0, 1], {(0, 2): 1}, "basilica_base"),
    "cheb_coupled": lambda: skew([-2, 0, 1], {(0, 2): 1, (1, 0): 1}, "cheb_coupled"),
    "desboves": desboves,
}


def mandel_family(rect=(-2.5, 1.5, -1.5, 1.5)) -> ParamFamily:
    """``(t^2, z^2 + lam)``."""
    return ParamFamily.from_skew({2: 1}, {(0, 2): 1, (0, 0): [0, 1]}, rect, "mandel_family")


def coupled_family(rect=(-2.5, 1.5, -2.0, 2.0)) -> ParamFamily:
    """``(t^2 - 1, z^2 + lam t)``."""
    return ParamFamily.from_skew({2: 1, 0: -1}, {(0, 2): 1, (1, 0): [0, 1]}, rect, "coupled_family")


def quiet_family(rect=(-0.5, 0.5, -0.5, 0.5)) -> ParamFamily:
    """``(t^2, z^2 + 0.1 lam)``: the fiber parameter stays inside the main cardioid."""
    return ParamFamily.from_skew({2: 1}, {(0, 2): 1, (0, 0): [0, 0.1]}, rect, "quiet_family")


_FAMILIES = {
    "mandel_family": mandel_family,
    "coupled_family": coupled_family,
    "quiet_family": quiet_family,
}


def names() -> list:
    return sorted(_MAPS) + sorted(_FAMILIES)


def builtin_map(name: str) -> FiberedMap:
    try:
        return _MAPS[name]()
    except KeyError:
        raise KeyError(f"unknown built-in map {name!r}; known: {sorted(_MAPS)}") from None


def builtin_family(name: str, rect=None) -> ParamFamily:
    try:
        make = _FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown built-in family {name!r}; known: {sorted(_FAMILIES)}") from None
    return make() if rect is None else make(tuple(rect))


def _disk(rng: np.random.Generator, size=None):
    r = np.sqrt(rng.uniform(size=size))
    return r * np.exp(2j * np.pi * rng.uniform(size=size))


def random_skew(seed: int, max_tries: int = 100) -> tuple[FiberedMap, float]:
    """A validated, trapping-certified degree-2 skew product with unit-disk coefficients.

    ``p(t) = t^2 + a1 t + a0`` and
    ``q(t, z) = z^2 + (e t + f) z + g t^2 + h t + k`` with all seven
    coefficients uniform in the unit disk.  Draws are repeated until the map
    validates and a trapping ``eps`` is certified; returns the map and ``eps``.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(max_tries):
        a0, a1, e, f, g, h, k = _disk(rng, 7)
        fmap = skew([a0, a1, 1], {(0, 2): 1, (1, 1): e, (0, 1): f, (2, 0): g, (1, 0): h, (0, 0): k},
                    f"random_skew[{seed}.{attempt}]")
        if not validate(fmap).passed:
            continue
        eps = trapping_epsilon(fmap, seed=seed)
        if eps is not None:
            return fmap, eps
    raise RuntimeError(f"no valid trapping-certified map after {max_tries} draws")
