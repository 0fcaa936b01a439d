"""Compiled inner loops for parameter scans of degree-2 maps.

Each kernel handles a stack of maps (one per grid cell) with coefficient
arrays laid out like :class:`fibered_dyn.geometry.MapArrays`.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _quad_roots(a, b, c):
    """Both roots of ``a z^2 + b z + c`` (``a != 0``) without cancellation."""
    disc = np.sqrt(b * b - 4.0 * a * c + 0j)
    if (b.real * disc.real + b.imag * disc.imag) >= 0.0:
        q = -0.5 * (b + disc)
    else:
        q = -0.5 * (b - disc)
    if q == 0:
        return 0j, 0j
    return q / a, c / q


@njit(cache=True)
def _binary_eval2(c, a, b):
    return c[0] * a * a + c[1] * a * b + c[2] * b * b


@njit(cache=True)
def _fiber_coeffs(exps, rc, s0, s1):
    """Coefficients of ``R(s0, s1, w)`` in ``w`` (degree 2)."""
    sq0 = s0 * s0
    sq1 = s1 * s1
    c0 = 0j
    c1 = 0j
    c2 = 0j
    for t in range(exps.shape[0]):
        i = exps[t, 0]
        j = exps[t, 1]
        v = rc[t]
        if i == 1:
            v = v * s0
        elif i == 2:
            v = v * sq0
        if j == 1:
            v = v * s1
        elif j == 2:
            v = v * sq1
        l = exps[t, 2]
        if l == 0:
            c0 += v
        elif l == 1:
            c1 += v
        else:
            c2 += v
    return c0, c1, c2


@njit(cache=True)
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


@njit(cache=True)
def orbit_monomials(exps, orb0, orb1):
    """``s0^i s1^j`` for every R term along every base orbit; shape (M, L, T)."""
    M, L = orb0.shape
    T = exps.shape[0]
    out = np.empty((M, L, T), np.complex128)
    for i in range(M):
        for k in range(L):
            for t in range(T):
                out[i, k, t] = orb0[i, k] ** exps[t, 0] * orb1[i, k] ** exps[t, 1]
    return out


@njit(cache=True)
def _normalize3(x0, x1, x2):
    m = math.sqrt(max(_abs2(x0), _abs2(x1), _abs2(x2)))
    return x0 / m, x1 / m, x2 / m


@njit(cache=True)
def direct_chains_d2(th0, th1, exps, rc, seeds, n_chains, burn_in, length, floor):
    """Backward chains on P^2 for each cell; per-chain means of two logs.

    Returns ``sums[c, j, 0]`` = mean of ``log|Jac_sigma|`` and
    ``sums[c, j, 1]`` = mean of ``log`` of the base FS derivative at the
    projected point, over the recorded part of chain ``j`` of cell ``c``;
    ``drops[c]`` counts points below ``floor`` (excluded from the means).
    """
    C = th0.shape[0]
    sums = np.zeros((C, n_chains, 2))
    drops = np.zeros(C, np.int64)
    for c in range(C):
        np.random.seed(seeds[c])
        a0 = th0[c]
        a1 = th1[c]
        for j in range(n_chains):
            y0 = np.random.normal() + 1j * np.random.normal()
            y1 = np.random.normal() + 1j * np.random.normal()
            w = np.random.normal() + 1j * np.random.normal()
            y0, y1, w = _normalize3(y0, y1, w)
            acc_s = 0.0
            acc_b = 0.0
            kept = 0
            for k in range(burn_in + length):
                # base preimage: roots of y1 Theta0(s) - y0 Theta1(s)
                A0 = y1 * a0[0] - y0 * a1[0]
                A1 = y1 * a0[1] - y0 * a1[1]
                A2 = y1 * a0[2] - y0 * a1[2]
                if _abs2(A0) >= _abs2(A2):
                    r1, r2 = _quad_roots(A0, A1, A2)
                    t = r1 if np.random.random() < 0.5 else r2
                    s0, s1 = t, 1.0 + 0j
                else:
                    r1, r2 = _quad_roots(A2, A1, A0)
                    u = r1 if np.random.random() < 0.5 else r2
                    s0, s1 = 1.0 + 0j, u
                m = math.sqrt(max(_abs2(s0), _abs2(s1)))
                s0 /= m
                s1 /= m
                T0 = _binary_eval2(a0, s0, s1)
                T1 = _binary_eval2(a1, s0, s1)
                ny = _abs2(y0) + _abs2(y1)
                lam = (np.conj(y0) * T0 + np.conj(y1) * T1) / ny
                f0, f1, f2 = _fiber_coeffs(exps, rc[c], s0, s1)
                r1, r2 = _quad_roots(f2, f1, f0 - lam * w)
                wn = r1 if np.random.random() < 0.5 else r2
                # s has max-modulus 1, so the new point is (s0, s1, wn) / max(1, |wn|)
                kn = max(1.0, abs(wn))
                y0 = s0 / kn
                y1 = s1 / kn
                w = wn / kn
                if k < burn_in:
                    continue
                # sectional Jacobian at X = (y0, y1, w); the w^l coefficient of R
                # is homogeneous of degree 2 - l in (y0, y1), so rescale f0, f1
                f0 = f0 / (kn * kn)
                f1 = f1 / kn
                Rz = f1 + 2.0 * f2 * w
                Rv = f0 + f1 * w + f2 * w * w
                T0 = _binary_eval2(a0, y0, y1)
                T1 = _binary_eval2(a1, y0, y1)
                nT2 = _abs2(T0) + _abs2(T1)
                ny2 = _abs2(y0) + _abs2(y1)
                nX2 = ny2 + _abs2(w)
                jac = math.sqrt(_abs2(Rz) * nT2 / ny2) * nX2 / (nT2 + _abs2(Rv))
                # base FS derivative at (y0, y1)
                d00 = 2.0 * a0[0] * y0 + a0[1] * y1
                d01 = a0[1] * y0 + 2.0 * a0[2] * y1
                d10 = 2.0 * a1[0] * y0 + a1[1] * y1
                d11 = a1[1] * y0 + 2.0 * a1[2] * y1
                der = abs(d00 * d11 - d01 * d10) * ny2 / (2.0 * nT2)
                if jac < floor or der < floor:
                    drops[c] += 1
                    continue
                acc_s += math.log(jac)
                acc_b += math.log(der)
                kept += 1
            if kept > 0:
                sums[c, j, 0] = acc_s / kept
                sums[c, j, 1] = acc_b / kept
            else:
                sums[c, j, 0] = np.nan
                sums[c, j, 1] = np.nan
    return sums, drops


@njit(cache=True)
def critical_green_d2(exps, rc, mono, inv_lam, n_iter, bailout, tail_len):
    """Relative Green value at the fiber critical point over each base point.

    ``mono`` (M, L, T) holds the monomials of the R terms along the forward
    base orbit of each base point (normalized lifts ``s_k``), and
    ``inv_lam`` (M, L) the reciprocals of the scalars with
    ``Theta(s_k) = lam_k s_{k+1}``; ``L >= n_iter + tail_len``.  ``rc`` is
    (C, T).  In fiber coordinates the relative Green function is
    ``lim 2^-k log max(1, |w_k|)`` for ``w_{k+1} = R(s_k, w_k) / lam_k``;
    once ``|w_k| > bailout`` the rest is summed from leading coefficients.
    Returns shape (M, C); the base point is the outer loop so its orbit
    data stays in cache across cells.
    """
    C = rc.shape[0]
    M = mono.shape[0]
    T = exps.shape[0]
    out = np.zeros((M, C))
    b2 = bailout * bailout
    for i in range(M):
        mi = mono[i]
        li = inv_lam[i]
        for c in range(C):
            r = rc[c]
            w = 0j
            g = -1.0
            for k in range(n_iter):
                c0 = 0j
                c1 = 0j
                c2 = 0j
                for t in range(T):
                    v = r[t] * mi[k, t]
                    l = exps[t, 2]
                    if l == 0:
                        c0 += v
                    elif l == 1:
                        c1 += v
                    else:
                        c2 += v
                if k == 0:
                    w = -c1 / (2.0 * c2)
                if _abs2(w) > b2:
                    tail = 0.0
                    wt = 0.5
                    for jj in range(tail_len):
                        lead = 0j
                        for t in range(T):
                            if exps[t, 2] == 2:
                                lead += r[t] * mi[k + jj, t]
                        tail += wt * 0.5 * math.log(_abs2(lead * li[k + jj]))
                        wt *= 0.5
                    g = 0.5 ** k * (0.5 * math.log(_abs2(w)) + tail)
                    break
                w = (c0 + c1 * w + c2 * w * w) * li[k]
            if g < 0.0:
                g = 0.5 ** n_iter * 0.5 * math.log(max(1.0, _abs2(w)))
            out[i, c] = g
    return out
