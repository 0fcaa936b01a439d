import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibered_dyn.algebra import (BinaryForm, TernaryForm, UniPoly, batch_binary_roots, batch_roots,
                                 binary_roots, cauchy_bound, compose, expand_roots, horner,
                                 resultant, roots)
from fibered_dyn.errors import DegenerateInput

unit_disk = st.builds(lambda r, a: np.sqrt(r) * np.exp(2j * np.pi * a),
                      st.floats(0, 1), st.floats(0, 1))
nonzero = st.builds(lambda r, a: (0.2 + r) * np.exp(2j * np.pi * a), st.floats(0, 2), st.floats(0, 1))


class TestEvaluation:
    def test_root_by_construction(self):
        assert abs(UniPoly([1, 0, 1])(1j)) == 0

    def test_monomial_binary_form(self):
        # a^2 b^0 at (2, 3)
        assert BinaryForm([1, 0, 0])(2, 3) == 4

    def test_ternary_homogeneity_example(self):
        R = TernaryForm({(1, 1, 1): 1}, 3)
        lam = 1.5 - 0.5j
        assert np.isclose(R(lam, lam, lam), lam**3)

    @given(st.lists(unit_disk, min_size=3, max_size=6), nonzero, unit_disk, unit_disk)
    def test_binary_homogeneity(self, coeffs, lam, a, b):
        f = BinaryForm(coeffs)
        d = f.degree
        lhs = f(lam * a, lam * b)
        rhs = lam**d * f(a, b)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs)) * 10

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), unit_disk), min_size=1, max_size=5),
           nonzero, unit_disk, unit_disk, unit_disk)
    def test_ternary_homogeneity(self, raw, lam, y0, y1, z):
        terms = {}
        for i, j, c in raw:
            if i + j <= 3:
                terms[(i, j, 3 - i - j)] = c
        R = TernaryForm(terms, 3)
        lhs = R(lam * y0, lam * y1, lam * z)
        rhs = lam**3 * R(y0, y1, z)
        assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(rhs))

    def test_horner_matches_polyval(self, rng):
        c = rng.normal(size=7) + 1j * rng.normal(size=7)
        t = rng.normal(size=5) + 1j * rng.normal(size=5)
        assert np.allclose(horner(c, t), np.polyval(c[::-1], t))


class TestDerivative:
    def test_univariate(self):
        # d/dz (z^2 + t z) at t = 3: 2z + 3
        assert UniPoly([0, 3, 1]).derivative() == UniPoly([3, 2])

    def test_ternary_partial(self):
        R = TernaryForm({(1, 1, 1): 1}, 3)
        dR = R.derivative(2)
        assert dR.degree == 2
        assert dR.terms == {(1, 1, 0): 1}

    def test_constant_is_zero_flagged(self):
        assert UniPoly([5.0]).derivative().is_zero

    def test_binary_partials(self):
        f = BinaryForm([1, 2, 3])  # a^2 + 2ab + 3b^2
        assert np.allclose(f.derivative(0).coeffs, [2, 2])
        assert np.allclose(f.derivative(1).coeffs, [2, 6])


class TestCompose:
    def test_power(self):
        z2 = UniPoly([0, 0, 1])
        assert compose(z2, z2) == UniPoly([0, 0, 0, 0, 1])

    def test_chebyshev(self):
        T = UniPoly([-2, 0, 1])
        assert compose(T, T).allclose(UniPoly([2, 0, -4, 0, 1]))

    def test_shift(self):
        assert compose(UniPoly([1, 0, 1]), UniPoly([1, 1])).allclose(UniPoly([2, 2, 1]))

    def test_cap(self):
        big = UniPoly(np.ones(66))  # 65 * 65 > 4096
        with pytest.raises(OverflowError):
            compose(big, big)

    @given(st.lists(unit_disk, min_size=3, max_size=3), st.lists(unit_disk, min_size=3, max_size=3),
           st.lists(unit_disk, min_size=3, max_size=3))
    def test_associativity(self, a, b, c):
        a[-1] = b[-1] = c[-1] = 1.0
        A, B, C = UniPoly(a), UniPoly(b), UniPoly(c)
        lhs = compose(compose(A, B), C).coeffs
        rhs = compose(A, compose(B, C)).coeffs
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


class TestRoots:
    def test_i(self):
        rs = roots(UniPoly([1, 0, 1]))
        vals = sorted(rs.values(), key=lambda z: z.imag)
        assert np.allclose(vals, [-1j, 1j], atol=1e-12)
        assert all(r.multiplicity == 1 for r in rs)

    def test_cube_roots_of_unity(self):
        rs = roots(UniPoly([-1, 0, 0, 1]))
        vals = np.array(rs.values())
        assert np.allclose(vals**3, 1, atol=1e-12)
        assert len(set(np.round(vals, 8))) == 3

    def test_cluster_merge(self):
        # oracle: the product (z - 0.3)^2 (z - 2) expanded explicitly
        p = UniPoly([-0.18, 1.29, -2.6, 1.0])
        assert p.allclose(expand_roots([0.3, 0.3, 2.0]))
        rs = roots(p)
        got = {round(r.value.real, 6): r.multiplicity for r in rs}
        assert got == {0.3: 2, 2.0: 1}
        for r in rs:
            assert abs(r.value - (0.3 if r.multiplicity == 2 else 2.0)) < 1e-8

    def test_binary_form_infinity(self):
        # b^2 * (a - b): (1:0) double, (1:1) simple
        f = BinaryForm([0, 0, 1, -1])
        rs = binary_roots(f)
        inf = [r for r in rs if r.is_infinite]
        assert inf and inf[0].multiplicity == 2
        assert rs.total_multiplicity == 3

    def test_degenerate(self):
        with pytest.raises(DegenerateInput):
            binary_roots(BinaryForm([0, 0, 0]))
        with pytest.raises(DegenerateInput):
            roots(UniPoly([1.0]))

    @given(st.lists(unit_disk, min_size=1, max_size=12), st.integers(0, 1000))
    def test_reconstruction(self, coeffs, seed):
        p = UniPoly(list(coeffs) + [1.0])
        rs = roots(p, seed=seed)
        assert rs.total_multiplicity == p.degree
        back = expand_roots(rs.values()).coeffs
        assert np.max(np.abs(back - p.coeffs)) <= 1e-6 * np.max(np.abs(p.coeffs))

    @given(st.lists(unit_disk, min_size=3, max_size=8), st.integers(0, 5))
    def test_multiplicity_conservation(self, coeffs, zeros):
        coeffs = [0.0] * min(zeros, len(coeffs) - 1) + list(coeffs)[min(zeros, len(coeffs) - 1):]
        if all(abs(c) == 0 for c in coeffs):
            coeffs[-1] = 1.0
        f = BinaryForm(coeffs)
        assert binary_roots(f).total_multiplicity == f.degree

    def test_batch_roots_agree(self, rng):
        c = rng.normal(size=(20, 5)) + 1j * rng.normal(size=(20, 5))
        z = batch_roots(c)
        for k in range(20):
            assert np.max(np.abs(horner(c[k], z[k]))) < 1e-9 * np.abs(c[k]).sum() * np.max(np.abs(z[k]) + 1) ** 4

    def test_batch_binary_roots_vanish(self, rng):
        c = rng.normal(size=(10, 4)) + 1j * rng.normal(size=(10, 4))
        ab = batch_binary_roots(c)
        assert ab.shape == (10, 3, 2)
        for k in range(10):
            f = BinaryForm(c[k])
            vals = np.array([f(a, b) for a, b in ab[k]])
            assert np.max(np.abs(vals)) < 1e-10 * np.abs(c[k]).sum()

    def test_cauchy_bound_encloses_roots(self, rng):
        for _ in range(20):
            c = rng.normal(size=9) + 1j * rng.normal(size=9)
            r = cauchy_bound(c)
            assert np.max(np.abs(np.roots(c[::-1]))) <= r * (1 + 1e-9)


class TestResultant:
    def test_common_root(self):
        assert abs(resultant(BinaryForm([1, 0, 0]), BinaryForm([0, 1, 0]))) == 0

    def test_coprime(self):
        assert abs(resultant(BinaryForm([1, 0, 0]), BinaryForm([0, 0, 1]))) > 0.5


class TestJson:
    def test_roundtrip(self):
        p = UniPoly([1 + 2j, 0, 3])
        assert UniPoly.from_json(p.to_json()) == p
        f = BinaryForm([1, 2j, 3])
        assert np.array_equal(BinaryForm.from_json(f.to_json()).coeffs, f.coeffs)
        R = TernaryForm({(0, 0, 2): 1, (1, 0, 1): 2j}, 2)
        assert TernaryForm.from_json(R.to_json()).terms == R.terms
