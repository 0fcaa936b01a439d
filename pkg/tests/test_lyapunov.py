import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibered_dyn.catalog import builtin_map, random_skew, skew
from fibered_dyn.errors import SingularSample
from fibered_dyn.lyapunov import (LAMBDA_0, ROUNDING_FLOOR, bj_check, bj_pairing, chain_rule_defect,
                                  exponents, fiber_critical_green, per_fiber_exponent,
                                  sigma_periodic_approx)
from fibered_dyn.sampling import (SampleSet, combined_se, periodic_base_points, sample_base,
                                  sample_equilibrium)

from oracles import G_Z2_PLUS_1_AT_0, G_Z2_PLUS_2_AT_0

LOG2 = math.log(2)


def report(f, N=20_000, seed=0):
    return exponents(f, sample_equilibrium(f, N, seed=seed), sample_base(f, N, seed=seed + 1))


class TestExponents:
    def test_torus(self):
        rep = report(builtin_map("torus"))
        assert abs(rep.lambda_theta.value - LOG2) <= 1e-3
        assert abs(rep.lambda_sigma.value - LOG2) <= 1e-3
        assert rep.lambda_0 == LAMBDA_0 == 0.0

    def test_chebyshev_times_square(self):
        rep = report(builtin_map("chebyshev"), 50_000)
        for est in (rep.lambda_theta, rep.lambda_sigma):
            assert abs(est.value - LOG2) <= 3 * est.se + ROUNDING_FLOOR

    @pytest.mark.parametrize("name", ["torus", "chebyshev", "cheb_coupled", "basilica_base"])
    def test_decomposition_on_shared_sample(self, name):
        f = builtin_map(name)
        sf = sample_equilibrium(f, 20_000, seed=3)
        rep = exponents(f, sf, sf.project())
        gap = rep.lambda_f.value - rep.lambda_theta.value - rep.lambda_sigma.value
        band = 3 * combined_se(rep.lambda_f.se, rep.lambda_theta.se, rep.lambda_sigma.se)
        assert abs(gap) <= band + ROUNDING_FLOOR

    def test_direct_full_jacobian_matches_sum(self):
        # the pointwise difference is a coboundary, so the means agree within noise
        rep = report(builtin_map("cheb_coupled"), 50_000, seed=5)
        band = 3 * combined_se(rep.lambda_f.se, rep.lambda_f_direct.se)
        assert abs(rep.lambda_f.value - rep.lambda_f_direct.value) <= band

    @pytest.mark.parametrize("name", ["torus", "chebyshev", "cheb_coupled", "basilica_base",
                                      "desboves"])
    def test_lower_bounds(self, name):
        f = builtin_map(name)
        rep = report(f, 20_000, seed=7)
        logd = math.log(f.d)
        assert rep.lambda_sigma.value >= logd - 3 * rep.lambda_sigma.se - ROUNDING_FLOOR
        assert rep.lambda_theta.value >= 0.5 * logd - 3 * rep.lambda_theta.se - ROUNDING_FLOOR

    @settings(max_examples=8)
    @given(st.integers(0, 200))
    def test_lower_bounds_random(self, seed):
        f, _ = random_skew(seed)
        rep = report(f, 10_000, seed=seed)
        assert rep.lambda_sigma.value >= LOG2 - 3 * rep.lambda_sigma.se
        assert rep.lambda_theta.value >= 0.5 * LOG2 - 3 * rep.lambda_theta.se

    def test_singular_sample(self):
        # every point on the fiber critical line z = 0 of the torus map
        n = 200
        pts = np.zeros((n, 3), complex)
        pts[:, 0] = np.exp(2j * np.pi * np.arange(n) / n)
        pts[:, 1] = 1
        s = SampleSet(pts, np.full(n, 1 / n), 0, 0, "critical line")
        with pytest.raises(SingularSample) as info:
            exponents(builtin_map("torus"), s, s.project())
        assert info.value.dropped == n

    def test_report_json(self):
        rep = report(builtin_map("torus"), 2000)
        js = rep.to_json()
        for key in ("lambda_f", "lambda_theta", "lambda_sigma"):
            assert set(js[key]) >= {"value", "se", "n", "method"}


class TestChainRule:
    @pytest.mark.parametrize("name", ["torus", "cheb_coupled", "desboves"])
    def test_pointwise(self, name):
        f = builtin_map(name)
        X = sample_equilibrium(f, 1000, seed=2).points
        assert np.max(np.abs(chain_rule_defect(f, X))) <= 1e-9

    def test_generic_points(self, rng):
        f = builtin_map("cheb_coupled")
        X = rng.normal(size=(1000, 3)) + 1j * rng.normal(size=(1000, 3))
        assert np.max(np.abs(chain_rule_defect(f, X))) <= 1e-9


class TestPerFiber:
    def test_torus_fixed_fiber(self):
        assert abs(per_fiber_exponent(builtin_map("torus"), [[1, 1]]) - LOG2) <= 1e-12

    def test_zero_fiber(self):
        f = skew([0, 0, 1], {(0, 2): 1, (1, 0): 1}, "t2z2t")
        assert abs(per_fiber_exponent(f, [[0, 1]]) - LOG2) <= 1e-12

    def test_one_fiber(self):
        f = skew([0, 0, 1], {(0, 2): 1, (1, 0): 1}, "t2z2t")
        assert abs(per_fiber_exponent(f, [[1, 1]]) - LOG2 - G_Z2_PLUS_1_AT_0) <= 1e-9

    def test_one_fiber_birkhoff(self):
        # Birkhoff average of log|2z| along the fiber measure of z^2 + 1 over t = 1
        from fibered_dyn.sampling import sample_fiber_measure
        from fibered_dyn.geometry import ProjPoint
        f = skew([0, 0, 1], {(0, 2): 1, (1, 0): 1}, "t2z2t")
        s = sample_fiber_measure(f, ProjPoint.affine(1), 100_000, seed=1)
        z = s.points[:, 2] / s.points[:, 1]
        birk = np.mean(np.log(np.abs(2 * z)))
        assert abs(birk - per_fiber_exponent(f, [[1, 1]])) <= 5e-3

    def test_two_cycle_additivity(self):
        # basilica base: 0 <-> -1 is a 2-cycle; fibers of z^2 carry zero critical Green
        f = builtin_map("basilica_base")
        assert abs(per_fiber_exponent(f, [[0, 1], [-1, 1]]) - 2 * LOG2) <= 1e-12

    def test_critical_green_nonnegative(self, rng):
        f = builtin_map("cheb_coupled")
        lifts = rng.normal(size=(500, 2)) + 1j * rng.normal(size=(500, 2))
        assert np.all(fiber_critical_green(f, lifts) >= -2e-12)


class TestPeriodicApprox:
    @pytest.mark.parametrize("n", range(1, 7))
    def test_torus_factor(self, n):
        approx = sigma_periodic_approx(builtin_map("torus"), n)
        assert abs(approx.value / LOG2 - (1 + 2.0**-n)) <= 1e-9

    def test_torus_n3_value(self):
        value = sigma_periodic_approx(builtin_map("torus"), 3).value
        assert abs(value - 1.125 * LOG2) <= 1e-12
        # 1.125 log 2 = 0.779791..., so a four-digit figure 0.7798 holds
        assert round(value, 4) == 0.7798

    def test_table(self):
        approx = sigma_periodic_approx(builtin_map("cheb_coupled"), 3)
        assert sum(r["period"] * r["multiplicity"] for r in approx.table) == 9
        assert approx.to_json()["n"] == 3

    def test_counts_against_periodic_set(self):
        f = builtin_map("chebyshev")
        assert periodic_base_points(f, 4).count == 17


class TestPairing:
    def test_torus(self):
        f = builtin_map("torus")
        est = bj_pairing(f, sample_base(f, 5000, seed=1))
        assert abs(est.value) <= 1e-6

    def test_bounded_product(self):
        f = skew([-1, 0, 1], {(0, 2): 1, (0, 0): -1}, "basilica_product")
        est = bj_pairing(f, sample_base(f, 5000, seed=1))
        assert abs(est.value) <= 1e-6

    def test_escaping_product(self):
        f = skew([0, 0, 1], {(0, 2): 1, (0, 0): 2}, "t2z2plus2")
        est = bj_pairing(f, sample_base(f, 5000, seed=1))
        assert abs(est.value - G_Z2_PLUS_2_AT_0) <= 1e-6


class TestBJCheck:
    def test_torus(self):
        rep = bj_check(builtin_map("torus"), 20_000, seed=0)
        assert abs(rep.discrepancy) <= 2e-3
        assert rep.within_band

    def test_cheb_coupled(self):
        rep = bj_check(builtin_map("cheb_coupled"), 50_000, seed=1)
        assert abs(rep.discrepancy) <= 3 * rep.combined_se
        js = rep.to_json()
        assert js["discrepancy"]["se"] == rep.combined_se

    def test_deterministic(self):
        a = bj_check(builtin_map("cheb_coupled"), 5000, seed=4).to_json()
        b = bj_check(builtin_map("cheb_coupled"), 5000, seed=4).to_json()
        assert a == b
