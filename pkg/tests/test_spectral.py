import math

import numpy as np
import pytest

from fraplace.domain import build_grid
from fraplace.nonlocal_core import assemble_kernel, lp_norm
from fraplace.reactions import logistic, weights_array
from fraplace.spectral import (EigenOptions, dense_oracle_p2, lambda_monotonicity_check,
                               principal_eigenpair, rayleigh_quotient)
from oracles import smallest_eig_2x2

FAST = EigenOptions(restarts=1)


def setup(n=32, s=0.5, p=2.0):
    g = build_grid(0, 1, n)
    return g, assemble_kernel(g, s, p)


class TestRayleighQuotient:
    def test_nonnegative_without_weight(self):
        g, k = setup()
        v = np.random.default_rng(0).normal(size=32)
        assert rayleigh_quotient(k, g, 0.0, v) >= 0

    def test_constant_shift(self):
        g, k = setup()
        v = np.random.default_rng(1).uniform(size=32)
        assert rayleigh_quotient(k, g, 2.5, v) == pytest.approx(rayleigh_quotient(k, g, 0.0, v) - 2.5)

    def test_scale_invariance(self):
        g, k = setup(p=2.5)
        v = np.random.default_rng(2).normal(size=32)
        a = np.random.default_rng(3).uniform(-1, 1, 32)
        assert rayleigh_quotient(k, g, a, 2 * v) == pytest.approx(rayleigh_quotient(k, g, a, v), rel=1e-13)

    def test_zero_field(self):
        g, k = setup()
        with pytest.raises(ValueError):
            rayleigh_quotient(k, g, 0.0, np.zeros(32))


class TestPrincipalEigenpair:
    def test_matches_oracle(self, grid64, kernel64):
        res = principal_eigenpair(kernel64, grid64, 0.0)
        ref = dense_oracle_p2(kernel64, grid64, 0.0)
        assert res.converged
        assert abs(res.value - ref.value) / ref.value < 1e-8
        assert np.all(res.v >= 0)
        assert lp_norm(grid64, res.v, 2) == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(res.v, ref.v, atol=1e-5)

    def test_shift(self):
        g, k = setup()
        l0 = principal_eigenpair(k, g, 0.0, FAST).value
        assert principal_eigenpair(k, g, 4.0, FAST).value == pytest.approx(l0 - 4.0, abs=1e-8)

    def test_plus_infinity(self):
        g, k = setup()
        a = weights_array(logistic(1, 1.5, 4, 2), g.nodes, "zero")
        res = principal_eigenpair(k, g, a)
        assert res.lam.tag == "minus_infinity" and res.iterations == 0

    def test_empty_support(self):
        g, k = setup()
        res = principal_eigenpair(k, g, np.full(32, -math.inf))
        assert res.lam.tag == "plus_infinity" and "empty_support" in res.flags

    def test_restricted_support_raises_value(self):
        g, k = setup()
        a = np.zeros(32)
        a[:8] = -math.inf
        res = principal_eigenpair(k, g, a, FAST)
        assert "restricted_support" in res.flags
        assert np.all(res.v[:8] == 0)
        assert res.value > dense_oracle_p2(k, g, 0.0).value

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_other_p_is_stationary(self, p):
        g, k = setup(n=16, p=p)
        a = np.random.default_rng(4).uniform(-2, 2, 16)
        res = principal_eigenpair(k, g, a, FAST)
        assert res.converged
        assert lp_norm(g, res.v, p) == pytest.approx(1.0, abs=1e-10)
        assert rayleigh_quotient(k, g, a, res.v) == pytest.approx(res.value, rel=1e-12)
        assert res.value == pytest.approx(min(res.start_values))


class TestDenseOracle:
    def test_two_by_two(self):
        g, k = setup(n=2)
        h = g.h
        w = k.weights[0, 1]
        diag = (2 * w + k.exterior) / h
        ref = smallest_eig_2x2(diag[0], -2 * w / h, diag[1])
        assert dense_oracle_p2(k, g, 0.0).value == pytest.approx(ref, rel=1e-14)
        # s = 1/2, p = 2, h = 1/3: [[15, -6], [-6, 15]]
        assert ref == pytest.approx(9.0)

    @pytest.mark.xfail(strict=True, reason="discretization converges like h^0.8; 64 vs 128 differ by 2.1%")
    def test_grid_stability_64_128(self):
        g1, k1 = setup(n=64)
        g2, k2 = setup(n=128)
        l1 = dense_oracle_p2(k1, g1, 0.0).value
        l2 = dense_oracle_p2(k2, g2, 0.0).value
        assert abs(l1 - l2) / l2 < 0.02

    def test_grid_refinement(self):
        vals = [dense_oracle_p2(k, g, 0.0).value for g, k in (setup(n=n) for n in (64, 128, 256))]
        d1 = abs(vals[1] - vals[0]) / vals[1]
        d2 = abs(vals[2] - vals[1]) / vals[2]
        assert d2 < 0.02 and d2 < 0.7 * d1
        assert vals[0] < vals[1] < vals[2]

    def test_shift_exact(self):
        g, k = setup()
        l0 = dense_oracle_p2(k, g, 0.0).value
        assert dense_oracle_p2(k, g, 7.0).value == pytest.approx(l0 - 7.0, abs=1e-12)

    def test_rejects_other_p(self):
        g, k = setup(p=3.0)
        with pytest.raises(ValueError):
            dense_oracle_p2(k, g, 0.0)

    def test_rejects_infinite_weight(self):
        g, k = setup()
        a = np.zeros(32)
        a[0] = -math.inf
        with pytest.raises(ValueError):
            dense_oracle_p2(k, g, a)


class TestMonotonicity:
    def test_shift_by_one(self):
        g, k = setup()
        rep = lambda_monotonicity_check(k, g, 0.0, 1.0, FAST)
        assert rep.ok and rep.lambda_a == pytest.approx(rep.lambda_b + 1, abs=1e-8)

    def test_bump(self):
        g, k = setup()
        b = 5.0 * (np.abs(g.nodes - 0.5) < 0.2)
        assert lambda_monotonicity_check(k, g, 0.0, b, FAST).ok

    def test_reflexive(self):
        g, k = setup()
        a = np.random.default_rng(5).uniform(-1, 1, 32)
        rep = lambda_monotonicity_check(k, g, a, a, FAST)
        assert rep.ok and rep.lambda_a == rep.lambda_b

    def test_order_required(self):
        g, k = setup()
        with pytest.raises(ValueError):
            lambda_monotonicity_check(k, g, 1.0, 0.0)
