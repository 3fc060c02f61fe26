from dataclasses import replace

import numpy as np
import pytest

from fraplace.domain import boundary_power, build_grid
from fraplace.nonlocal_core import assemble_kernel, gagliardo_energy
from fraplace.reactions import logistic, power_combo
from fraplace.solver import solve
from fraplace.spectral import dense_oracle_p2
from fraplace.verify import (PropertyReport, check_comparison, check_contraction, check_necessity,
                             check_picone, check_quotient_bound, check_sign_part,
                             check_submodularity, comparison_slack, evaluate_criterion,
                             merge_reports)


def setup(n=32, s=0.5, p=2.0):
    g = build_grid(0, 1, n)
    return g, assemble_kernel(g, s, p)


class TestReport:
    def test_record_and_merge(self):
        a = PropertyReport("x", tol=1e-3)
        a.record([0.5, -1e-4, -0.1], lambda i: {"i": i})
        b = PropertyReport("x", tol=1e-3)
        b.record([2.0])
        m = merge_reports([a, b])
        assert m.trials == 4 and m.violations == 1 and m.worst_margin == -0.1
        assert m.failures == [{"margin": -0.1, "i": 2}]
        assert not m.ok

    def test_json_shape(self):
        r = PropertyReport("x")
        assert set(r.to_json()) == {"property", "trials", "violations", "worst_margin", "failures"}


class TestPicone:
    def test_sweep(self):
        rep = check_picone([1.5, 2.0, 3.0], 100_000, seed=0)
        assert rep.ok and rep.worst_margin >= -1e-12
        assert rep.trials > 300_000

    def test_equality_cases(self):
        from fraplace.nonlocal_core import picone_gap
        assert picone_gap(2.5, 3.0, 3.0, 2.0, 2.0) == 0.0
        assert picone_gap(2.5, 1.0, 4.0, 0.0, 0.0) == 0.0

    def test_deterministic(self):
        assert check_picone([2.0], 1000, seed=3).to_json() == check_picone([2.0], 1000, seed=3).to_json()


class TestSubmodularity:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_random(self, p):
        g, k = setup(n=16, p=p)
        rep = check_submodularity(k, 500, seed=1)
        assert rep.ok and rep.extra["pairwise"]["violations"] == 0

    def test_identical(self):
        g, k = setup(p=2.5)
        u = np.random.default_rng(0).normal(size=32)
        assert gagliardo_energy(k, u) * 2 == pytest.approx(
            gagliardo_energy(k, np.maximum(u, u)) + gagliardo_energy(k, np.minimum(u, u)))

    def test_disjoint(self):
        g, k = setup(p=2.5)
        rng = np.random.default_rng(1)
        u = np.where(g.nodes < 0.5, rng.uniform(size=32), 0.0)
        v = np.where(g.nodes >= 0.5, rng.uniform(size=32), 0.0)
        assert not np.any(np.minimum(u, v))
        assert gagliardo_energy(k, np.maximum(u, v)) <= gagliardo_energy(k, u) + gagliardo_energy(k, v)


class TestComparison:
    def test_equal_fields(self):
        g, k = setup()
        v = np.random.default_rng(2).uniform(0.1, 1, 32)
        rep = check_comparison(k, v, v)
        assert rep.ok and rep.extra["cases"] == {"d": 32 * 31}
        inner, ext, _ = comparison_slack(2.0, v, v)
        assert np.all(inner == 0) and np.all(ext == 0)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_doubled(self, p):
        g, k = setup(p=p)
        v = np.random.default_rng(3).uniform(0.1, 1, 32)
        rep = check_comparison(k, 2 * v, v)
        assert rep.ok and rep.extra["cases"] == {"a": 32 * 31}

    def test_crossing(self):
        g, k = setup(p=1.5)
        rng = np.random.default_rng(4)
        reports = []
        for _ in range(200):
            u, v = rng.uniform(0.05, 2, 32), rng.uniform(0.05, 2, 32)
            reports.append(check_comparison(k, u, v))
        rep = merge_reports(reports)
        assert rep.ok

    def test_rejects_nonpositive(self):
        g, k = setup()
        with pytest.raises(ValueError):
            check_comparison(k, np.zeros(32), np.ones(32))


class TestQuotientBound:
    def test_equal_fields(self):
        g = build_grid(0, 1, 32)
        ds = boundary_power(g, 0.5)
        rep = check_quotient_bound(g, ds, ds, 0.5, 2.0)
        assert rep.ok and rep.extra["C1"] == 2.0
        # lhs |u_i - u_j| against (C1 + C2) |u_i - u_j|: strict unless u_i = u_j
        diff = np.abs(ds[:, None] - ds[None, :])
        gap = (rep.extra["C1"] + rep.extra["C2"]) * diff - diff
        assert np.all(gap[diff > 0] > 0)

    def test_half_ratio(self):
        g = build_grid(0, 1, 32)
        ds = boundary_power(g, 0.5)
        rep = check_quotient_bound(g, ds, 2 * ds, 0.5, 3.0)
        assert rep.ok
        assert rep.extra["C1"] == pytest.approx(3 * 0.25)
        assert rep.extra["C2"] == pytest.approx(2 * 0.125)

    def test_random_band(self):
        g = build_grid(0, 1, 32)
        ds = boundary_power(g, 0.3)
        rng = np.random.default_rng(5)
        for p in (1.5, 2.0, 3.0):
            for _ in range(20):
                rep = check_quotient_bound(g, ds * rng.uniform(0.5, 2, 32), ds * rng.uniform(0.5, 2, 32), 0.3, p)
                assert rep.ok and rep.extra["hypothesis"] == "ok"

    def test_hypothesis_failure_reported(self):
        g = build_grid(0, 1, 8)
        rep = check_quotient_bound(g, np.zeros(8), np.ones(8), 0.5, 2.0)
        assert rep.trials == 0 and rep.extra["hypothesis"].startswith("failed")


class TestSignAndContraction:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_sign_part(self, p):
        assert check_sign_part(setup(p=p)[1], 200, seed=0).ok

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_contraction(self, p):
        assert check_contraction(setup(p=p)[1], 200, seed=0).ok


class TestCriterion:
    def test_logistic_q_equals_p(self):
        g, k = setup()
        lam1 = dense_oracle_p2(k, g, 0.0).value
        for lam, expect in ((0.9 * lam1, False), (1.1 * lam1, True)):
            v = evaluate_criterion(k, g, logistic(lam, 2, 4, 2))
            assert v.solvable is expect
            assert float(v.lambda_a0) == pytest.approx(lam1 - lam, abs=1e-8)
            assert v.lambda_ainf.tag == "plus_infinity"

    def test_logistic_q_below_p(self):
        g, k = setup()
        v = evaluate_criterion(k, g, logistic(0.1, 1.5, 4, 2))
        assert v.lambda_a0.tag == "minus_infinity" and v.solvable

    def test_negative_reaction_flagged(self):
        g, k = setup()
        v = evaluate_criterion(k, g, power_combo([(-1.0, 0.0), (-1.0, 1.0)], 2))
        assert not v.solvable and v.lambda_a0.tag == "plus_infinity"
        assert any("degenerate" in w for w in v.warnings)

    def test_json(self):
        g, k = setup(16)
        doc = evaluate_criterion(k, g, logistic(30, 2, 4, 2)).to_json()
        assert doc["solvable"] is True and doc["lambda_ainf"]["tag"] == "plus_infinity"


class TestNecessity:
    def test_solvable_run(self):
        g, k = setup()
        res = solve(k, g, logistic(25.0, 2, 4, 2))
        rep = check_necessity(k, g, logistic(25.0, 2, 4, 2), res, res.verdict)
        assert rep.ok and rep.trials == 1

    def test_zero_is_vacuous(self):
        g, k = setup()
        res = solve(k, g, logistic(1.0, 2, 4, 2))
        rep = check_necessity(k, g, logistic(1.0, 2, 4, 2), res, res.verdict)
        assert rep.ok and rep.trials == 0

    def test_tampered(self):
        g, k = setup()
        res = solve(k, g, logistic(25.0, 2, 4, 2))
        bad = replace(res.verdict, solvable=False)
        rep = check_necessity(k, g, logistic(25.0, 2, 4, 2), res, bad)
        assert rep.violations == 1
