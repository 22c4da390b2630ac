import math

import numpy as np
import pytest

from heavytail_ldp.errors import BudgetTooSmall, ConfigError, NoAlphaRoot, UnstableModel
from heavytail_ldp.measure import (dual_is_tail, estimate_C_infinity, estimate_cycle_constants,
                                   plain_mc_tail, solve_alpha, tilt)
from heavytail_ldp.model import build_model
from heavytail_ldp.regen import find_minorization

import _oracles as O
from _models import LOGNORMAL_NORMAL, ONE_SIDED, TWO_POINT, TWO_POINT_ALPHA, lognormal_location


@pytest.fixture(scope="module")
def one_sided():
    model = build_model(ONE_SIDED)
    return model, find_minorization(model, "atom"), solve_alpha(model).alpha


class TestAlpha:
    def test_two_point(self):
        cal = solve_alpha(build_model(TWO_POINT))
        assert cal.alpha == pytest.approx(TWO_POINT_ALPHA, rel=1e-12)
        assert cal.alpha == pytest.approx(O.kesten_index_discrete(TWO_POINT["atoms"]), rel=1e-12)
        assert abs(cal.residual) < 1e-12

    def test_lognormal(self):
        cal = solve_alpha(build_model(LOGNORMAL_NORMAL))
        assert cal.alpha == pytest.approx(O.kesten_index_lognormal(-0.6, math.sqrt(0.8)), rel=1e-12)
        assert cal.exceeds_one

    @pytest.mark.parametrize("p0,alpha", [(0.2, 1.5), (0.5, 2.5), (0.05, 3.0)])
    def test_atom_models(self, p0, alpha):
        spec = {"family": "atom_plus_density", "p0": p0,
                "a": {"lognormal": {"mu": lognormal_location(p0, alpha, 0.5), "sigma": 0.5}},
                "b": {"uniform": {"lo": 0.0, "hi": 1.0}}, "b_at_zero": {"uniform": {"lo": 0.0, "hi": 1.0}}}
        assert solve_alpha(build_model(spec)).alpha == pytest.approx(alpha, rel=1e-10)

    def test_bounded_multiplier_has_no_root(self):
        law = {"family": "discrete", "atoms": [[0.9, 1.0, 0.5], [0.3, 1.0, 0.5]]}
        with pytest.raises((NoAlphaRoot, UnstableModel)):
            solve_alpha(build_model(law, strict=False))


class TestTilt:
    def test_normalization_at_index(self, one_sided):
        model, _, alpha = one_sided
        tm = tilt(model, alpha)
        assert tm.normalization == pytest.approx(1.0, abs=1e-12)
        assert tm.model.zero_prob == 0.0

    def test_inverse_tilt_recovers_moments(self, one_sided):
        model, _, alpha = one_sided
        tm = tilt(model, alpha)
        g = lambda a, b: (a > 0.5) * (1.0 + b)
        direct, back = tm.inverse_tilt_check(g, 200_000, seed=3)
        assert abs(direct.value - back.value) < 4 * math.hypot(direct.stderr, back.stderr)

    def test_negative_alpha(self, one_sided):
        with pytest.raises(ConfigError):
            tilt(one_sided[0], -1.0)


class TestConstants:
    def test_goldie_matches_brute_force_tail(self, one_sided):
        model, _, alpha = one_sided
        rep = estimate_C_infinity(model, alpha, 200_000, seed=2)
        assert rep.agree and not rep.no_heavy_tail
        u, n = 1000.0, 2_000_000
        frac = O.perpetuity_tail_product(0.2, lognormal_location(0.2, 1.5, 0.5), 0.5, u, n)
        brute, se = u**alpha * frac, u**alpha * math.sqrt(frac / n)
        assert abs(rep.goldie.value - brute) < 4 * math.hypot(se, rep.goldie.stderr)

    def test_cycle_constants_one_sided(self, one_sided):
        model, minor, alpha = one_sided
        rep = estimate_cycle_constants(model, minor, alpha, 20_000, seed=1)
        assert rep.E_r1.value == pytest.approx(5.0)
        assert rep.C_minus.value == 0.0
        assert rep.C_plus.value > 0
        # E B / (1 - E A) with E B = 1/2 and E A = 0.8 exp(mu + sigma^2 / 2)
        ea = 0.8 * math.exp(lognormal_location(0.2, 1.5, 0.5) + 0.125)
        assert rep.mu.value == pytest.approx(0.5 / (1 - ea), rel=1e-12)
        d = rep.to_dict()
        assert set(d) >= {"C_infinity", "C_plus", "C_minus", "E_r1", "mu", "alpha"}

    def test_cycle_constants_worker_invariant(self, one_sided):
        model, minor, alpha = one_sided
        a = estimate_cycle_constants(model, minor, alpha, 9000, seed=4, c_inf_budget=50_000, workers=1)
        b = estimate_cycle_constants(model, minor, alpha, 9000, seed=4, c_inf_budget=50_000, workers=3)
        assert a.C_plus.value == b.C_plus.value
        assert a.C_infinity.value == b.C_infinity.value


class TestTailCurves:
    def test_dual_agrees_with_plain(self, one_sided):
        model, minor, alpha = one_sided
        u = [30.0, 60.0]
        dual = dual_is_tail(model, minor, alpha, u, 0.7, 40_000, seed=5)
        plain = plain_mc_tail(model, minor, u, 100_000, seed=6)
        for i in range(len(u)):
            assert abs(dual.p_hat[i] - plain.p_hat[i]) < 4 * math.hypot(dual.stderr[i], plain.stderr[i])
        assert np.all(np.diff(dual.p_hat) < 0)

    def test_rows_and_scaling_column(self, one_sided):
        model, minor, alpha = one_sided
        curve = dual_is_tail(model, minor, alpha, [100.0, 400.0], 0.7, 20_000, seed=7)
        rows = curve.rows()
        assert len(rows) == 2
        u, p, _, c = rows[1]
        assert c == pytest.approx(u**alpha * p)

    def test_negative_area_of_nonnegative_chain(self, one_sided):
        model, minor, alpha = one_sided
        plain = plain_mc_tail(model, minor, [1.0], 5000, functional="neg_area", seed=1)
        assert plain.p_hat[0] == 0.0

    @pytest.mark.parametrize("kw", [{"beta": 1.0}, {"beta": 0.0}, {"functional": "max"},
                                    {"complement": "maybe"}])
    def test_bad_arguments(self, one_sided, kw):
        model, minor, alpha = one_sided
        args = {"beta": 0.7, **kw}
        beta = args.pop("beta")
        with pytest.raises(ConfigError):
            dual_is_tail(model, minor, alpha, [10.0], beta, 1000, **args)

    def test_decreasing_grid_required(self, one_sided):
        model, minor, alpha = one_sided
        with pytest.raises(ConfigError):
            dual_is_tail(model, minor, alpha, [10.0, 5.0], 0.7, 1000)

    def test_tiny_budget(self, one_sided):
        model, minor, alpha = one_sided
        with pytest.raises(BudgetTooSmall):
            dual_is_tail(model, minor, alpha, [1e6], 0.7, 50, min_hits=100)

    def test_worker_invariance(self, one_sided):
        model, minor, alpha = one_sided
        a = dual_is_tail(model, minor, alpha, [50.0], 0.7, 10_000, seed=8, workers=1)
        b = dual_is_tail(model, minor, alpha, [50.0], 0.7, 10_000, seed=8, workers=4)
        np.testing.assert_array_equal(a.p_hat, b.p_hat)
