import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heavytail_ldp import laws
from heavytail_ldp.errors import ConfigError, DegenerateModel, UnstableModel
from heavytail_ldp.model import (build_model, check_assumptions, lattice_span, sample_stationary,
                                 scaled_additive_path, simulate_path)

from _models import LOGNORMAL_NORMAL, NO_ATOM, ONE_SIDED, TWO_POINT, TWO_SIDED

positive = st.floats(0.05, 3.0)


@st.composite
def discrete_laws(draw):
    k = draw(st.integers(1, 4))
    a = draw(st.lists(st.floats(0.0, 3.0), min_size=k, max_size=k))
    b = draw(st.lists(st.floats(-2.0, 2.0), min_size=k, max_size=k))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    p = w / w.sum()
    return {"family": "discrete", "atoms": [[x, y, float(q)] for x, y, q in zip(a, b, p)]}


class TestLaws:
    @given(discrete_laws())
    def test_discrete_round_trip(self, d):
        law = laws.law_from_dict(d)
        assert laws.law_from_dict(laws.law_to_dict(law)) == law

    @pytest.mark.parametrize("spec", [TWO_POINT, LOGNORMAL_NORMAL, ONE_SIDED, TWO_SIDED, NO_ATOM])
    def test_round_trip_fixtures(self, spec):
        law = laws.law_from_dict(spec)
        assert laws.law_from_dict(laws.law_to_dict(law)) == law

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError):
            laws.law_from_dict({"family": "cauchy"})

    def test_extra_keys_rejected(self):
        bad = dict(LOGNORMAL_NORMAL, extra=1)
        with pytest.raises(ConfigError):
            laws.law_from_dict(bad)

    @given(st.floats(-1.0, 1.0), positive, st.floats(0.1, 3.0))
    def test_lognormal_moment_closed_form(self, mu, sigma, s):
        ln = laws.Lognormal(mu, sigma)
        assert ln.moment(s) == pytest.approx(math.exp(s * mu + 0.5 * s * s * sigma * sigma), rel=1e-12)

    @given(st.floats(-1.0, 1.0), positive, st.floats(0.1, 2.0), st.floats(0.1, 2.0))
    def test_lognormal_tilt_reweights_moments(self, mu, sigma, s, t):
        ln = laws.Lognormal(mu, sigma)
        assert ln.tilt(s).moment(t) == pytest.approx(ln.moment(s + t) / ln.moment(s), rel=1e-10)

    def test_power_uniform_tilt_reweights_moments(self):
        pu = laws.PowerUniform(0.2, 1.6, 0.5)
        for s, t in [(0.5, 1.0), (1.5, 0.3)]:
            assert pu.tilt(s).moment(t) == pytest.approx(pu.moment(s + t) / pu.moment(s), rel=1e-9)

    def test_uniform_abs_moment(self):
        u = laws.Uniform(-1.0, 2.0)
        # (1 + 8) / 3 / 3 for m = 2
        assert u.abs_moment(2.0) == pytest.approx(1.0)


class TestModel:
    def test_two_point_moments(self):
        m = build_model(TWO_POINT)
        assert m.mean_a() == pytest.approx(0.3 * 2 + 0.7 * 0.5)
        assert m.mean_log_a() == pytest.approx(0.3 * math.log(2) + 0.7 * math.log(0.5))
        assert m.mu == pytest.approx(1.0 / (1.0 - 0.95))

    def test_atom_model_moments(self):
        m = build_model(ONE_SIDED)
        assert m.zero_prob == pytest.approx(0.2)
        assert m.moment_a(1.5) == pytest.approx(1.0, abs=1e-12)
        assert m.mean_log_a() == -math.inf
        assert m.b_nonnegative
        assert not build_model(TWO_SIDED).b_nonnegative

    def test_moments_match_simulation(self):
        m = build_model(LOGNORMAL_NORMAL)
        path = simulate_path(m, 200_000, rng=1)
        assert np.mean(path.a) == pytest.approx(m.mean_a(), rel=0.01)
        assert np.mean(path.a ** 1.5) == pytest.approx(1.0, rel=0.03)

    def test_unstable_rejected(self):
        with pytest.raises(UnstableModel):
            build_model({"family": "discrete", "atoms": [[2.0, 1.0, 0.5], [1.0, 1.0, 0.5]]})

    def test_degenerate_rejected(self):
        # x = 1 is fixed by both maps 0.5 x + 0.5 and 0.2 x + 0.8
        deg = {"family": "discrete", "atoms": [[0.5, 0.5, 0.5], [0.2, 0.8, 0.5]]}
        with pytest.raises(DegenerateModel):
            build_model(deg)
        assert build_model(deg, strict=False).mu == pytest.approx(1.0)

    def test_tilted_model_has_unit_mean_at_zero_tilt(self):
        m = build_model(TWO_POINT)
        t = m.tilted(math.log2(7 / 3))
        assert t.moment_a(0.0) == pytest.approx(1.0)
        # tilting by alpha turns E A^(alpha + s) into E^alpha A^s
        assert t.moment_a(0.5) == pytest.approx(m.moment_a(math.log2(7 / 3) + 0.5))


class TestPaths:
    @given(st.integers(1, 300), st.integers(0, 10_000), st.floats(-5, 5))
    def test_replay_reproduces_states(self, n, seed, x0):
        path = simulate_path(build_model(LOGNORMAL_NORMAL), n, x0, rng=seed)
        assert len(path) == n + 1
        np.testing.assert_allclose(path.replay(), path.states, rtol=0, atol=0)

    @given(st.integers(1, 200), st.integers(0, 1000))
    def test_discrepancy_identity(self, n, seed):
        path = simulate_path(build_model(LOGNORMAL_NORMAL), n, 1.0, rng=seed)
        z = path.discrepancies
        # Z_n - Z_{n-1} = B_n exp(-S_n)
        np.testing.assert_allclose(np.diff(z), path.b * np.exp(-path.log_products[1:]), rtol=1e-8, atol=1e-10)

    def test_zero_atom_makes_discrepancy_undefined(self):
        path = simulate_path(build_model(ONE_SIDED), 200, 0.0, rng=3)
        first = int(np.argmax(path.a == 0))
        assert path.a[first] == 0
        assert np.all(np.isnan(path.discrepancies[first + 1:]))

    def test_same_seed_same_path(self):
        m = build_model(TWO_POINT)
        a = simulate_path(m, 50, rng=(7, "x"))
        b = simulate_path(m, 50, rng=(7, "x"))
        c = simulate_path(m, 50, rng=(7, "y"))
        np.testing.assert_array_equal(a.states, b.states)
        assert not np.array_equal(a.states, c.states)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=60))
    def test_scaled_path_values(self, xs):
        xs = np.array(xs)
        n = xs.size
        xi = scaled_additive_path(xs)
        for k in range(n + 1):
            assert xi(k / n) == pytest.approx(xs[:k].sum() / n, abs=1e-9)
        assert xi.terminal == pytest.approx(xs.sum() / n, abs=1e-9)

    def test_scaled_path_is_right_continuous_step(self):
        xi = scaled_additive_path(np.array([1.0, 2.0, 3.0, 4.0]))
        assert xi(0.0) == 0.0
        assert xi(0.2) == 0.0
        assert xi(0.25) == pytest.approx(0.25)
        assert xi.left_limit(0.5) == pytest.approx(0.25)

    def test_stationary_mean(self):
        m = build_model(LOGNORMAL_NORMAL)
        x = sample_stationary(m, 200_000, burn=300, seed=2)
        # mean zero, variance E B^2 / (1 - E A^2)
        assert abs(x.mean()) < 5 * x.std() / math.sqrt(x.size) + 0.01

    def test_stationary_worker_invariant(self):
        m = build_model(TWO_POINT)
        a = sample_stationary(m, 10_000, burn=50, seed=4, workers=1)
        b = sample_stationary(m, 10_000, burn=50, seed=4, workers=3)
        np.testing.assert_array_equal(a, b)


class TestDiagnostics:
    def test_lattice_span(self):
        assert lattice_span([math.log(2), -math.log(2)]) == pytest.approx(math.log(2))
        assert lattice_span([1.0, 1.5]) == pytest.approx(0.5)
        assert lattice_span([1.0, math.sqrt(2)]) is None

    def test_two_point_flags_lattice(self):
        m = build_model(TWO_POINT)
        diag = check_assumptions(m, math.log2(7 / 3), 20_000, seed=1)
        assert diag.check("stability").passed
        assert diag.check("alpha_moment").passed
        assert not diag.check("nonarithmetic").passed
        assert diag.lattice_span == pytest.approx(math.log(2))

    def test_lognormal_passes(self):
        diag = check_assumptions(build_model(LOGNORMAL_NORMAL), 1.5, 20_000, seed=1)
        assert diag.passed
        assert diag.drift_radius > 0

    def test_wrong_alpha_fails_moment_check(self):
        diag = check_assumptions(build_model(LOGNORMAL_NORMAL), 1.7, 20_000, seed=1)
        assert not diag.check("alpha_moment").passed
