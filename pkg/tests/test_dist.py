import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainsup import dist
from chainsup.streams import RngStream

ALL_MODELS = {
    "gaussian": dist.gaussian,
    "rademacher": dist.rademacher,
    "sym_exponential": dist.sym_exponential,
    "sym_weibull_1.5": lambda: dist.sym_weibull(1.5),
    "three_point_100": lambda: dist.three_point(100.0),
}


@pytest.fixture(params=list(ALL_MODELS), ids=list(ALL_MODELS))
def model(request):
    return ALL_MODELS[request.param]()


class TestMoments:
    def test_standardized(self, model):
        assert model.moment(2) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_in_p(self, model):
        grid = [1, 1.5, 2, 3, 4.5, 8, 16, 31, 64]
        moments = [model.moment(p) for p in grid]
        for lo, hi in zip(moments, moments[1:]):
            assert hi >= lo - 1e-12

    def test_gaussian_p4(self):
        # quadrature oracle: E g^4 = 3
        g = dist.gaussian()
        assert g.moment(4) == pytest.approx(3.0 ** 0.25, rel=1e-12)
        assert dist.moment_quadrature(g, 4) == pytest.approx(3.0 ** 0.25, rel=1e-8)

    def test_rademacher_any_p(self):
        assert dist.rademacher().moment(17) == 1.0

    def test_sym_exponential_p3(self):
        # Gamma(p+1)^(1/p)/sqrt(2) against quadrature
        e = dist.sym_exponential()
        assert e.moment(3) == pytest.approx(6.0 ** (1 / 3) / math.sqrt(2), rel=1e-12)
        assert dist.moment_quadrature(e, 3) == pytest.approx(e.moment(3), rel=1e-8)

    def test_quadrature_consistency(self, model):
        for p in (2, 3.5, 6):
            assert dist.moment_quadrature(model, p) == pytest.approx(
                model.moment(p), rel=1e-6)

    def test_three_point_closed_form(self):
        tp = dist.three_point(100.0)
        assert tp.moment(4) == pytest.approx(10.0, rel=1e-12)

    def test_p_below_one_rejected(self, model):
        with pytest.raises(ValueError):
            model.moment(0.5)


class TestTails:
    def test_rademacher(self):
        r = dist.rademacher()
        assert r.tail_value(0.5) == 0.0
        assert r.tail_value(1.0) == math.inf

    def test_sym_exponential_linear(self):
        e = dist.sym_exponential()
        for t in (0.1, 1.0, 7.3):
            assert e.tail_value(t) == pytest.approx(math.sqrt(2) * t, rel=1e-12)

    def test_gaussian_zero(self):
        assert dist.gaussian().tail_value(0.0) == pytest.approx(0.0, abs=1e-12)

    def test_negative_rejected(self, model):
        with pytest.raises(ValueError):
            model.tail_value(-0.1)

    def test_nondecreasing(self, model):
        hi = min(model.support_bound, 50.0)
        ts = np.linspace(0, hi * 0.999, 100)
        vals = np.asarray(model.tail_value(ts))
        assert np.all(np.diff(vals) >= -1e-12)

    def test_tail_moment_identity(self, model):
        # moment(p)^p = int p t^(p-1) exp(-N(t)) dt
        for p in (2.0, 4.0):
            assert dist.moment_quadrature(model, p) ** p == pytest.approx(
                model.moment(p) ** p, rel=1e-6)


class TestSampling:
    def test_rademacher_values(self):
        vals = dist.rademacher().sample(RngStream(1, 2), 4)
        assert set(np.unique(vals)) <= {-1.0, 1.0}

    def test_determinism(self, model):
        s = RngStream(123, 7)
        a = model.sample(s, 1000)
        b = model.sample(s, 1000)
        assert np.array_equal(a, b)

    def test_streams_differ(self, model):
        # large count so rare-atom families differ with certainty
        a = model.sample(RngStream(123, 1), 100_000)
        b = model.sample(RngStream(123, 2), 100_000)
        assert not np.array_equal(a, b)

    def test_moments_match(self, model):
        n = 200_000
        x = model.sample(RngStream(99, 0), n)
        # mean 0 and variance 1 at 4 stderr
        assert abs(x.mean()) <= 4 * x.std() / math.sqrt(n)
        var = x.var()
        var_se = np.sqrt(max((x ** 2).var(), 1e-12) / n)
        # 16/n covers the O(1/n) bias when X^2 is (nearly) degenerate
        assert abs(var - 1.0) <= 4 * var_se + 16.0 / n

    def test_negative_count_rejected(self, model):
        with pytest.raises(ValueError):
            model.sample(RngStream(0, 0), -1)

    def test_tail_defined_family_sampler(self):
        m = dist.log_concave_from_tail(lambda t: np.sqrt(2) * np.asarray(t))
        assert m.moment(2) == pytest.approx(1.0, abs=1e-6)
        x = m.sample(RngStream(5, 0), 200_000)
        assert abs(x.var() - 1.0) < 0.02
        assert abs(x.mean()) < 0.01


class TestAlphaRegular:
    def test_rademacher_alpha1(self):
        assert dist.check_alpha_regular(dist.rademacher(), 1.0).passed

    def test_gaussian_alpha1(self):
        w = dist.check_alpha_regular(dist.gaussian(), 1.0)
        assert w.passed
        # extremal normalized ratio stays near sqrt(q/p) < 1
        q, p = w.witness_pair
        assert w.ratio <= math.sqrt(p / q) * 1.01

    def test_three_point_fails(self):
        w = dist.check_alpha_regular(dist.three_point(100.0), 5.0, (2, 4))
        assert not w.passed
        assert w.witness_pair == (2.0, 4.0)
        assert w.ratio == pytest.approx(10.0, rel=1e-9)

    def test_fail_witness_recomputable(self):
        m = dist.three_point(100.0)
        w = dist.check_alpha_regular(m, 5.0, (2, 4))
        q, p = w.witness_pair
        assert m.moment(p) >= w.level * (p / q) * m.moment(q) - 1e-9

    def test_monotone_in_alpha(self, model):
        grid = (2, 4, 8, 16)
        passing = [a for a in (1.0, 2.0, 4.0, 8.0, 16.0)
                   if dist.check_alpha_regular(model, a, grid).passed]
        # pass at alpha implies pass at any larger alpha
        if passing:
            lo = min(passing)
            assert all(a in passing for a in (2.0, 4.0, 8.0, 16.0) if a >= lo)

    def test_bad_grid_rejected(self):
        with pytest.raises(ValueError):
            dist.check_alpha_regular(dist.gaussian(), 1.0, (1.5, 4))

    def test_bad_alpha_rejected(self):
        with pytest.raises(ValueError):
            dist.check_alpha_regular(dist.gaussian(), 0.5)


class TestSpeedBeta:
    def test_rademacher_always_fails(self):
        for beta in (2.0, 4.0, 8.0):
            w = dist.check_speed_beta(dist.rademacher(), beta)
            assert not w.passed
            assert w.ratio == pytest.approx(1.0)
            assert w.witness_pair[0] == 2.0

    def test_gaussian_beta4_fails_at_p2(self):
        w = dist.check_speed_beta(dist.gaussian(), 4.0)
        assert not w.passed
        assert w.witness_pair[0] == 2.0
        assert w.ratio == pytest.approx(105.0 ** 0.125, rel=1e-9)

    def test_gaussian_beta8_passes(self):
        w = dist.check_speed_beta(dist.gaussian(), 8.0)
        assert w.passed
        r2 = dist.gaussian().moment(16) / dist.gaussian().moment(2)
        assert r2 == pytest.approx(2027025.0 ** (1 / 16), rel=1e-9)

    def test_bad_beta_rejected(self):
        with pytest.raises(ValueError):
            dist.check_speed_beta(dist.gaussian(), 1.0)


@given(p=st.floats(min_value=1.0, max_value=60.0),
       q=st.floats(min_value=1.0, max_value=60.0))
@settings(max_examples=50, deadline=None)
def test_moment_monotonicity_property(p, q):
    g = dist.gaussian()
    if p <= q:
        assert g.moment(p) <= g.moment(q) * (1 + 1e-12)
    else:
        assert g.moment(q) <= g.moment(p) * (1 + 1e-12)


def test_descriptor_round_trip():
    for make in ALL_MODELS.values():
        m = make()
        d = dist.model_descriptor(m)
        m2 = dist.model_from_descriptor(d)
        assert m2.family == m.family
        assert m2.moment(4) == pytest.approx(m.moment(4), rel=1e-12)


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        dist.model_from_descriptor({"family": "cauchy"})
