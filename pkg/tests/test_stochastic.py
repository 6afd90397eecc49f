import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qadmit.stochastic import (
    DeterministicSpec,
    GammaSpec,
    ParameterError,
    RngStream,
    gamma_from_rate_scv,
    sample,
    sampler,
    spec_from_dict,
)


def draws(spec, n, seed=0, stream="test"):
    f = sampler(spec, RngStream(seed, stream))
    return np.array([f() for _ in range(n)])


@pytest.mark.parametrize("rate,scv,shape,scale", [
    (0.95, 0.7, 1.428571, 0.736842),
    (1.0, 1.0, 1.0, 1.0),
    (0.5, 0.8, 1.25, 1.6),
])
def test_shape_scale(rate, scv, shape, scale):
    g = gamma_from_rate_scv(rate, scv)
    assert g.shape == pytest.approx(shape, abs=1e-6)
    assert g.scale == pytest.approx(scale, abs=1e-6)
    # independent oracle: scipy's gamma with these parameters has the requested moments
    m, v = stats.gamma(a=g.shape, scale=g.scale).stats("mv")
    assert float(m) == pytest.approx(1 / rate)
    assert float(v) / float(m) ** 2 == pytest.approx(scv)


@pytest.mark.parametrize("rate,scv", [(0, 1), (-1, 1), (1, 0), (1, -0.5), (math.inf, 1), (1, math.nan)])
def test_bad_parameters(rate, scv):
    with pytest.raises(ParameterError):
        gamma_from_rate_scv(rate, scv)


def test_deterministic():
    f = sampler(DeterministicSpec(2.0), RngStream(0, "x"))
    assert {f() for _ in range(100)} == {2.0}
    assert sample(DeterministicSpec(2.0), RngStream(0, "x")) == 2.0
    with pytest.raises(ParameterError):
        DeterministicSpec(0.0)


def test_exponential_tail():
    x = draws(gamma_from_rate_scv(1.0, 1.0), 10**6)
    assert abs((x > 1).mean() - math.exp(-1)) < 0.01


def test_moments_rate_02():
    x = draws(gamma_from_rate_scv(0.2, 0.8), 10**6)
    assert x.mean() == pytest.approx(5.0, rel=0.01)
    assert x.var() / x.mean() ** 2 == pytest.approx(0.8, rel=0.03)


def test_distribution_matches_scipy():
    g = gamma_from_rate_scv(0.33, 0.8)
    x = draws(g, 20000, seed=3)
    assert stats.kstest(x, stats.gamma(a=g.shape, scale=g.scale).cdf).pvalue > 0.001


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), label=st.text(min_size=1, max_size=8), n=st.integers(1, 3000))
def test_reproducible(seed, label, n):
    g = gamma_from_rate_scv(0.7, 0.5)
    a = draws(g, n, seed, label)
    b = draws(g, n, seed, label)
    assert a.tobytes() == b.tobytes()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_streams_differ(seed):
    u = RngStream(seed, "service/0").uniforms()
    v = RngStream(seed, "service/1").uniforms()
    a = [u() for _ in range(8)]
    assert a != [v() for _ in range(8)]


@settings(max_examples=40, deadline=None)
@given(rate=st.floats(1e-3, 1e3), scv=st.floats(0.05, 20), seed=st.integers(0, 1000))
def test_positive(rate, scv, seed):
    x = draws(GammaSpec(rate, scv), 2000, seed)
    assert (x > 0).all() and np.isfinite(x).all()


def test_stream_separation():
    # drawing from one label must not shift another
    a = RngStream(5, "arrival").uniforms()
    ref = [a() for _ in range(10)]
    b = RngStream(5, "routing").uniforms()
    for _ in range(5000):
        b()
    a2 = RngStream(5, "arrival").uniforms()
    assert [a2() for _ in range(10)] == ref


def test_spec_from_dict():
    assert spec_from_dict({"kind": "gamma", "rate": 0.95, "scv": 0.7}) == GammaSpec(0.95, 0.7)
    assert spec_from_dict({"kind": "deterministic", "value": 1.5}) == DeterministicSpec(1.5)
    for bad in ({"kind": "weibull"}, {"kind": "gamma", "rate": 1}, {"kind": "gamma", "rate": 1, "scv": 1, "x": 0}):
        with pytest.raises(ParameterError):
            spec_from_dict(bad)
    g = gamma_from_rate_scv(0.5, 0.8)
    assert spec_from_dict(g.to_dict()) == g
