import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expflow.core import (Conjugacy, DomainEscape, MetricSpace, TimeScaledFlow, conjugate_flow, evaluate,
                          group_law_residual)
from expflow.fixtures import (POLES, STEREOGRAPHIC, ColinaFlow, RadialFlow, TranslationFlow, colina_conjugacy,
                              inverse_stereographic, make_fixture, punctured_sphere, stereographic)

VECTOR_FIXTURES = ["radial_plane", "punctured_sphere", "translation", "colina", "trivial_discrete",
                   "trivial_nonuniform", "glued_limit"]


def test_radial_closed_form():
    flow = RadialFlow()
    np.testing.assert_allclose(flow.evaluate(np.array([1.0, 0.0]), 1.0), [math.e, 0.0], rtol=1e-15)


def test_zero_time_returns_the_point_itself():
    x = np.array([0.3, -0.2])
    assert evaluate(TranslationFlow(), x, 0.0) is x


def test_colina_closed_form():
    np.testing.assert_allclose(ColinaFlow().evaluate(np.array([0.0, 1.0]), 1.0), [1.0, math.e], rtol=1e-15)


def test_conjugated_translation_is_colina(rng):
    conj = conjugate_flow(TranslationFlow(), colina_conjugacy())
    colina = ColinaFlow()
    for p in rng.uniform(-2, 2, size=(50, 2)):
        t = rng.uniform(-3, 3)
        np.testing.assert_allclose(conj.evaluate(p, t), colina.evaluate(p, t), rtol=1e-12, atol=1e-12)


def test_sphere_flow_matches_the_formula():
    sp = punctured_sphere()
    p = inverse_stereographic(np.array([0.5, 0.25]))
    expected = inverse_stereographic(math.exp(0.7) * np.array([0.5, 0.25]))
    np.testing.assert_allclose(sp.evaluate(p, 0.7), expected, atol=1e-14)


def test_origin_and_poles_escape():
    with pytest.raises(DomainEscape):
        RadialFlow().evaluate(np.array([0.0, 0.0]), 1.0)
    with pytest.raises(DomainEscape):
        punctured_sphere().evaluate(inverse_stereographic(np.array([1.0, 0.0])), 40.0)


def test_sphere_space_excludes_poles():
    sp = punctured_sphere()
    for pole in POLES:
        assert not sp.space.contains(np.array(pole))
    assert sp.space.contains(np.array([1.0, 0.0, 0.0]))


@pytest.mark.parametrize("name", VECTOR_FIXTURES)
def test_group_law_on_a_thousand_samples(name):
    flow = make_fixture(name)
    rng = np.random.default_rng(1)
    pts = flow.sample_points(rng, 1000)
    worst = 0.0
    for x in pts:
        s, t = rng.uniform(-2, 2, size=2)
        d = group_law_residual(flow, x, s, t)
        # relative to the size of the image point for the unbounded radial orbits
        scale = max(1.0, float(np.linalg.norm(flow.evaluate(x, s + t))))
        worst = max(worst, d / scale)
    assert worst < flow.tol_group


def test_group_law_on_suspension():
    flow = make_fixture("suspension:golden")
    rng = np.random.default_rng(2)
    for x in flow.sample_points(rng, 200):
        s, t = rng.uniform(-5, 5, size=2)
        assert group_law_residual(flow, x, s, t) < 1e-9


@pytest.mark.parametrize("pair", ["colina", "sphere"])
def test_conjugacy_intertwines(pair):
    rng = np.random.default_rng(3)
    if pair == "colina":
        psi, phi, h = ColinaFlow(), TranslationFlow(), colina_conjugacy().h
        ys = rng.uniform(-2, 2, size=(1000, 2))
    else:
        psi, phi, h = punctured_sphere(), RadialFlow(), STEREOGRAPHIC.h
        ys = psi.sample_points(rng, 1000)
    ts = rng.uniform(-2, 2, size=1000)
    worst = 0.0
    for y, t in zip(ys, ts):
        lhs = h(psi.evaluate(y, t))
        rhs = phi.evaluate(h(y), t)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)) / max(1.0, float(np.linalg.norm(rhs))))
    assert worst < 1e-9


@pytest.mark.parametrize("name", ["punctured_sphere", "translation", "trivial_nonuniform"])
def test_triangle_inequality_vector(name):
    flow = make_fixture(name)
    rng = np.random.default_rng(4)
    a, b, c = (flow.sample_points(rng, 10_000) for _ in range(3))
    d = flow.space.dist
    # rounding slack relative to coordinate magnitude (points reach 10^4 for the nonuniform set)
    slack = 1e-12 * (1 + np.abs(a).max(axis=1) + np.abs(b).max(axis=1) + np.abs(c).max(axis=1))
    assert np.all(d(a, c) <= d(a, b) + d(b, c) + slack)


def test_triangle_inequality_suspension():
    flow = make_fixture("suspension:full2")
    rng = np.random.default_rng(5)
    a, b, c = (flow.sample_points(rng, 10_000, period=6) for _ in range(3))
    d = flow.space.dist
    assert np.all(d(a, c) <= d(a, b) + d(b, c) + 1e-12)


def test_stereographic_round_trip(rng):
    w = rng.normal(size=(200, 2)) * 3
    np.testing.assert_allclose(stereographic(inverse_stereographic(w)), w, rtol=1e-10, atol=1e-10)


def test_conjugacy_inverse_check_rejects_bad_pair():
    bad = Conjugacy(lambda p: p, lambda p: 2 * p, "broken")
    with pytest.raises(ValueError, match="inverse consistency"):
        conjugate_flow(TranslationFlow(), bad, samples=[np.array([1.0, 1.0])])


def test_time_scaled_flow():
    base = TranslationFlow((1.0, 0.5))
    fast = TimeScaledFlow(base, 2.0)
    x = np.array([0.1, 0.2])
    np.testing.assert_allclose(fast.evaluate(x, 1.5), base.evaluate(x, 3.0))
    with pytest.raises(ValueError):
        TimeScaledFlow(base, 0.0)


def test_metric_space_validation():
    with pytest.raises(ValueError):
        MetricSpace("bad", 2, "uniformly_discrete")
    space = MetricSpace("R^2", 2)
    with pytest.raises(ValueError):
        space.as_points([[1.0, np.nan]])
    with pytest.raises(ValueError):
        TranslationFlow((0.0, 0.0))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_translation_group_law_property(x, y, s, t):
    flow = TranslationFlow((0.3, -1.2))
    assert group_law_residual(flow, np.array([x, y]), s, t) < 1e-9


def test_unknown_fixture():
    with pytest.raises(ValueError, match="unknown fixture"):
        make_fixture("lorenz")
