import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from expflow.core import MetricSpace
from expflow.scales import (ScaleFn, ScaleRefiner, SemicontinuousSample, check_ll, check_strict_order, constant,
                            dowker_interpolate, exp_decay, grid_scale, jim_scale, read_grid_csv, refine_scale,
                            validate_scale, write_grid_csv)

PLANE = MetricSpace("R^2", 2)


def disk_cloud(radius=3.0, step=0.01):
    """Dense polar grid; contains the circle |y| = 1/2 exactly."""
    r = np.arange(0.0, radius + 1e-12, step)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


def test_strict_order_examples(rng):
    pts = rng.normal(size=(1000, 2))
    assert check_strict_order(constant(0.4), constant(0.5), pts)
    assert not check_strict_order(constant(0.5), constant(0.5), pts)
    assert check_strict_order(exp_decay(0.5), exp_decay(1.0), pts)


def test_constant_scale_rules():
    with pytest.raises(ValueError):
        constant(0.0)
    z = constant(0.0, kind="vanishing_on_singularities")
    assert z(np.array([1.0, 2.0])) == 0.0
    assert constant(0.3).scaled(2).constant == pytest.approx(0.6)


def test_jim_scale_value():
    d = jim_scale((3.0, 4.0), eps=0.5)
    assert d(np.array([0.0, 1.0])) == pytest.approx(0.5 * 5 * 0.5 * math.exp(-1))


def test_validate_scale_kinds():
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="not positive"):
        validate_scale(ScaleFn(lambda p: np.linalg.norm(p, axis=-1), name="norm"), pts)
    vanishing = ScaleFn(lambda p: np.linalg.norm(p, axis=-1), "vanishing_on_singularities", "norm")
    validate_scale(vanishing, pts, singularities=[np.zeros(2)])
    with pytest.raises(ValueError, match="does not vanish"):
        validate_scale(vanishing, pts, singularities=[np.ones(2)])


def test_check_ll_constant_pair_has_no_violations(rng):
    xs, ys = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
    assert check_ll(constant(0.5), constant(1.0), (xs, ys), PLANE).ok


def test_check_ll_finds_violations_for_gamma_equal_rho(rng):
    rho = exp_decay()
    xs = rng.uniform(-2, 2, size=(2000, 2))
    # move outward so rho(y) < rho(x) while staying inside B(x, rho(x))
    ys = xs + 0.5 * rho.evaluate_many(xs)[:, None] * xs / np.linalg.norm(xs, axis=1)[:, None]
    rep = check_ll(rho, rho, (xs, ys), PLANE)
    assert rep.n_tested == 2000 and len(rep.violations) > 0


def test_refine_constant_is_half():
    g = refine_scale(constant(0.8), PLANE, np.zeros((1, 2)))
    assert g.constant == pytest.approx(0.4)


def test_refine_at_origin_matches_closed_form():
    # the infimum of e^{-|y|} over |y| <= 1/2 is e^{-1/2}
    g = refine_scale(exp_decay(), PLANE, disk_cloud())
    assert g(np.zeros(2)) == pytest.approx(0.5 * math.exp(-0.5), abs=1e-12)
    assert g(np.zeros(2)) == pytest.approx(0.30327, abs=1e-5)


def test_refine_needs_cloud_and_positive_kind():
    with pytest.raises(ValueError):
        refine_scale(exp_decay(), PLANE, np.empty((0, 2)))
    with pytest.raises(ValueError):
        refine_scale(constant(0.0, kind="vanishing_on_singularities"), PLANE, np.zeros((1, 2)))


@pytest.mark.parametrize("rho", [exp_decay(), exp_decay(2.0, 0.5),
                                 ScaleFn(lambda p: 0.2 + np.abs(np.sin(p[..., 0])), name="wave")])
def test_refine_is_ll_below_rho_on_cloud_pairs(rho):
    rng = np.random.default_rng(7)
    cloud = rng.uniform(-2, 2, size=(1500, 2))
    g = refine_scale(rho, PLANE, cloud)
    xi, yi = rng.integers(0, 1500, size=(2, 10_000))
    rep = check_ll(g, rho, (cloud[xi], cloud[yi]), PLANE)
    assert rep.ok
    assert check_strict_order(g, rho, cloud)


def test_refine_monotonicity_fails_for_the_inf_formula():
    # rho1 <= rho2 everywhere, but rho2's larger ball reaches a point with small rho
    cloud = np.array([[0.0, 0.0], [0.3, 0.0]])
    rho1 = ScaleFn(lambda p: np.where(p[..., 0] < 0.1, 0.4, 0.01), name="rho1")
    rho2 = ScaleFn(lambda p: np.where(p[..., 0] < 0.1, 1.0, 0.01), name="rho2")
    assert np.all(rho1.evaluate_many(cloud) <= rho2.evaluate_many(cloud))
    g1 = refine_scale(rho1, PLANE, cloud)(np.zeros(2))
    g2 = refine_scale(rho2, PLANE, cloud)(np.zeros(2))
    assert g1 == pytest.approx(0.2) and g2 == pytest.approx(0.005)
    assert g1 > g2


def test_dowker_examples():
    nodes = np.array([[0.0], [1.0]])
    a = dowker_interpolate(SemicontinuousSample(nodes, [1.0, 1.0], "lower"),
                           SemicontinuousSample(nodes, [0.0, 0.0], "upper"))
    np.testing.assert_allclose(a.evaluate_many(np.array([[0.0], [0.5], [1.0]])), 0.5)
    b = dowker_interpolate(SemicontinuousSample(nodes, [1.0, 3.0], "lower"),
                           SemicontinuousSample(nodes, [0.0, 1.0], "upper"))
    np.testing.assert_allclose(b.values, [0.5, 2.0])
    with pytest.raises(ValueError, match="order violated"):
        dowker_interpolate(SemicontinuousSample(nodes, [1.0, 1.0], "lower"),
                           SemicontinuousSample(nodes, [0.0, 1.0], "upper"))


@given(st.integers(3, 30), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_dowker_between_at_nodes_and_off_nodes(n, dim, seed):
    rng = np.random.default_rng(seed)
    nodes = rng.uniform(-1, 1, size=(n, dim))
    gamma = rng.normal(size=n)
    beta = gamma + rng.uniform(1e-3, 1.0, size=n)
    alpha = dowker_interpolate(SemicontinuousSample(nodes, beta, "lower"),
                               SemicontinuousSample(nodes, gamma, "upper"))
    at = alpha.evaluate_many(nodes)
    assert np.all((gamma < at) & (at < beta))
    lo, hi = grid_scale(nodes, gamma, "real"), grid_scale(nodes, beta, "real")
    probe = rng.uniform(-1, 1, size=(200, dim))
    a, g, b = alpha.evaluate_many(probe), lo.evaluate_many(probe), hi.evaluate_many(probe)
    assert np.all((g < a + 1e-12) & (a < b + 1e-12))


def test_grid_csv_round_trip(tmp_path):
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    g = grid_scale(nodes, [0.1, 0.2, 0.3, 1 / 3])
    path = tmp_path / "scale.csv"
    write_grid_csv(g, path)
    back = read_grid_csv(path)
    np.testing.assert_array_equal(back.values, g.values)
    probe = np.array([[0.25, 0.5], [0.9, 0.1]])
    np.testing.assert_allclose(back.evaluate_many(probe), g.evaluate_many(probe))
    with pytest.raises(ValueError):
        write_grid_csv(exp_decay(), path)


def test_scale_refiner_estimator(rng):
    cloud = rng.uniform(-1, 1, size=(300, 2))
    est = ScaleRefiner(rho=exp_decay(), space=PLANE)
    vals = est.fit(cloud).transform(cloud)
    assert est.n_cloud_ == 300
    assert np.all(vals < exp_decay().evaluate_many(cloud))
    assert clone(est).get_params()["rho"].name == est.rho.name
