import numpy as np
import pytest
from sklearn.base import clone

from expflow.expansivity import (ExpansivityFalsifier, Reparam, SearchBudget, certify_example_jim,
                                 check_delta_for_notion, check_isolated_at_infinity,
                                 check_singularities_isolated, falsify, knot_grid, normalize_notion,
                                 orbit_distinctness, recheck_witness, tail_check, witness_plot_rows)
from expflow.fixtures import make_fixture
from expflow.scales import ScaleFn, constant, jim_scale


@pytest.fixture(scope="module")
def sphere():
    return make_fixture("punctured_sphere")


def test_reparam_validation_and_extension():
    with pytest.raises(ValueError, match="contain 0"):
        Reparam([-1.0, 1.0], [-1.0, 1.0])
    with pytest.raises(ValueError, match="alpha\\(0\\)"):
        Reparam([-1.0, 0.0, 1.0], [-1.0, 0.2, 1.0])
    with pytest.raises(ValueError, match="increasing"):
        Reparam([0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    a = Reparam([-1.0, 0.0, 1.0], [-2.0, 0.0, 0.5])
    np.testing.assert_allclose(a([-3.0, -0.5, 0.0, 0.5, 4.0]), [-4.0, -1.0, 0.0, 0.25, 3.5])
    with pytest.raises(ValueError):
        knot_grid(5.0, 4)
    assert knot_grid(5.0, 5)[2] == 0.0


def test_notion_names_and_delta_kinds():
    assert normalize_notion("rescaling") == "rescaling_expansive"
    assert normalize_notion("topological-expansive") == "topological_expansive"
    with pytest.raises(ValueError):
        normalize_notion("sticky")
    with pytest.raises(ValueError, match="constant"):
        check_delta_for_notion("expansive", jim_scale())
    with pytest.raises(ValueError, match="vanishing"):
        check_delta_for_notion("rescaling_expansive", constant(0.1))
    with pytest.raises(ValueError, match="positive continuous"):
        check_delta_for_notion("topological_expansive", constant(0.0, kind="vanishing_on_singularities"))


@pytest.mark.parametrize("delta", [0.1, 0.05, 0.01])
def test_sphere_witness_is_valid_and_tail_verified(sphere, delta):
    budget = SearchBudget(pair_samples=8, seed=7)
    v = falsify(sphere, "expansive", 1.0, constant(delta), budget)
    assert v.found
    w = v.witness
    assert w.max_discrepancy < 0 and w.orbit_distinctness > 1e-3
    assert w.tail_flag == "tail_verified"
    assert v.iterations_used <= 100_000
    check = recheck_witness(sphere, w, constant(delta), 1.0, "expansive", budget.dt)
    assert check["valid"]
    # the same pair is also close for any larger constant scale
    assert recheck_witness(sphere, w, constant(2 * delta), 1.0, "expansive", budget.dt)["valid"]
    rows = witness_plot_rows(sphere, w, constant(delta), budget.dt)
    assert rows.shape[1] == 3 and np.all(rows[:, 1] < rows[:, 2])


def test_falsify_is_deterministic_across_jobs(sphere):
    budget = {"pair_samples": 6, "seed": 3}
    a = falsify(sphere, "expansive", 1.0, constant(0.05), budget, n_jobs=1).to_dict()
    b = falsify(sphere, "expansive", 1.0, constant(0.05), budget, n_jobs=3).to_dict()
    assert a == b


def test_translation_with_jim_scale_has_no_witness():
    flow = make_fixture("translation")
    v = falsify(flow, "topological_expansive", 1.0, jim_scale(flow.v, 1.0),
                SearchBudget(pair_samples=40, iterations=4000, seed=1))
    assert v.result == "no_witness" and v.witness is None
    assert v.pairs_screened == 40


def test_lattice_pairs_are_all_rejected():
    # distinct lattice points are at distance >= 1 > delta, so nothing passes the t = 0 premise
    flow = make_fixture("trivial_discrete")
    v = falsify(flow, "expansive", 1.0, constant(0.5), SearchBudget(pair_samples=4, max_attempts_factor=10))
    assert v.result == "no_witness"
    assert v.pairs_screened == 0 and v.pairs_rejected == 40


def test_rescaling_with_vanishing_scale_runs():
    flow = make_fixture("glued_limit")
    delta = ScaleFn(lambda p: 0.5 * np.abs(np.asarray(p, dtype=float)[..., 0]), "vanishing_on_singularities",
                    "vanishing(0.5)")
    v = falsify(flow, "rescaling", 1.0, delta, SearchBudget(pair_samples=4, iterations=400, seed=2))
    assert v.notion == "rescaling_expansive"
    assert v.result in ("witness_found", "no_witness")


def test_orbit_distinctness_zero_on_same_orbit():
    flow = make_fixture("translation")
    x = np.array([0.0, 0.0])
    assert orbit_distinctness(flow, x, np.array([0.5, 0.0]), 1.0, 0.05) == pytest.approx(0.0, abs=1e-12)
    assert orbit_distinctness(flow, x, np.array([0.0, 0.3]), 1.0, 0.05) == pytest.approx(0.3)


def test_tail_check_flags_parallel_lines_as_window_only():
    flow = make_fixture("translation")
    x, y = np.array([0.0, 0.0]), np.array([0.0, 0.01])
    flag, _ = tail_check(flow, x, y, Reparam.identity(5.0, 5), constant(0.1), 5.0, "expansive")
    assert flag == "window_only"


def test_jim_certificate_examples():
    flow = make_fixture("translation")
    x = np.array([0.2, -0.1])
    pairs = [(x, x + 0.3 * flow.v), (x, x.copy()), (np.zeros(2), np.array([0.0, 0.6]))]
    cert = certify_example_jim(flow, 1.0, pairs=pairs)
    shifted, same, far = cert.pairs
    assert shifted.premise_ok and shifted.alpha == pytest.approx(0.3, abs=1e-9)
    assert shifted.off_line == pytest.approx(0.0, abs=1e-12) and shifted.alpha_within_eps
    assert same.alpha == pytest.approx(0.0, abs=1e-12)
    assert not far.premise_ok and far.alpha is None
    assert cert.consistent


def test_jim_certificate_random_pairs_consistent():
    cert = certify_example_jim(make_fixture("translation"), 1.0, n_pairs=100, seed=0)
    assert cert.consistent
    assert all(p.premise_ok for p in cert.pairs)
    with pytest.raises(ValueError):
        certify_example_jim(make_fixture("colina"), 1.0)


@pytest.mark.parametrize("name, expected", [
    ("trivial_discrete", True), ("trivial_nonuniform", True), ("punctured_sphere", True),
    ("radial_plane", True), ("glued_limit", False),
])
def test_singularities_isolated(name, expected):
    assert check_singularities_isolated(make_fixture(name)) is expected


def test_isolated_at_infinity_on_radial_fixtures(sphere):
    rng = np.random.default_rng(0)
    radial = make_fixture("radial_plane")
    assert check_isolated_at_infinity(radial, radial.sample_points(rng, 50))
    assert check_isolated_at_infinity(sphere, sphere.sample_points(rng, 50))
    with pytest.raises(ValueError):
        check_isolated_at_infinity(make_fixture("translation"), np.zeros((1, 2)))


def test_constant_scale_verdict_depends_on_the_metric(sphere):
    # same radial dynamics: the chordal metric lets orbits merge at the poles, the plane metric does not
    radial = make_fixture("radial_plane")
    budget = SearchBudget(pair_samples=4, iterations=4000, seed=7)
    assert falsify(radial, "expansive", 1.0, constant(0.05), budget).result == "no_witness"
    assert falsify(sphere, "expansive", 1.0, constant(0.05), budget).found


def test_falsifier_estimator(sphere):
    est = ExpansivityFalsifier(flow=sphere, eps=1.0, delta=constant(0.1), pair_samples=4, random_state=7)
    est.fit()
    assert est.verdict_.found and est.witness_ is est.verdict_.witness
    assert clone(est).get_params()["pair_samples"] == 4
    with pytest.raises(ValueError):
        ExpansivityFalsifier().fit()
