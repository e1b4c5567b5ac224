import math
from itertools import combinations

import numpy as np
import pytest
from sklearn.base import clone

from expflow.core import MetricSpace
from expflow.fixtures import RadialFlow, TranslationFlow, TrivialFlow, make_fixture
from expflow.scales import constant, exp_decay, jim_scale
from expflow.separation import (CompactSample, SeparationEngine, SeparationEstimator, SeparationReport, beta,
                                is_separated_pair, make_compact, max_separated_set, min_spanning_set,
                                separation_report)
from expflow.symbolic import FULL_2_SHIFT, cylinder_sample


def line_flow(points):
    space = MetricSpace("line", 1)
    return TrivialFlow("trivial_line", space, lambda rng, n: np.asarray(points, float).reshape(-1, 1), 0.1)


# -- brute-force oracle written directly from the definitions -------------------
def oracle_counts(flow, pts, t, delta, dt):
    n = len(pts)
    times = [k * dt for k in range(int(math.floor(t / dt + 1e-9)) + 1)]
    orbit = [[flow.evaluate(pts[i], s) for s in times] for i in range(n)]

    def sep_one(i, j):
        return any(flow.space.metric(orbit[i][k], orbit[j][k]) >= delta(orbit[i][k]) for k in range(len(times)))

    def shadows(i, j):
        return all(flow.space.metric(orbit[i][k], orbit[j][k]) <= delta(orbit[i][k]) for k in range(len(times)))

    S = max(size for size in range(1, n + 1) for c in combinations(range(n), size)
            if all(sep_one(a, b) and sep_one(b, a) for a, b in combinations(c, 2)))
    R = min(size for size in range(1, n + 1) for c in combinations(range(n), size)
            if all(any(shadows(a, j) for a in c) for j in range(n)))
    return S, R


def test_is_separated_pair_examples():
    flow = line_flow([0.0, 1.0])
    a, b = np.array([0.0]), np.array([1.0])
    assert not is_separated_pair(flow, a, a, 1.0, constant(0.5), 0.1)
    assert is_separated_pair(flow, a, b, 0.0, constant(0.5), 0.1)
    radial = RadialFlow()
    x, y = np.array([1.0, 0.0]), np.array([1.01, 0.0])
    assert is_separated_pair(radial, x, y, 2.0, constant(0.05), 0.01)
    # ln 5 is the first separating time
    assert not is_separated_pair(radial, x, y, 1.6, constant(0.05), 0.01)
    assert is_separated_pair(radial, x, y, 1.61, constant(0.05), 0.01)


@pytest.mark.parametrize("gap,S,R", [(1.0, 2, 2), (0.3, 1, 1)])
def test_two_point_trivial_flow(gap, S, R):
    flow = line_flow([0.0, gap])
    rep = separation_report(flow, [[0.0], [gap]], 1.0, constant(0.5), 0.5)
    assert (rep.S_lower, rep.R_upper) == (S, R)
    assert rep.S_exact and rep.R_exact


def test_single_point_spans():
    rep = min_spanning_set(TranslationFlow(), [[0.0, 0.0]], 3.0, constant(0.1), 0.5)
    assert rep.R_upper == 1


def test_suspension_depth6_counts():
    flow = make_fixture("suspension:full2")
    K = cylinder_sample(FULL_2_SHIFT, 6)
    rep = separation_report(flow, K, 3.0, constant(2.0 ** -3), 1.0)
    assert rep.S_lower == 64 and rep.R_upper == 64 and rep.S_exact and rep.R_exact


def test_suspension_depth6_counts_by_brute_force_metric():
    # every pair of distinct depth-6 cylinders is separated: some shift s in {0..3}
    # moves a disagreement into positions -3..3
    flow = make_fixture("suspension:full2")
    K = cylinder_sample(FULL_2_SHIFT, 6)
    times = [0.0, 1.0, 2.0, 3.0]
    orbits = [[flow.evaluate(p, s) for s in times] for p in K]
    for i, j in combinations(range(len(K)), 2):
        assert max(flow.space.metric(a, b) for a, b in zip(orbits[i], orbits[j])) >= 2.0 ** -3


def test_beta_examples():
    assert beta(TranslationFlow(), [[0.0, 0.0]], 2.0, jim_scale(), 0.1) == pytest.approx(0.5 * math.exp(-2))
    assert beta(RadialFlow(), [[1.0, 0.0], [0.0, 2.0]], 3.0, constant(0.1), 0.1) == 0.1


def test_beta_undefined_for_vanishing_scale():
    flow = line_flow([0.0, 1.0])
    vanish = constant(0.0, kind="vanishing_on_singularities")
    with pytest.raises(ValueError, match="beta undefined"):
        beta(flow, [[0.0]], 1.0, vanish, 0.5)


@pytest.mark.parametrize("seed", range(12))
def test_exact_solvers_match_oracle(seed):
    rng = np.random.default_rng(seed)
    flow = make_fixture(["translation", "colina", "radial_plane"][seed % 3])
    n = int(rng.integers(2, 8))
    pts = rng.uniform(0.3, 1.2, size=(n, 2))
    delta = constant(0.4) if seed % 2 else exp_decay(0.8, 0.5)
    eng = SeparationEngine(flow, pts, delta, 0.25, 1.0)
    S, R = oracle_counts(flow, pts, 1.0, delta, 0.25)
    assert len(eng.separated_set(1.0)[0]) == S
    assert len(eng.spanning_set(1.0)[0]) == R


def test_greedy_bounds_bracket_exact():
    rng = np.random.default_rng(11)
    flow = make_fixture("colina")
    pts = rng.uniform(-1, 1, size=(10, 2))
    delta = constant(0.35)
    exact = SeparationEngine(flow, pts, delta, 0.25, 1.5)
    s_exact = len(exact.separated_set(1.5)[0])
    r_exact = len(exact.spanning_set(1.5)[0])
    greedy_s, ex_s, m = exact.separated_set(1.5, exact_threshold=0)
    greedy_r, ex_r, _ = exact.spanning_set(1.5, exact_threshold=0)
    assert m == "greedy" and not ex_s and not ex_r
    assert len(greedy_s) <= s_exact and len(greedy_r) >= r_exact


def test_monotone_in_t_and_delta():
    rng = np.random.default_rng(3)
    flow = make_fixture("colina")
    pts = rng.uniform(-1, 1, size=(9, 2))
    counts_t = [max_separated_set(flow, pts, t, constant(0.3), 0.25).S_lower for t in (0.0, 0.5, 1.0, 2.0)]
    assert counts_t == sorted(counts_t)
    counts_d = [max_separated_set(flow, pts, 1.0, constant(d), 0.25).S_lower for d in (0.1, 0.3, 0.9)]
    assert counts_d == sorted(counts_d, reverse=True)


def test_witness_sets_are_valid():
    rng = np.random.default_rng(5)
    flow = make_fixture("radial_plane")
    pts = rng.uniform(0.5, 1.5, size=(40, 2))
    delta = exp_decay(0.7, 0.3)
    eng = SeparationEngine(flow, pts, delta, 0.25, 1.0)
    sep, shadow = eng.matrices(1.0)
    s_idx, _, _ = eng.separated_set(1.0, seed=2)
    r_idx, _, _ = eng.spanning_set(1.0, seed=2)
    assert all(sep[i, j] for i, j in combinations(s_idx, 2))
    assert shadow[r_idx].any(axis=0).all()


def test_deterministic_across_jobs():
    rng = np.random.default_rng(9)
    flow = make_fixture("colina")
    pts = rng.uniform(-1, 1, size=(60, 2))
    a = separation_report(flow, pts, 2.0, constant(0.2), 0.1, seed=4, n_jobs=1)
    b = separation_report(flow, pts, 2.0, constant(0.2), 0.1, seed=4, n_jobs=4)
    assert a.to_dict() == b.to_dict()


def test_report_csv_row():
    flow = line_flow([0.0, 1.0])
    rep = separation_report(flow, [[0.0], [1.0]], 1.0, constant(0.5), 0.5, seed=3)
    assert SeparationReport.CSV_HEADER[0] == "t"
    assert rep.csv_row() == "1,0.5,2,2,2,0.5,1,3"
    assert rep.spanning_scope == "K-restricted spanning"


def test_compact_validation():
    sphere = make_fixture("punctured_sphere")
    with pytest.raises(ValueError, match="outside"):
        make_compact(sphere, [[0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        make_compact(TranslationFlow(), np.empty((0, 2)))
    K = make_compact(TranslationFlow(), [[0.0, 0.0]], "origin", 1, "O")
    assert isinstance(K, CompactSample) and len(K) == 1


def test_separation_estimator():
    est = SeparationEstimator(flow=line_flow([0.0, 1.0]), delta=constant(0.5), t=1.0, dt=0.5)
    est.fit([[0.0], [1.0]])
    assert (est.S_, est.R_, est.beta_) == (2, 2, 0.5)
    assert clone(est).get_params()["t"] == 1.0
