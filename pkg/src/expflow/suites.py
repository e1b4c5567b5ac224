"""Default compacts, scale families and the verification suites behind ``expflow verify``.

Each suite returns a SuiteResult whose checks carry the measured value, the
bound it was compared with and a pass flag.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .entropy import estimate_e_star, estimate_entropy_compact, verify_identity
from .fixtures import colina_conjugacy, make_fixture, nonuniform_points
from .periodic import check_growth_bound, necklace_v, orbit_census
from .scales import (SemicontinuousSample, check_ll, constant, dowker_interpolate, exp_decay, refine_scale)
from .separation import SeparationEngine, make_compact
from .symbolic import SuspensionFlow, cylinder_sample

SUITES = ("sa1", "sa2", "sa3", "sa4", "thB", "lemmas")
SUSPENSION_EPS = tuple(2.0 ** -k for k in range(2, 7))
VECTOR_DELTAS = (0.5, 0.25, 0.1)


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    bound: object = None
    details: dict = field(default_factory=dict)


@dataclass
class SuiteResult:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def summary_lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {self.suite}:{c.name} value={c.value} bound={c.bound}"
                for c in self.checks]


# -- defaults per fixture ---------------------------------------------------
def _base(flow):
    while hasattr(flow, "base"):
        flow = flow.base
    return flow


def annulus(r_inner=1.0, r_outer=2.0, n_radii=4, n_angles=24):
    r = np.linspace(r_inner, r_outer, n_radii)
    th = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


def default_compact(flow, depth=15, seed=0):
    """A compact sample suited to the fixture (whole cylinder set for suspensions)."""
    base = _base(flow)
    name = flow.name
    if isinstance(base, SuspensionFlow):
        pts = cylinder_sample(base.sft, depth)
        return make_compact(flow, pts, f"one periodic point per {depth}-cylinder, height 0", None,
                            f"cylinders(depth={depth})")
    if name == "translation" and base.v.size == 2:
        return make_compact(flow, annulus(), "polar grid on 1 <= r <= 2", None, "annulus")
    if name == "translation":
        pts = np.random.default_rng(seed).uniform(-1, 1, size=(64, base.v.size))
        return make_compact(flow, pts, "uniform box [-1, 1]^d", seed, "box")
    if name == "colina":
        pts = colina_conjugacy().h_inv(annulus())
        return make_compact(flow, pts, "image of the annulus under (x, y) -> (x, e^x y)", None, "h_inv(annulus)")
    if name == "radial_plane":
        return make_compact(flow, annulus(0.5, 2.0), "polar grid on 1/2 <= r <= 2", None, "annulus")
    if name == "punctured_sphere":
        from .fixtures import inverse_stereographic
        return make_compact(flow, inverse_stereographic(annulus(0.5, 2.0)), "image of the annulus", None,
                            "sphere_band")
    if name == "trivial_discrete":
        g = np.arange(-2, 3, dtype=float)
        return make_compact(flow, np.array([[a, b] for a in g for b in g]), "lattice box [-2, 2]^2", None, "box")
    if name == "trivial_nonuniform":
        return make_compact(flow, nonuniform_points(20).reshape(-1, 1), "first 20 points", None, "first20")
    if name == "glued_limit":
        pts = np.concatenate([[0.0], 1.0 / np.arange(1, 51)]).reshape(-1, 1)
        return make_compact(flow, pts, "{0} U {1/n : n <= 50}", None, "first50")
    return make_compact(flow, flow.sample_points(np.random.default_rng(seed), 64), "sampled", seed, "sampled")


def default_deltas(flow):
    return SUSPENSION_EPS if isinstance(_base(flow), SuspensionFlow) else VECTOR_DELTAS


def default_dt(flow):
    return 1.0 if isinstance(_base(flow), SuspensionFlow) else 0.1


# -- entropy suites ---------------------------------------------------------
def _suspension(preset):
    return make_fixture(f"suspension:{preset}")


def _sweep(flow, t_max, dt):
    return [float(t) for t in np.arange(1, int(t_max) + 1)], dt


def suite_sa1(t_max=12, n_jobs=1, seed=0, tolerance=0.05):
    """Conjugacy invariance on (translation, colina) with h-matched compacts."""
    tr, co = make_fixture("translation"), make_fixture("colina")
    t_grid, dt = _sweep(tr, t_max, 0.1)
    inst = {"lhs": {"flow": tr, "K_list": [default_compact(tr)], "family": list(VECTOR_DELTAS)},
            "rhs": {"flow": co, "K_list": [default_compact(co)], "family": list(VECTOR_DELTAS)},
            "t_grid": t_grid, "dt": dt, "seed": seed, "n_jobs": n_jobs}
    v = verify_identity("conjugacy_invariance", inst, tolerance)
    res = SuiteResult("sa1")
    res.checks.append(Check("translation_e_star_near_zero", abs(v.lhs) <= tolerance, v.lhs, tolerance))
    res.checks.append(Check("colina_e_star_near_zero", abs(v.rhs) <= tolerance, v.rhs, tolerance))
    res.checks.append(Check("estimates_agree", v.passed, v.margin, v.tolerance))
    return res


def suite_sa2(t_max=12, n_jobs=1, seed=0, tolerance=0.05, presets=("full2", "golden")):
    """e* equals the classical entropy on the compact suspensions."""
    res = SuiteResult("sa2")
    for p in presets:
        flow = _suspension(p)
        t_grid, dt = _sweep(flow, t_max, 1.0)
        v = verify_identity("compact_equality", {"flow": flow, "K": default_compact(flow),
                                                 "family": list(SUSPENSION_EPS), "t_grid": t_grid, "dt": dt,
                                                 "seed": seed, "n_jobs": n_jobs}, tolerance)
        res.checks.append(Check(f"{p}_e_star_vs_classical", v.passed, v.margin, v.tolerance,
                                {"e_star": v.lhs, "classical": v.rhs}))
    return res


def suite_sa3(a=2.0, t_max=12, n_jobs=1, seed=0, preset="full2"):
    """e* of the time-scaled flow over e* of the base, expected a within 10%."""
    flow = _suspension(preset)
    t_grid, dt = _sweep(flow, t_max, 1.0)
    v = verify_identity("time_rescale", {"flow": flow, "K_list": [default_compact(flow)],
                                         "family": list(SUSPENSION_EPS), "t_grid": t_grid, "dt": dt, "a": a,
                                         "seed": seed, "n_jobs": n_jobs})
    ratio = v.details["ratio"]
    return SuiteResult("sa3", [Check(f"{preset}_ratio", v.passed, ratio, [0.9 * a, 1.1 * a],
                                     {"base": v.details["base"]["estimate"], "scaled": v.lhs})])


def suite_sa4(t_max=12, n_jobs=1, seed=0, tolerance=0.05, preset="full2"):
    """Spanning-mode and separating-mode e* agree."""
    flow = _suspension(preset)
    t_grid, dt = _sweep(flow, t_max, 1.0)
    v = verify_identity("spanning_equals_separating", {"flow": flow, "K_list": [default_compact(flow)],
                                                       "family": list(SUSPENSION_EPS), "t_grid": t_grid,
                                                       "dt": dt, "seed": seed, "n_jobs": n_jobs}, tolerance)
    return SuiteResult("sa4", [Check(f"{preset}_spanning_vs_separating", v.passed, v.margin, v.tolerance,
                                     {"spanning": v.lhs, "separating": v.rhs})])


def suite_thB(presets=("full2", "golden"), t_max=12, n_jobs=1, seed=0, slack=0.05):
    """Periodic-orbit growth bounded by e*, plus the necklace cross-check of v(1..4)."""
    expected = {"full2": [2, 3, 5, 8], "golden": [1, 2, 3, 4]}
    res = SuiteResult("thB")
    for p in presets:
        flow = _suspension(p)
        t_grid, dt = _sweep(flow, t_max, 1.0)
        census = orbit_census(flow.sft, t_max)
        star = estimate_e_star(flow, [default_compact(flow)], list(SUSPENSION_EPS), t_grid, dt, "separating",
                               seed, n_jobs)
        classical = estimate_entropy_compact(flow, default_compact(flow), list(SUSPENSION_EPS), t_grid, dt, seed,
                                             n_jobs)
        g = check_growth_bound(census, star, slack, classical)
        res.checks.append(Check(f"{p}_growth_bound", g.passed, g.growth_rate, g.entropy_estimate + slack,
                                g.to_dict()))
        v_census = [census.v(n * flow.sft.roof) for n in range(1, 5)]
        v_brute = necklace_v(flow.sft, 4)
        ok = v_census == v_brute and (p not in expected or v_census == expected[p])
        res.checks.append(Check(f"{p}_census_vs_necklaces", ok, v_census, v_brute))
    return res


# -- lemma property suites ----------------------------------------------------
def random_dowker_instance(rng):
    dim = int(rng.integers(1, 3))
    n = int(rng.integers(3, 40))
    nodes = rng.uniform(-2, 2, size=(n, dim))
    gamma = rng.normal(size=n)
    beta = gamma + rng.uniform(1e-6, 2.0, size=n)
    return (SemicontinuousSample(nodes, beta, "lower"), SemicontinuousSample(nodes, gamma, "upper"))


def check_dowker(instances=1000, seed=0):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(instances):
        beta, gamma = random_dowker_instance(rng)
        alpha = dowker_interpolate(beta, gamma)
        vals = alpha.evaluate_many(beta.nodes)
        if not np.all((gamma.values < vals) & (vals < beta.values)):
            bad += 1
    return bad


RHO_CHOICES = {
    "exp_decay": lambda: exp_decay(1.0, 1.0),
    "bump": lambda: _bump(),
    "oscillating": lambda: _oscillating(),
}


def _bump():
    from .scales import ScaleFn
    return ScaleFn(lambda p: 0.05 + np.exp(-np.sum(np.asarray(p) ** 2, axis=-1)), name="bump")


def _oscillating():
    from .scales import ScaleFn
    return ScaleFn(lambda p: 0.3 + 0.25 * np.sin(3 * np.asarray(p)[..., 0]) * np.cos(2 * np.asarray(p)[..., 1]),
                   name="oscillating")


def check_refine(pairs=10_000, seed=0, cloud_size=800):
    """Violations of gamma << rho for gamma = refine_scale(rho), per rho choice.

    Pairs are drawn from the refinement cloud, so the pair (x, y) is close
    relative to gamma(x) often enough to exercise the relation.
    """
    from .core import MetricSpace
    space = MetricSpace("R^2", 2)
    out = {}
    for i, (name, make) in enumerate(RHO_CHOICES.items()):
        rng = np.random.default_rng([seed, i])
        rho = make()
        cloud = rng.uniform(-2, 2, size=(cloud_size, 2))
        gamma = refine_scale(rho, space, cloud)
        xi = rng.integers(0, cloud_size, size=pairs)
        near = cloud[xi] + rng.normal(scale=0.05, size=(pairs, 2))
        # y ranges over cloud points close to near-duplicates of x
        d = space.dist(near[:, None, :], cloud[None, :, :])
        yi = np.argmin(np.where(np.arange(cloud_size)[None, :] == xi[:, None], np.inf, d), axis=1)
        rep = check_ll(gamma, rho, (cloud[xi], cloud[yi]), space)
        pointwise = bool(np.all(gamma.evaluate_many(cloud) < rho.evaluate_many(cloud)))
        out[name] = {"violations": len(rep.violations), "tested": rep.n_tested, "pairs": rep.n_pairs,
                     "strictly_below": pointwise}
    return out


LEMMA_FLOWS = ("translation", "colina", "radial_plane")


def random_exact_instance(rng, constant_only=False):
    """Small (flow, K, delta, t, dt) with |K| <= 12 for exact S and R."""
    flow = make_fixture(LEMMA_FLOWS[int(rng.integers(0, len(LEMMA_FLOWS)))])
    n = int(rng.integers(2, 13))
    if flow.name == "radial_plane":
        r = np.exp(rng.uniform(-1, 0.5, n))
        th = rng.uniform(0, 2 * np.pi, n)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    else:
        pts = rng.uniform(-1, 1, size=(n, 2))
    K = make_compact(flow, pts, name=f"random{n}")
    if constant_only or rng.uniform() < 0.5:
        delta = constant(float(rng.uniform(0.1, 1.0)))
    else:
        delta = exp_decay(float(rng.uniform(0.2, 1.5)), float(rng.uniform(0.1, 1.0)))
    t = float(rng.choice([0.5, 1.0, 2.0]))
    return flow, K, delta, t, 0.25


def _exact_counts(flow, K, delta, t, dt):
    eng = SeparationEngine(flow, K, delta, dt, t)
    s_idx, s_exact, _ = eng.separated_set(t)
    r_idx, r_exact, _ = eng.spanning_set(t)
    assert s_exact and r_exact
    return len(s_idx), len(r_idx), eng.beta(t), eng


def orbit_cloud(eng, t):
    """All sampled orbit points of K over [0, t]; the cloud for refine_scale."""
    eng._ensure_tables()
    tab = eng._orbits[:, :eng._columns(t)]
    return tab.reshape(-1, tab.shape[-1])


def check_sandwich(instances=100, seed=0):
    """Counts of failed R <= S, le1 and le2 inequalities on exact instances."""
    rng = np.random.default_rng(seed)
    fails = {"R_le_S": 0, "le1": 0, "le2": 0}
    examples = {}
    for k in range(instances):
        flow, K, delta, t, dt = random_exact_instance(rng)
        S, R, b, eng = _exact_counts(flow, K, delta, t, dt)
        cloud = orbit_cloud(eng, t)
        d1 = refine_scale(delta, flow.space, cloud)
        S1, _, b1, _ = _exact_counts(flow, K, d1, t, dt)
        d2 = refine_scale(refine_scale(delta, flow.space, cloud).scaled(0.25), flow.space, cloud)
        _, R2, b2, _ = _exact_counts(flow, K, d2, t, dt)
        checks = {"R_le_S": R <= S, "le1": R / b <= S1 / b1 * (1 + 1e-12),
                  "le2": S / b <= R2 / b2 * (1 + 1e-12)}
        for key, ok in checks.items():
            if not ok:
                fails[key] += 1
                examples.setdefault(key, {"instance": k, "flow": flow.name, "delta": delta.name, "n": len(K),
                                          "t": t, "S": S, "R": R})
    return fails, examples


def suite_lemmas(seed=0, dowker_instances=1000, ll_pairs=10_000, exact_instances=100):
    res = SuiteResult("lemmas")
    bad = check_dowker(dowker_instances, seed)
    res.checks.append(Check("dowker_strictly_between", bad == 0, bad, 0, {"instances": dowker_instances}))
    for name, info in check_refine(ll_pairs, seed).items():
        res.checks.append(Check(f"refine_ll_{name}", info["violations"] == 0 and info["strictly_below"],
                                info["violations"], 0, info))
    fails, examples = check_sandwich(exact_instances, seed)
    for key, count in fails.items():
        res.checks.append(Check(f"exact_{key}", count == 0, count, 0,
                                {"instances": exact_instances, "first_failure": examples.get(key)}))
    return res


def run_suite(name, **kw):
    table = {"sa1": suite_sa1, "sa2": suite_sa2, "sa3": suite_sa3, "sa4": suite_sa4, "thB": suite_thB,
             "lemmas": suite_lemmas}
    if name not in table:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    return table[name](**kw)
