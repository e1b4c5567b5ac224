"""Built-in flows and the fixture catalog."""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (DEFAULT_GUARD, Conjugacy, DomainEscape, Flow, MetricSpace, SphereSpace, TimeScaledFlow,
                   conjugate_flow)
from .symbolic import PRESETS, SFT, SuspensionFlow


class RadialFlow(Flow):
    """phi_t(w) = e^t w on the punctured plane R^2 minus the origin."""

    def __init__(self, guard=DEFAULT_GUARD):
        super().__init__("radial_plane", MetricSpace("plane_minus_origin", 2), {"guard": guard})
        self.guard = guard
        self.isolated_at_infinity = lambda w: 0.5 <= np.linalg.norm(w) <= 2.0

    def _evaluate_many(self, x, times):
        x = np.asarray(x, dtype=float)
        if np.linalg.norm(x) < self.guard:
            raise DomainEscape("radial_plane: point at the removed origin")
        with np.errstate(over="ignore"):
            out = np.exp(np.asarray(times))[:, None] * x[None, :]
        norms = np.linalg.norm(out, axis=1)
        if np.any(norms < self.guard):
            raise DomainEscape("radial_plane: orbit reached the removed origin")
        return out

    def sample_points(self, rng, n):
        r = np.exp(rng.uniform(-2.0, 2.0, size=n))
        theta = rng.uniform(0, 2 * np.pi, size=n)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def stereographic(p):
    """Projection from the north pole, S^2 minus N -> R^2."""
    p = np.asarray(p, dtype=float)
    denom = 1.0 - p[..., 2]
    return np.stack([p[..., 0] / denom, p[..., 1] / denom], axis=-1)


def inverse_stereographic(w):
    w = np.asarray(w, dtype=float)
    u, v = w[..., 0], w[..., 1]
    s = u * u + v * v
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.stack([2 * u / (1 + s), 2 * v / (1 + s), (s - 1) / (1 + s)], axis=-1)
    big = ~np.isfinite(s) | (s > 1e300)
    if np.any(big):
        out = np.where(big[..., None], np.array([0.0, 0.0, 1.0]), out)
    return out


STEREOGRAPHIC = Conjugacy(stereographic, inverse_stereographic, "stereographic")
POLES = ((0.0, 0.0, 1.0), (0.0, 0.0, -1.0))


def _sphere_sampler(rng, n):
    z = rng.uniform(-0.96, 0.96, size=n)
    theta = rng.uniform(0, 2 * np.pi, size=n)
    rho = np.sqrt(1 - z * z)
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])


def _sphere_perturb(rng, x, scale):
    step = rng.normal(size=3)
    step -= step.dot(x) * x
    step *= scale * rng.uniform() / max(np.linalg.norm(step), 1e-300)
    y = x + step
    return y / np.linalg.norm(y)


def punctured_sphere(guard=DEFAULT_GUARD):
    """Radial flow carried to S^2 minus the poles by inverse stereographic projection."""
    space = SphereSpace("punctured_sphere", POLES, guard)
    flow = conjugate_flow(RadialFlow(guard), STEREOGRAPHIC, space=space, name="punctured_sphere",
                          samples=_sphere_sampler(np.random.default_rng(0), 64), sampler=_sphere_sampler)
    flow.perturb = _sphere_perturb
    flow.isolated_at_infinity = lambda p: abs(p[2]) <= 0.6
    return flow


class TranslationFlow(Flow):
    """phi_t(x) = x + t v."""

    def __init__(self, v=(1.0, 0.0)):
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or not np.any(v) or not np.all(np.isfinite(v)):
            raise ValueError("translation vector must be finite and nonzero")
        super().__init__("translation", MetricSpace(f"R^{v.size}", v.size), {"v": v.tolist()})
        self.v = v

    def _evaluate_many(self, x, times):
        return np.asarray(x, dtype=float)[None, :] + np.asarray(times)[:, None] * self.v[None, :]

    def sample_points(self, rng, n):
        return rng.uniform(-3.0, 3.0, size=(n, self.v.size))


class ColinaFlow(Flow):
    """phi_t(x, y) = (x + t, e^t y), the flow of the vector field (1, y)."""

    def __init__(self):
        super().__init__("colina", MetricSpace("R^2", 2))

    def _evaluate_many(self, p, times):
        p = np.asarray(p, dtype=float)
        times = np.asarray(times)
        with np.errstate(over="ignore"):
            return np.column_stack([p[0] + times, np.exp(times) * p[1]])

    def sample_points(self, rng, n):
        return rng.uniform(-3.0, 3.0, size=(n, 2))


def colina_conjugacy():
    """Record whose h maps colina's plane to the translation plane; h_inv is (x, y) -> (x, e^x y).

    With it, conjugate_flow(translation, ...) reproduces colina.
    """
    return Conjugacy(lambda p: np.stack([p[..., 0], np.exp(-p[..., 0]) * p[..., 1]], axis=-1),
                     lambda p: np.stack([p[..., 0], np.exp(p[..., 0]) * p[..., 1]], axis=-1),
                     "colina_h")


class TrivialFlow(Flow):
    """phi_t = id on a discrete subset of R^d given by a sampler."""

    def __init__(self, name, space, sampler, isolation_radius, declared=()):
        super().__init__(name, space)
        self._sampler = sampler
        self.isolation_radius = isolation_radius
        self._declared = tuple(np.asarray(s, dtype=float) for s in declared)

    def _evaluate_many(self, x, times):
        return np.repeat(np.asarray(x, dtype=float)[None, :], len(times), axis=0)

    @property
    def singularities(self):
        # every point is fixed; is_singular covers the rest
        return self._declared

    def is_singular(self, x):
        return True

    def sample_points(self, rng, n):
        return self._sampler(rng, n)

    def perturb(self, rng, x, scale):
        pool = self.sample_points(rng, 256)
        d = self.space.dist(pool, x)
        near = np.flatnonzero((d > 0) & (d <= max(scale, 1e-300) * 4))
        if near.size == 0:
            return pool[int(np.argmin(np.where(d > 0, d, np.inf)))]
        return pool[near[int(rng.integers(0, near.size))]]


def trivial_discrete():
    """Trivial flow on the lattice Z^2 (uniformly discrete with radius 1/2)."""
    space = MetricSpace("Z^2", 2, "uniformly_discrete", 0.5)

    def sampler(rng, n):
        return rng.integers(-20, 21, size=(n, 2)).astype(float)

    return TrivialFlow("trivial_discrete", space, sampler, 0.5)


def nonuniform_points(count):
    """First ``count`` points of {n, n + 1/n : n >= 2}, sorted."""
    pts = []
    n = 2
    while len(pts) < count:
        pts.extend([n, n + 1.0 / n])
        n += 1
    return np.array(pts[:count], dtype=float)


def _nonuniform_radius(x):
    x = float(np.asarray(x).ravel()[0])
    n = math.floor(x)
    return 1.0 / (2 * n) if n >= 2 else 0.0


def trivial_nonuniform():
    """Trivial flow on {n, n + 1/n : n >= 2} in R: discrete, not uniformly discrete."""
    space = MetricSpace("n_and_n_plus_1_over_n", 1, "discrete")

    def sampler(rng, n):
        n_max = max(4, 2 * n)
        ks = rng.integers(2, n_max, size=n)
        off = rng.integers(0, 2, size=n)
        return (ks + off / ks).astype(float).reshape(-1, 1)

    return TrivialFlow("trivial_nonuniform", space, sampler, _nonuniform_radius)


def _glued_radius(x):
    x = float(np.asarray(x).ravel()[0])
    if x <= 0:
        return 1e-3
    n = round(1.0 / x)
    return 0.5 * (1.0 / n - 1.0 / (n + 1))


def glued_limit():
    """Negative control: trivial flow on {0} U {1/n : n >= 1}; the singularity 0 is not isolated."""
    space = MetricSpace("zero_and_reciprocals", 1, "none")

    def sampler(rng, n):
        ks = rng.integers(1, 5000, size=n).astype(float)
        pts = (1.0 / ks).reshape(-1, 1)
        pts[0] = 0.0
        return pts

    return TrivialFlow("glued_limit", space, sampler, _glued_radius, declared=[[0.0]])


def suspension(sft="full2", roof=None):
    if isinstance(sft, str):
        if sft not in PRESETS:
            raise ValueError(f"unknown subshift preset {sft!r}; choose from {sorted(PRESETS)}")
        sft = PRESETS[sft]
    if roof is not None and roof != sft.roof:
        sft = SFT(sft.adjacency, roof, sft.name)
    return SuspensionFlow(sft)


def time_scaled(flow, a):
    return TimeScaledFlow(flow, a)


@dataclass(frozen=True)
class FixtureInfo:
    name: str
    description: str
    parameters: dict = field(default_factory=dict)


CATALOG = {
    "radial_plane": FixtureInfo("radial_plane", "phi_t(w) = e^t w on R^2 minus the origin",
                                {"guard": "float, radius around the removed origin (default 1e-12)"}),
    "punctured_sphere": FixtureInfo("punctured_sphere",
                                    "radial flow conjugated to S^2 minus the poles by stereographic projection; "
                                    "chordal metric", {"guard": "float (default 1e-12)"}),
    "translation": FixtureInfo("translation", "phi_t(x) = x + t v on R^d", {"v": "list of floats (default [1, 0])"}),
    "colina": FixtureInfo("colina", "phi_t(x, y) = (x + t, e^t y), conjugate to translation by h(x,y) = (x, e^x y)"),
    "trivial_discrete": FixtureInfo("trivial_discrete", "trivial flow on the lattice Z^2 (uniformly discrete)"),
    "trivial_nonuniform": FixtureInfo("trivial_nonuniform",
                                      "trivial flow on {n, n+1/n : n >= 2} (discrete, not uniformly discrete)"),
    "glued_limit": FixtureInfo("glued_limit", "negative control: trivial flow on {0} U {1/n}, 0 not isolated"),
    "suspension": FixtureInfo("suspension", "constant-roof suspension of a subshift of finite type",
                              {"preset": "full2 | golden | fixed", "adjacency": "m x m 0/1 matrix",
                               "roof": "positive float (default 1)"}),
    "time_scaled": FixtureInfo("time_scaled", "phi^(a)_t = phi_{a t} of another fixture",
                               {"base": "fixture id", "a": "positive float"}),
}


def list_fixtures():
    """Catalog of built-in fixtures, keyed by id."""
    return dict(CATALOG)


def normalize_fixture_id(name):
    return name.strip().replace("-", "_")


def make_fixture(name, **params):
    """Build a fixture by id; ``suspension:full2`` style ids select a subshift preset."""
    name = normalize_fixture_id(name)
    if name.startswith("suspension:"):
        params.setdefault("preset", name.split(":", 1)[1])
        name = "suspension"
    if name == "radial_plane":
        return RadialFlow(params.get("guard", DEFAULT_GUARD))
    if name == "punctured_sphere":
        return punctured_sphere(params.get("guard", DEFAULT_GUARD))
    if name == "translation":
        return TranslationFlow(params.get("v", (1.0, 0.0)))
    if name == "colina":
        return ColinaFlow()
    if name == "trivial_discrete":
        return trivial_discrete()
    if name == "trivial_nonuniform":
        return trivial_nonuniform()
    if name == "glued_limit":
        return glued_limit()
    if name == "suspension":
        if "adjacency" in params:
            sft = SFT(tuple(map(tuple, params["adjacency"])), params.get("roof", 1.0), params.get("preset", "custom"))
            return suspension(sft)
        return suspension(params.get("preset", "full2"), params.get("roof"))
    if name == "time_scaled":
        base = params.get("base", "suspension:full2")
        base = make_fixture(base) if isinstance(base, str) else base
        return time_scaled(base, params.get("a", 2.0))
    raise ValueError(f"unknown fixture {name!r}; known: {sorted(CATALOG)}")
