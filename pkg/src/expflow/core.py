"""Metric spaces, flows, conjugacies and time rescaling.

Point containers follow one convention throughout the package: vector
points are float arrays whose last axis holds coordinates, symbolic points
live in object arrays.  ``MetricSpace.dist`` broadcasts over the leading
axes of either kind.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import check_positive, check_vector_point

TOL_ANALYTIC = 1e-9
TOL_INTEGRATED = 1e-6
DEFAULT_GUARD = 1e-12


class DomainEscape(ValueError):
    """Raised when an orbit leaves the domain (reaches a puncture or overflows)."""


class MetricSpace:
    """A metric space whose points are real vectors (Euclidean metric by default).

    Parameters
    ----------
    name : str
    dim : int
    discreteness : {"none", "discrete", "uniformly_discrete"}
    uniform_radius : float, optional
        Declared radius rho with B(x, rho) = {x} for uniformly discrete spaces.
    """

    kind = "vector"

    def __init__(self, name, dim, discreteness="none", uniform_radius=None):
        if discreteness not in ("none", "discrete", "uniformly_discrete"):
            raise ValueError(f"unknown discreteness tag {discreteness!r}")
        if discreteness == "uniformly_discrete" and uniform_radius is None:
            raise ValueError("uniformly discrete spaces must declare a radius")
        self.name = name
        self.dim = dim
        self.discreteness = discreteness
        self.uniform_radius = uniform_radius

    def dist(self, a, b):
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def metric(self, x, y):
        return float(self.dist(x, y))

    def as_points(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        return pts

    def check_point(self, x):
        return check_vector_point(x, self.dim)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return x.shape == (self.dim,) and bool(np.all(np.isfinite(x)))

    def take(self, points, index):
        return points[index]

    def describe(self):
        return {
            "id": self.name,
            "dim": self.dim,
            "discreteness": self.discreteness,
            "uniform_radius": self.uniform_radius,
        }


class SphereSpace(MetricSpace):
    """Unit sphere in R^3 with the chordal metric, minus a finite set of punctures."""

    def __init__(self, name="punctured_sphere", punctures=(), guard=DEFAULT_GUARD):
        super().__init__(name, 3)
        self.punctures = np.asarray(punctures, dtype=float).reshape(-1, 3)
        self.guard = guard

    def contains(self, x):
        if not super().contains(x):
            return False
        x = np.asarray(x, dtype=float)
        if abs(np.linalg.norm(x) - 1.0) > 1e-9:
            return False
        return not np.any(self.dist(self.punctures, x) < self.guard)


class Flow:
    """Base class for flows phi_t on a metric space.

    Subclasses implement ``_evaluate_many(x, times)`` returning the orbit of a
    single point at an array of times.  ``evaluate`` and ``orbit`` validate
    the result so domain escapes surface as :class:`DomainEscape`.
    """

    tol_group = TOL_ANALYTIC
    isolation_radius = None
    isolated_at_infinity = None

    def __init__(self, name, space, params=None):
        self.name = name
        self.space = space
        self.params = dict(params or {})

    # -- evaluation -----------------------------------------------------
    def evaluate(self, x, t):
        t = float(t)
        if not np.isfinite(t):
            raise ValueError("time must be finite")
        if t == 0.0:
            return x
        return self.space.take(self.orbit(x, np.array([t])), 0)

    def orbit(self, x, times):
        times = np.asarray(times, dtype=float)
        out = self._evaluate_many(x, times)
        self._check_orbit(out)
        return out

    def orbits(self, points, times):
        """Orbit table of shape (N, T[, dim]) for a container of N points."""
        rows = [self.orbit(self.space.take(points, i), times) for i in range(len(points))]
        if self.space.kind == "vector":
            return np.stack(rows) if rows else np.empty((0, len(times), self.space.dim))
        table = np.empty((len(rows), len(times)), dtype=object)
        for i, row in enumerate(rows):
            table[i, :] = row
        return table

    def _evaluate_many(self, x, times):
        raise NotImplementedError

    def _check_orbit(self, out):
        if self.space.kind == "vector" and not np.all(np.isfinite(out)):
            raise DomainEscape(f"{self.name}: orbit left the domain (non-finite coordinates)")

    # -- singular set ---------------------------------------------------
    @property
    def singularities(self):
        return ()

    def is_singular(self, x):
        return any(self.space.metric(x, s) == 0.0 for s in self.singularities)

    # -- sampling -------------------------------------------------------
    def sample_points(self, rng, n):
        raise NotImplementedError(f"{self.name} has no sampler")

    def perturb(self, rng, x, scale):
        """Random nearby point at distance of order ``scale``."""
        x = np.asarray(x, dtype=float)
        step = rng.normal(size=x.shape)
        step *= scale * rng.uniform() / max(np.linalg.norm(step), 1e-300)
        return x + step

    def describe(self):
        return {"id": self.name, "space": self.space.describe(), "params": self.params}


@dataclass(frozen=True)
class Conjugacy:
    """A homeomorphism h: target -> source of the conjugated flow, with inverse."""

    h: Callable
    h_inv: Callable
    name: str = "conjugacy"
    source_space: Optional[MetricSpace] = None
    target_space: Optional[MetricSpace] = None
    tol: float = field(default=TOL_ANALYTIC)

    def check_inverse(self, target_samples=(), source_samples=()):
        worst = 0.0
        for y in target_samples:
            worst = max(worst, float(np.linalg.norm(np.asarray(self.h_inv(self.h(y))) - y)))
        for x in source_samples:
            worst = max(worst, float(np.linalg.norm(np.asarray(self.h(self.h_inv(x))) - x)))
        if worst >= self.tol:
            raise ValueError(f"{self.name}: inverse consistency residual {worst:.3g} >= {self.tol:.3g}")
        return worst


class ConjugateFlow(Flow):
    """psi_t = h_inv o phi_t o h, a flow on the conjugacy's target space."""

    def __init__(self, base, conjugacy, space, name=None, sampler=None):
        super().__init__(name or f"{base.name}~{conjugacy.name}", space,
                         {"base": base.name, "conjugacy": conjugacy.name})
        self.base = base
        self.conjugacy = conjugacy
        self._sampler = sampler
        self.tol_group = base.tol_group

    def _evaluate_many(self, y, times):
        x = self.conjugacy.h(y)
        if self.base.space.kind == "vector" and not self.base.space.contains(x):
            raise DomainEscape(f"{self.name}: h({y}) is outside the base domain")
        return self.conjugacy.h_inv(self.base.orbit(x, times))

    def _check_orbit(self, out):
        super()._check_orbit(out)
        if isinstance(self.space, SphereSpace) and len(self.space.punctures):
            d = self.space.dist(out[:, None, :], self.space.punctures[None, :, :])
            if np.any(d < self.space.guard):
                raise DomainEscape(f"{self.name}: orbit reached a puncture")

    @property
    def singularities(self):
        return tuple(self.conjugacy.h_inv(s) for s in self.base.singularities)

    def sample_points(self, rng, n):
        if self._sampler is not None:
            return self._sampler(rng, n)
        return self.space.as_points([self.conjugacy.h_inv(p) for p in self.base.sample_points(rng, n)])


def conjugate_flow(flow, conjugacy, space=None, samples=None, name=None, sampler=None):
    """Return psi with psi_t = h_inv o phi_t o h (h maps the new space onto ``flow.space``).

    ``samples`` (points of the new space) are used for the inverse-consistency
    check; a residual beyond the conjugacy tolerance raises ``ValueError``.
    """
    space = space or conjugacy.target_space or flow.space
    if samples is not None:
        conjugacy.check_inverse(target_samples=samples)
    return ConjugateFlow(flow, conjugacy, space, name=name, sampler=sampler)


class TimeScaledFlow(Flow):
    """phi^(a)_t = phi_{a t}."""

    def __init__(self, base, a):
        a = check_positive(a, "a")
        super().__init__(f"time_scaled({base.name},a={a:g})", base.space, {"base": base.name, "a": a})
        self.base = base
        self.a = a
        self.tol_group = base.tol_group
        self.isolation_radius = base.isolation_radius
        self.isolated_at_infinity = base.isolated_at_infinity

    def _evaluate_many(self, x, times):
        return self.base.orbit(x, self.a * np.asarray(times, dtype=float))

    def _check_orbit(self, out):
        pass

    @property
    def singularities(self):
        return self.base.singularities

    def is_singular(self, x):
        return self.base.is_singular(x)

    def sample_points(self, rng, n):
        return self.base.sample_points(rng, n)

    def perturb(self, rng, x, scale):
        return self.base.perturb(rng, x, scale)

    def separation_classes(self, points, t, delta_value, dt, relation):
        fast = getattr(self.base, "separation_classes", None)
        if fast is None:
            return None
        return fast(points, self.a * t, delta_value, self.a * dt, relation)


def evaluate(flow, x, t):
    """phi_t(x)."""
    return flow.evaluate(x, t)


def group_law_residual(flow, x, s, t):
    """d(phi_{s+t}(x), phi_t(phi_s(x)))."""
    return flow.space.metric(flow.evaluate(x, s + t), flow.evaluate(flow.evaluate(x, s), t))
