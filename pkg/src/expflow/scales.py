"""Scale functions: positive continuous (C+) and singularity-vanishing (C_phi) kinds.

Also the two constructive lemmas used downstream: ``refine_scale`` builds a
gamma with gamma << rho on a sample cloud, ``dowker_interpolate`` puts a
continuous piecewise-linear function strictly between two node samples.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

KINDS = ("positive_continuous", "vanishing_on_singularities", "real")


class ScaleFn:
    """Scalar function on a space, evaluated on point containers.

    ``func`` receives a point container (float array with coordinates on the
    last axis, or an object array of symbolic points) and returns values of
    the leading shape.  Set ``pointwise=True`` to supply a single-point
    function instead; it is vectorized automatically.
    """

    def __init__(self, func, kind="positive_continuous", name="scale", pointwise=False, constant=None,
                 representation="closed_form"):
        if kind not in KINDS:
            raise ValueError(f"unknown scale kind {kind!r}")
        self.kind = kind
        self.name = name
        self.constant = None if constant is None else float(constant)
        self.representation = representation
        self._pointwise = pointwise
        self._func = func
        self._vec = np.frompyfunc(func, 1, 1) if pointwise else None

    def evaluate_many(self, points):
        if self.constant is not None:
            shape = points.shape if points.dtype == object else np.shape(points)[:-1]
            return np.full(shape, self.constant)
        if self._pointwise:
            if points.dtype == object:
                return np.asarray(self._vec(points), dtype=float)
            pts = np.asarray(points, dtype=float)
            flat = pts.reshape(-1, pts.shape[-1])
            vals = np.array([self._func(p) for p in flat], dtype=float)
            return vals.reshape(pts.shape[:-1])
        return np.asarray(self._func(points), dtype=float)

    def __call__(self, x):
        if isinstance(x, np.ndarray) and x.dtype != object:
            return float(self.evaluate_many(x[None, :])[0])
        box = np.empty(1, dtype=object)
        box[0] = x
        return float(self.evaluate_many(box)[0])

    def scaled(self, c, name=None):
        """c * self, same kind."""
        c = float(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        if self.constant is not None:
            return constant(c * self.constant, name or f"{c:g}*{self.name}", self.kind)
        return ScaleFn(lambda pts: c * self.evaluate_many(pts), self.kind, name or f"{c:g}*{self.name}",
                       representation=self.representation)

    def __repr__(self):
        return f"ScaleFn({self.name!r}, kind={self.kind!r})"


def constant(value, name=None, kind="positive_continuous"):
    value = float(value)
    if kind == "positive_continuous" and not value > 0:
        raise ValueError("a positive continuous constant scale must be > 0")
    return ScaleFn(None, kind, name or f"const({value:g})", constant=value)


def exp_decay(c=1.0, rate=1.0, name=None):
    """c * exp(-rate * |x|) on a vector space."""
    return ScaleFn(lambda p: c * np.exp(-rate * np.linalg.norm(np.asarray(p, dtype=float), axis=-1)),
                   name=name or f"{c:g}*exp(-{rate:g}|x|)")


def jim_scale(v=(1.0, 0.0), eps=1.0):
    """1/2 |v| eps exp(-|x|), the scale used for translation flows."""
    return exp_decay(0.5 * float(np.linalg.norm(v)) * eps, 1.0, name=f"jim(eps={eps:g})")


def validate_scale(scale, samples, singularities=()):
    """Check the kind invariants on samples; raises ValueError on the first violation."""
    vals = scale.evaluate_many(samples)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{scale.name}: non-finite values")
    if scale.kind == "positive_continuous" and np.any(vals <= 0):
        raise ValueError(f"{scale.name}: positive continuous scale is not positive on samples")
    if scale.kind == "vanishing_on_singularities":
        for s in singularities:
            if scale(s) != 0.0:
                raise ValueError(f"{scale.name}: does not vanish at singularity {s}")
        if np.any(vals < 0):
            raise ValueError(f"{scale.name}: negative values")
    return vals


def check_strict_order(gamma, rho, samples):
    """True iff gamma(x) < rho(x) at every sample."""
    return bool(np.all(gamma.evaluate_many(samples) < rho.evaluate_many(samples)))


@dataclass
class LLReport:
    n_pairs: int
    n_tested: int
    violations: list

    @property
    def ok(self):
        return not self.violations


def check_ll(gamma, rho, pairs, space):
    """Look for pairs with d(x, y) < gamma(x) but gamma(x) >= rho(y).

    ``pairs`` is a tuple ``(xs, ys)`` of equal-length point containers.  An
    empty violation list is sampled evidence of gamma << rho, not a proof.
    """
    xs, ys = pairs
    d = space.dist(xs, ys)
    gx = gamma.evaluate_many(xs)
    tested = np.flatnonzero(d < gx)
    ry = rho.evaluate_many(space.take(ys, tested)) if tested.size else np.empty(0)
    mask = gx[tested] >= ry
    violations = [(int(i), float(gx[i]), float(r)) for i, r in zip(tested[mask], ry[mask])]
    return LLReport(len(d), int(tested.size), violations)


def refine_scale(rho, space, cloud):
    """gamma(x) = 1/2 inf{rho(y) : d(x, y) <= rho(x)/2} over ``cloud`` plus x itself.

    If y is in the cloud and d(x, y) <= gamma(x) then gamma(x) <= rho(y)/2,
    so gamma << rho holds on every cloud pair.
    """
    if rho.kind != "positive_continuous":
        raise ValueError("refine_scale needs a positive continuous scale")
    if len(cloud) == 0:
        raise ValueError("refine_scale needs a nonempty sample cloud")
    if rho.constant is not None:
        return constant(rho.constant / 2, f"refine({rho.name})")
    cloud_rho = rho.evaluate_many(cloud)
    width = 1 if cloud.dtype == object else cloud.shape[-1]
    chunk = max(1, int(4_000_000 // (len(cloud) * width)))

    def gamma(points):
        flat_shape = points.shape if points.dtype == object else points.shape[:-1]
        q = points.reshape(-1) if points.dtype == object else points.reshape(-1, points.shape[-1])
        rq = rho.evaluate_many(q)
        out = np.empty(len(q))
        for start in range(0, len(q), chunk):
            block = q[start:start + chunk]
            if points.dtype == object:
                d = space.dist(block[:, None], cloud[None, :])
            else:
                d = space.dist(block[:, None, :], cloud[None, :, :])
            inside = d <= rq[start:start + chunk, None] / 2
            best = np.where(inside, cloud_rho[None, :], np.inf).min(axis=1)
            out[start:start + chunk] = 0.5 * np.minimum(best, rq[start:start + chunk])
        return out.reshape(flat_shape)

    return ScaleFn(gamma, "positive_continuous", f"refine({rho.name})", representation="cloud_infimum")


@dataclass
class SemicontinuousSample:
    """Node values of a lower (majorant) or upper (minorant) semicontinuous function."""

    nodes: np.ndarray
    values: np.ndarray
    sense: str

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim == 1:
            self.nodes = self.nodes[:, None]
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.sense not in ("lower", "upper"):
            raise ValueError("sense must be 'lower' or 'upper'")
        if len(self.nodes) != len(self.values):
            raise ValueError("nodes and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")


def piecewise_linear(nodes, values):
    """Continuous piecewise-linear interpolant on the Delaunay triangulation of ``nodes``.

    In one dimension this is ordinary linear interpolation; outside the hull
    the value is held constant (1-d) or taken from the nearest node.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    if nodes.shape[1] == 1:
        order = np.argsort(nodes[:, 0])
        xs, vs = nodes[order, 0], values[order]

        def f(points):
            pts = np.asarray(points, dtype=float)
            return np.interp(pts[..., 0], xs, vs)
        return f
    lin = LinearNDInterpolator(nodes, values)
    near = NearestNDInterpolator(nodes, values)

    def f(points):
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1])
        out = lin(flat)
        miss = np.isnan(out)
        if np.any(miss):
            out[miss] = near(flat[miss])
        return out.reshape(pts.shape[:-1])
    return f


def dowker_interpolate(beta, gamma):
    """Continuous alpha with gamma < alpha < beta at every node (node midpoints, linear between)."""
    if beta.sense != "lower" or gamma.sense != "upper":
        raise ValueError("expected beta lower semicontinuous and gamma upper semicontinuous")
    if beta.nodes.shape != gamma.nodes.shape or not np.array_equal(beta.nodes, gamma.nodes):
        raise ValueError("beta and gamma must share the node set")
    bad = np.flatnonzero(~(gamma.values < beta.values))
    if bad.size:
        raise ValueError(f"order violated at node {int(bad[0])}: gamma={gamma.values[bad[0]]}, "
                         f"beta={beta.values[bad[0]]}")
    mid = 0.5 * (gamma.values + beta.values)
    kind = "positive_continuous" if np.all(mid > 0) else "real"
    fn = ScaleFn(piecewise_linear(beta.nodes, mid), kind, "dowker", representation="grid_interpolated")
    fn.nodes, fn.values = beta.nodes, mid
    return fn


def grid_scale(nodes, values, kind="positive_continuous", name="grid"):
    fn = ScaleFn(piecewise_linear(nodes, values), kind, name, representation="grid_interpolated")
    fn.nodes = np.asarray(nodes, dtype=float).reshape(len(values), -1)
    fn.values = np.asarray(values, dtype=float)
    return fn


def write_grid_csv(scale, path):
    if scale.representation != "grid_interpolated":
        raise ValueError("only grid scale functions serialize to CSV")
    dim = scale.nodes.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(dim)] + ["value"])
        for node, value in zip(scale.nodes, scale.values):
            w.writerow([format(float(c), ".17g") for c in node] + [format(float(value), ".17g")])


def read_grid_csv(path, kind="positive_continuous", name=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "value":
        raise ValueError(f"{path}: last column must be 'value'")
    data = np.array([[float(c) for c in row] for row in body], dtype=float)
    return grid_scale(data[:, :-1], data[:, -1], kind, name or str(path))


class ScaleRefiner(TransformerMixin, BaseEstimator):
    """Transformer form of ``refine_scale``: fit on a sample cloud, transform points to gamma values.

    Parameters
    ----------
    rho : ScaleFn
        Positive continuous scale to refine.
    space : MetricSpace
    """

    def __init__(self, rho=None, space=None):
        self.rho = rho
        self.space = space

    def fit(self, X, y=None):
        if self.rho is None or self.space is None:
            raise ValueError("ScaleRefiner needs rho and space")
        cloud = self.space.as_points(X)
        self.scale_ = refine_scale(self.rho, self.space, cloud)
        self.n_cloud_ = len(cloud)
        return self

    def transform(self, X):
        check_is_fitted(self)
        return self.scale_.evaluate_many(self.space.as_points(X))
