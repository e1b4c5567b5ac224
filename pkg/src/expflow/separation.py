"""Separated and spanning sets along orbit segments: S(t, delta, K), R(t, delta, K), beta(t, delta, K).

Separation is tested on grid times {0, dt, 2dt, ...} in [0, t] only, and the
scale is always evaluated on the first point's orbit.  Greedy passes bound S
from below and R from above; samples of at most ``exact_threshold`` points
are solved exactly by exhaustive search.  Spanning candidates are restricted
to K itself, which can only increase R.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive, time_steps

EXACT_THRESHOLD = 12


@dataclass
class CompactSample:
    """Finite point cloud standing in for a compact set K."""

    points: object
    region_descriptor: str = ""
    sampling_seed: Optional[int] = None
    name: str = "K"

    def __len__(self):
        return len(self.points)


def make_compact(flow, points, region_descriptor="", sampling_seed=None, name="K"):
    """Validate points against the flow's space and wrap them as a CompactSample."""
    if isinstance(points, CompactSample):
        if isinstance(points.points, np.ndarray):
            return points  # already validated
        return make_compact(flow, points.points, points.region_descriptor, points.sampling_seed, points.name)
    pts = flow.space.as_points(points)  # symbolic spaces validate each point here
    if len(pts) == 0:
        raise ValueError("compact sample must be nonempty")
    if flow.space.kind == "vector":
        for i in range(len(pts)):
            if not flow.space.contains(pts[i]):
                raise ValueError(f"sample point {i} lies outside the flow's domain")
    return CompactSample(pts, region_descriptor, sampling_seed, name)


@dataclass
class SeparationReport:
    t_horizon: float
    dt: float
    n_points: int
    delta_id: str
    seed: int
    S_lower: Optional[int] = None
    R_upper: Optional[int] = None
    beta: Optional[float] = None
    S_exact: bool = False
    R_exact: bool = False
    witness_sets: dict = field(default_factory=dict)
    method: str = "greedy"
    spanning_scope: str = "K-restricted spanning"

    def to_dict(self):
        return asdict(self)

    CSV_HEADER = ("t", "dt", "n_points", "S_lower", "R_upper", "beta", "exact_flag", "seed")

    def csv_row(self):
        exact = int(bool(self.S_exact and (self.R_upper is None or self.R_exact)))
        vals = (self.t_horizon, self.dt, self.n_points, self.S_lower, self.R_upper, self.beta, exact, self.seed)
        return ",".join("" if v is None else format(v, ".17g") if isinstance(v, float) else str(v) for v in vals)


def is_separated_pair(flow, x, y, t, delta, dt):
    """True iff d(phi_s x, phi_s y) >= delta(phi_s x) at some grid time s in [0, t]."""
    times = time_steps(t, dt)
    ox = flow.orbit(x, times)
    oy = flow.orbit(y, times)
    return bool(np.any(flow.space.dist(ox, oy) >= delta.evaluate_many(ox)))


class SeparationEngine:
    """Orbit and scale tables for one (flow, K, delta, dt), reusable across horizons up to ``t_max``."""

    def __init__(self, flow, K, delta, dt, t_max, n_jobs=1):
        self.flow = flow
        self.K = K if isinstance(K, CompactSample) else make_compact(flow, K)
        self.delta = delta
        self.dt = check_positive(dt, "dt")
        self.t_max = check_positive(t_max, "t_max", allow_zero=True)
        self.times = time_steps(t_max, dt)
        self.n_jobs = max(1, int(n_jobs or 1))
        self._orbits = None
        self._scales = None

    @property
    def n(self):
        return len(self.K.points)

    def _columns(self, t):
        return int(math.floor(t / self.dt + 1e-9)) + 1

    def _fast_labels(self, t, relation):
        if self.delta.constant is None:
            return None
        fast = getattr(self.flow, "separation_classes", None)
        if fast is None:
            return None
        return fast(self.K.points, t, self.delta.constant, self.dt, relation)

    def _ensure_tables(self):
        if self._orbits is not None:
            return
        pts = self.K.points
        chunks = np.array_split(np.arange(self.n), min(self.n_jobs, self.n))

        def work(idx):
            block = self.flow.orbits(self.flow.space.take(pts, idx), self.times)
            return block, self.delta.evaluate_many(block)

        if self.n_jobs == 1:
            parts = [work(idx) for idx in chunks]
        else:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                parts = list(pool.map(work, chunks))
        self._orbits = np.concatenate([p[0] for p in parts])
        self._scales = np.concatenate([p[1] for p in parts])

    def scale_table(self, t):
        self._ensure_tables()
        return self._scales[:, :self._columns(t)]

    # -- pair relations -------------------------------------------------
    def _dist_to(self, i, idx, cols):
        orb = self._orbits
        return self.flow.space.dist(orb[idx, :cols], orb[i, :cols][None])

    def mutually_separated(self, i, idx, t):
        """For each j in idx: separated in both orders from i."""
        cols = self._columns(t)
        d = self._dist_to(i, idx, cols)
        sc = self._scales
        return np.any(d >= sc[i, :cols][None], axis=1) & np.any(d >= sc[idx, :cols], axis=1)

    def shadowed_by(self, i, t):
        """For each K point j: d(phi_s x_i, phi_s x_j) <= delta(phi_s x_i) at all grid s."""
        cols = self._columns(t)
        d = self._dist_to(i, np.arange(self.n), cols)
        return np.all(d <= self._scales[i, :cols][None], axis=1)

    def matrices(self, t):
        self._ensure_tables()
        sep = np.zeros((self.n, self.n), dtype=bool)
        shadow = np.zeros((self.n, self.n), dtype=bool)
        for i in range(self.n):
            sep[i] = self.mutually_separated(i, np.arange(self.n), t)
            shadow[i] = self.shadowed_by(i, t)
        np.fill_diagonal(sep, False)
        return sep, shadow

    # -- extremal sets --------------------------------------------------
    def separated_set(self, t, seed=0, exact_threshold=EXACT_THRESHOLD):
        """(indices, exact, method) for a (t, delta, K)-separated set."""
        order = np.random.default_rng(seed).permutation(self.n)
        labels = self._fast_labels(t, "separated")
        if labels is not None:
            _, first = np.unique(labels[order], return_index=True)
            return sorted(int(order[k]) for k in first), True, "equivalence_classes"
        self._ensure_tables()
        if self.n <= exact_threshold:
            sep, _ = self.matrices(t)
            return _max_clique(sep, order), True, "exhaustive"
        chosen = []
        for i in order:
            if not chosen or np.all(self.mutually_separated(int(i), np.array(chosen), t)):
                chosen.append(int(i))
        return sorted(chosen), False, "greedy"

    def spanning_set(self, t, seed=0, exact_threshold=EXACT_THRESHOLD):
        """(indices, exact, method) for a K-restricted (t, delta, K)-spanning set."""
        order = np.random.default_rng(seed).permutation(self.n)
        labels = self._fast_labels(t, "shadow")
        if labels is not None:
            _, first = np.unique(labels[order], return_index=True)
            return sorted(int(order[k]) for k in first), True, "equivalence_classes"
        self._ensure_tables()
        if self.n <= exact_threshold:
            _, shadow = self.matrices(t)
            return _min_cover(shadow, order), True, "exhaustive"
        covered = np.zeros(self.n, dtype=bool)
        chosen = []
        for i in order:
            if covered[i]:
                continue
            chosen.append(int(i))
            covered |= self.shadowed_by(int(i), t)
        if not covered.all():
            raise RuntimeError("greedy cover left points unshadowed")
        return sorted(chosen), False, "greedy"

    def beta(self, t):
        if self.delta.kind != "positive_continuous":
            raise ValueError("beta undefined for C_phi scale")
        if self.delta.constant is not None:
            return self.delta.constant
        vals = self.scale_table(t)
        low = float(vals.min())
        if not low > 0:
            raise ValueError("beta undefined for C_phi scale: delta vanishes on a sampled orbit point")
        return low


def _max_clique(adj, order):
    n = len(adj)
    masks = [sum(1 << j for j in range(n) if adj[i, j]) for i in range(n)]
    best = []
    # try larger subsets first; ties go to the earliest subset in seeded order
    pos = [int(i) for i in order]
    for size in range(n, 0, -1):
        for combo in combinations(range(n), size):
            members = [pos[k] for k in combo]
            bits = sum(1 << m for m in members)
            if all((masks[m] | (1 << m)) & bits == bits for m in members):
                best = members
                break
        if best:
            break
    return sorted(best)


def _min_cover(shadow, order):
    n = len(shadow)
    full = (1 << n) - 1
    masks = [sum(1 << j for j in range(n) if shadow[i, j]) for i in range(n)]
    pos = [int(i) for i in order]
    for size in range(1, n + 1):
        for combo in combinations(range(n), size):
            members = [pos[k] for k in combo]
            acc = 0
            for m in members:
                acc |= masks[m]
            if acc == full:
                return sorted(members)
    raise RuntimeError("no cover found")  # unreachable: K covers itself


def _report(engine, t, seed):
    return SeparationReport(float(t), engine.dt, engine.n, engine.delta.name, int(seed))


def max_separated_set(flow, K, t, delta, dt, seed=0, exact_threshold=EXACT_THRESHOLD, n_jobs=1):
    """Largest separated set found (exact for small K or the class shortcut)."""
    eng = SeparationEngine(flow, K, delta, dt, t, n_jobs)
    idx, exact, method = eng.separated_set(t, seed, exact_threshold)
    rep = _report(eng, t, seed)
    rep.S_lower, rep.S_exact, rep.method = len(idx), exact, method
    rep.witness_sets["separated"] = idx
    return rep


def min_spanning_set(flow, K, t, delta, dt, seed=0, exact_threshold=EXACT_THRESHOLD, n_jobs=1):
    """Smallest K-restricted spanning set found."""
    eng = SeparationEngine(flow, K, delta, dt, t, n_jobs)
    idx, exact, method = eng.spanning_set(t, seed, exact_threshold)
    rep = _report(eng, t, seed)
    rep.R_upper, rep.R_exact, rep.method = len(idx), exact, method
    rep.witness_sets["spanning"] = idx
    return rep


def beta(flow, K, t, delta, dt):
    """inf of delta(phi_s z) over sample points z and grid times s in [0, t]."""
    return SeparationEngine(flow, K, delta, dt, t).beta(t)


def separation_report(flow, K, t, delta, dt, seed=0, exact_threshold=EXACT_THRESHOLD, n_jobs=1):
    """S, R and beta in one report."""
    eng = SeparationEngine(flow, K, delta, dt, t, n_jobs)
    s_idx, s_exact, s_method = eng.separated_set(t, seed, exact_threshold)
    r_idx, r_exact, r_method = eng.spanning_set(t, seed, exact_threshold)
    rep = _report(eng, t, seed)
    rep.S_lower, rep.S_exact = len(s_idx), s_exact
    rep.R_upper, rep.R_exact = len(r_idx), r_exact
    rep.method = s_method if s_method == r_method else f"{s_method}/{r_method}"
    rep.witness_sets = {"separated": s_idx, "spanning": r_idx}
    if delta.kind == "positive_continuous":
        rep.beta = eng.beta(t)
    return rep


class SeparationEstimator(BaseEstimator):
    """Estimator wrapper: ``fit(K)`` computes S, R and beta for one horizon.

    Fitted attributes: ``report_``, ``S_``, ``R_``, ``beta_``, ``separated_``
    (indices into K) and ``spanning_``.
    """

    def __init__(self, flow=None, delta=None, t=1.0, dt=0.1, random_state=0,
                 exact_threshold=EXACT_THRESHOLD, n_jobs=1):
        self.flow = flow
        self.delta = delta
        self.t = t
        self.dt = dt
        self.random_state = random_state
        self.exact_threshold = exact_threshold
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.flow is None or self.delta is None:
            raise ValueError("SeparationEstimator needs a flow and a scale")
        K = make_compact(self.flow, X)
        self.report_ = separation_report(self.flow, K, self.t, self.delta, self.dt, self.random_state,
                                         self.exact_threshold, self.n_jobs)
        self.S_ = self.report_.S_lower
        self.R_ = self.report_.R_upper
        self.beta_ = self.report_.beta
        self.separated_ = self.report_.witness_sets["separated"]
        self.spanning_ = self.report_.witness_sets["spanning"]
        return self
