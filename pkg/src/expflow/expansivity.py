"""Search for pairs that break expansivity, and sampled checks of the structural lemmas.

A witness is a pair (x, y) on distinct orbits plus a reparameterization
alpha with alpha(0) = 0 such that phi_{alpha(t)}(y) stays inside the
delta-tube around phi_t(x) for every grid time in [-T, T].  Beyond the
window the reparameterization continues with slope 1 and a tail check
looks for contraction toward a common limit.

Search completeness is limited twice: alpha is piecewise linear with a fixed
knot grid, and time is truncated to [-T, T] plus the tail check.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive
from .core import DomainEscape

NOTIONS = ("expansive", "topological_expansive", "rescaling_expansive")
NOTION_ALIASES = {"topological": "topological_expansive", "rescaling": "rescaling_expansive"}
DISTINCTNESS_MARGIN = 1e-3
LIMITATION = ("piecewise-linear reparameterizations on a fixed knot grid; time truncated to [-T, T] "
              "plus a sampled tail check")


def normalize_notion(notion):
    notion = NOTION_ALIASES.get(notion.replace("-", "_"), notion.replace("-", "_"))
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}; choose from {NOTIONS}")
    return notion


def check_delta_for_notion(notion, delta):
    if notion == "expansive" and delta.constant is None:
        raise ValueError("expansive needs a constant delta")
    if notion == "topological_expansive" and delta.kind != "positive_continuous":
        raise ValueError("topological expansivity needs a positive continuous delta")
    if notion == "rescaling_expansive" and delta.kind != "vanishing_on_singularities":
        raise ValueError("rescaling expansivity needs a delta vanishing on singularities")


@dataclass
class Reparam:
    """Piecewise-linear alpha with alpha(0) = 0, continued with slope 1 past the end knots."""

    knot_times: np.ndarray
    knot_values: np.ndarray

    def __post_init__(self):
        self.knot_times = np.asarray(self.knot_times, dtype=float)
        self.knot_values = np.asarray(self.knot_values, dtype=float)
        if self.knot_times.shape != self.knot_values.shape or self.knot_times.ndim != 1:
            raise ValueError("knot times and values must be 1-d of equal length")
        if np.any(np.diff(self.knot_times) <= 0):
            raise ValueError("knot times must be strictly increasing")
        zero = np.flatnonzero(self.knot_times == 0.0)
        if zero.size != 1:
            raise ValueError("knot times must contain 0")
        if self.knot_values[zero[0]] != 0.0:
            raise ValueError("alpha(0) must be 0")

    @classmethod
    def identity(cls, window_T, knot_count):
        times = knot_grid(window_T, knot_count)
        return cls(times, times.copy())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        kt, kv = self.knot_times, self.knot_values
        out = np.interp(t, kt, kv)
        out = np.where(t > kt[-1], kv[-1] + (t - kt[-1]), out)
        return np.where(t < kt[0], kv[0] + (t - kt[0]), out)

    def to_dict(self):
        return {"knot_times": self.knot_times.tolist(), "knot_values": self.knot_values.tolist()}


def knot_grid(window_T, knot_count):
    if knot_count < 3 or knot_count % 2 == 0:
        raise ValueError("knot_count must be odd and >= 3 so that 0 is a knot")
    times = np.linspace(-window_T, window_T, knot_count)
    times[knot_count // 2] = 0.0
    return times


@dataclass
class SearchBudget:
    pair_samples: int = 64
    knot_count: int = 33
    window_T: float = 20.0
    dt: float = 0.05
    seed: int = 0
    iterations: int = 100_000
    max_attempts_factor: int = 100
    margin: float = DISTINCTNESS_MARGIN
    restarts: int = 3

    def __post_init__(self):
        check_positive(self.window_T, "window_T")
        check_positive(self.dt, "dt")
        if self.pair_samples < 1 or self.iterations < 1:
            raise ValueError("pair_samples and iterations must be >= 1")
        knot_grid(self.window_T, self.knot_count)


@dataclass
class Witness:
    x: object
    y: object
    alpha: Reparam
    window_T: float
    max_discrepancy: float
    orbit_distinctness: float
    tail_flag: str
    tail_details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "x": _point_json(self.x),
            "y": _point_json(self.y),
            "alpha": self.alpha.to_dict(),
            "window_T": self.window_T,
            "max_discrepancy": self.max_discrepancy,
            "orbit_distinctness": self.orbit_distinctness,
            "tail_flag": self.tail_flag,
            "tail_details": self.tail_details,
        }


@dataclass
class ExpansivityVerdict:
    notion: str
    result: str
    witness: Optional[Witness]
    eps: float
    delta_id: str
    pairs_screened: int
    pairs_rejected: int
    iterations_used: int
    budget: dict
    admitted_singular_pairs: int = 0
    limitation: str = LIMITATION

    @property
    def found(self):
        return self.result == "witness_found"

    def to_dict(self):
        d = asdict(self)
        d["witness"] = None if self.witness is None else self.witness.to_dict()
        return d


def _point_json(p):
    if hasattr(p, "word"):
        return {"word": list(p.word), "origin": p.origin, "height": p.height}
    return np.asarray(p, dtype=float).tolist()


def _grid(T, dt):
    n = int(math.floor(T / dt + 1e-9))
    half = np.arange(1, n + 1) * dt
    return np.concatenate([-half[::-1], [0.0], half])


def orbit_distinctness(flow, x, y, eps, dt):
    """min over s in [-eps, eps] (grid plus endpoints) of d(phi_s x, y)."""
    s = np.union1d(_grid(eps, dt), [-eps, eps])
    return float(np.min(flow.space.dist(flow.orbit(x, s), y)))


def _close(notion, values):
    return values <= 0 if notion == "rescaling_expansive" else values < 0


class _Objective:
    """max over the time grid of d(phi_t x, phi_alpha(t) y) - delta(phi_t x)."""

    def __init__(self, flow, x, y, delta, times):
        self.flow, self.y, self.times = flow, y, times
        ox = flow.orbit(x, times)
        self.ox = ox
        self.scale = delta.evaluate_many(ox)
        self.calls = 0

    def profile(self, alpha):
        try:
            oy = self.flow.orbit(self.y, alpha(self.times))
        except DomainEscape:
            return np.full(len(self.times), np.inf)
        return self.flow.space.dist(self.ox, oy) - self.scale

    def __call__(self, alpha):
        self.calls += 1
        return float(np.max(self.profile(alpha)))


def _descend(objective, budget, rng, evals):
    """Coordinate descent with step halving over the free knot values; random restarts.

    Returns (best_value, best_alpha, evaluations_used).  Stops early once the
    value is negative.
    """
    base = Reparam.identity(budget.window_T, budget.knot_count)
    free = [k for k in range(budget.knot_count) if base.knot_times[k] != 0.0]
    best_val, best_alpha = math.inf, base
    used = 0
    for restart in range(budget.restarts + 1):
        values = base.knot_values.copy()
        if restart:
            # random common offset away from 0, keeping alpha(0) = 0
            shift = rng.uniform(-1.0, 1.0)
            values[free] += shift * np.minimum(1.0, np.abs(base.knot_times[free]))
        alpha = Reparam(base.knot_times, values)
        cur = objective(alpha)
        used += 1
        step = 0.5
        while step > 1e-4 and used < evals and cur >= 0:
            improved = False
            for k in free:
                for sign in (1.0, -1.0):
                    if used >= evals:
                        break
                    trial = values.copy()
                    trial[k] += sign * step
                    cand = Reparam(base.knot_times, trial)
                    val = objective(cand)
                    used += 1
                    if val < cur:
                        values, alpha, cur, improved = trial, cand, val, True
                        break
            if not improved:
                step /= 2
        if cur < best_val:
            best_val, best_alpha = cur, alpha
        if best_val < 0 or used >= evals:
            break
    return best_val, best_alpha, used


def tail_check(flow, x, y, alpha, delta, window_T, notion, step=0.5, samples=16):
    """Sample both tails past the window; contraction toward a common limit within the tube.

    A side passes when it has at least 3 samples before any domain escape,
    every sample is inside the tube, the pair distance is nonincreasing and
    the orbit's own step displacement strictly decreases (the orbit settles).
    """
    details = {}
    ok = True
    for side, sign in (("forward", 1.0), ("backward", -1.0)):
        times = sign * (window_T + step * np.arange(0, samples + 1))
        ox, oy = [], []
        for t in times:
            try:
                ox.append(flow.evaluate(x, t))
                oy.append(flow.evaluate(y, float(alpha(t))))
            except DomainEscape:
                ox = ox[:len(oy)]
                break
        n = len(oy)
        if n < 3:
            details[side] = {"samples": n, "passed": False}
            ok = False
            continue
        ox_arr, oy_arr = _stack(flow, ox), _stack(flow, oy)
        d = flow.space.dist(ox_arr, oy_arr)
        disc = d - delta.evaluate_many(ox_arr)
        steps = flow.space.dist(flow.space.take(ox_arr, slice(1, None)), flow.space.take(ox_arr, slice(None, -1)))
        inside = bool(np.all(_close(notion, disc)))
        contracting = bool(np.all(d[1:] <= d[:-1] * (1 + 1e-9) + 1e-15))
        settling = bool(np.all(steps[1:] < steps[:-1]))
        passed = inside and contracting and settling
        details[side] = {"samples": n, "inside_tube": inside, "pair_distance_nonincreasing": contracting,
                         "orbit_settling": settling, "passed": passed}
        ok = ok and passed
    return ("tail_verified" if ok else "window_only"), details


def _stack(flow, pts):
    if flow.space.kind == "vector":
        return np.stack([np.asarray(p, dtype=float) for p in pts])
    out = np.empty(len(pts), dtype=object)
    out[:] = pts
    return out


def recheck_witness(flow, witness, delta, eps, notion, dt, margin=DISTINCTNESS_MARGIN):
    """Re-verify a witness point by point, independently of the search's vectorized path."""
    notion = normalize_notion(notion)
    worst = -math.inf
    for t in _grid(witness.window_T, dt):
        xt = flow.evaluate(witness.x, t)
        yt = flow.evaluate(witness.y, float(witness.alpha(t)))
        worst = max(worst, flow.space.metric(xt, yt) - delta(xt))
    s_grid = np.union1d(_grid(eps, dt), [-eps, eps])
    distinct = min(flow.space.metric(flow.evaluate(witness.x, s), witness.y) for s in s_grid)
    closeness = worst <= 0 if notion == "rescaling_expansive" else worst < 0
    return {"max_discrepancy": worst, "orbit_distinctness": distinct,
            "valid": bool(closeness and distinct > margin)}


def _screen(flow, x, y, delta, eps, budget, notion):
    """Distinctness above the margin and the t = 0 closeness premise (exact, since alpha(0) = 0)."""
    try:
        d0 = flow.space.metric(x, y)
        if not _close(notion, np.array([d0 - delta(x)]))[0]:
            return None
        margin = orbit_distinctness(flow, x, y, eps, budget.dt)
    except DomainEscape:
        return None
    return margin if margin > budget.margin else None


def falsify(flow, notion, eps, delta, search=None, n_jobs=1):
    """Seeded search for a witness against the given expansivity notion.

    ``search`` is a SearchBudget (or a dict of its fields).  ``iterations``
    counts objective evaluations; it is split evenly across the screened
    pairs so that results do not depend on ``n_jobs``.
    """
    notion = normalize_notion(notion)
    check_delta_for_notion(notion, delta)
    eps = check_positive(eps, "eps")
    budget = search if isinstance(search, SearchBudget) else SearchBudget(**(search or {}))
    rng = np.random.default_rng(budget.seed)

    # pairs are drawn sequentially so the candidate list depends on the seed only
    pairs, rejected, singular = [], 0, 0
    attempts = budget.pair_samples * budget.max_attempts_factor
    while len(pairs) < budget.pair_samples and attempts > 0:
        attempts -= 1
        x = flow.space.take(flow.sample_points(rng, 1), 0)
        y = flow.perturb(rng, x, max(float(delta(x)), 1e-12))
        if flow.space.kind == "vector" and not flow.space.contains(y):
            rejected += 1
            continue
        margin = _screen(flow, x, y, delta, eps, budget, notion)
        if margin is None:
            rejected += 1
            continue
        if flow.is_singular(x) or flow.is_singular(y):
            singular += 1
        pairs.append((x, y, margin))

    per_pair = max(1, budget.iterations // max(1, budget.pair_samples))
    seeds = np.random.SeedSequence(budget.seed).spawn(len(pairs))
    times = _grid(budget.window_T, budget.dt)

    def work(k):
        x, y, margin = pairs[k]
        objective = _Objective(flow, x, y, delta, times)
        val, alpha, used = _descend(objective, budget, np.random.default_rng(seeds[k]), per_pair)
        if notion == "rescaling_expansive":
            hit = val <= 0
        else:
            hit = val < 0
        return hit, val, alpha, used

    used_total = 0
    witness = None
    jobs = max(1, int(n_jobs or 1))
    with ThreadPoolExecutor(jobs) as pool:
        for start in range(0, len(pairs), jobs):
            batch = list(range(start, min(start + jobs, len(pairs))))
            results = list(pool.map(work, batch))
            for k, (hit, val, alpha, used) in zip(batch, results):
                used_total += used
                if hit:
                    x, y, margin = pairs[k]
                    flag, details = tail_check(flow, x, y, alpha, delta, budget.window_T, notion)
                    witness = Witness(x, y, alpha, budget.window_T, val, margin, flag, details)
                    break
            if witness is not None:
                break

    return ExpansivityVerdict(
        notion=notion,
        result="witness_found" if witness is not None else "no_witness",
        witness=witness,
        eps=eps,
        delta_id=delta.name,
        pairs_screened=len(pairs),
        pairs_rejected=rejected,
        iterations_used=used_total,
        budget=asdict(budget),
        admitted_singular_pairs=singular,
    )


def witness_plot_rows(flow, witness, delta, dt):
    """(t, d(phi_t x, phi_alpha(t) y), delta(phi_t x)) rows over the window."""
    times = _grid(witness.window_T, dt)
    ox = flow.orbit(witness.x, times)
    oy = flow.orbit(witness.y, witness.alpha(times))
    return np.column_stack([times, flow.space.dist(ox, oy), delta.evaluate_many(ox)])


@dataclass
class JimPair:
    x: list
    y: list
    premise_ok: bool
    drift: Optional[float] = None
    alpha: Optional[float] = None
    off_line: Optional[float] = None
    drift_residual: Optional[float] = None
    close_on_window: Optional[bool] = None
    alpha_within_eps: Optional[bool] = None


@dataclass
class JimCertificate:
    eps: float
    v: list
    pairs: list
    consistent: bool
    window_T: float
    dt: float

    def to_dict(self):
        return asdict(self)


def certify_example_jim(flow, eps, pairs=None, n_pairs=100, seed=0, window_T=20.0, dt=0.05):
    """Replay the translation argument on concrete near pairs.

    For each pair with ||x - y|| < delta(x) the best-matching time s(t) for
    phi_t x along the orbit of y gives a drift (s(t) - t) v; the drift is
    fitted over the window, the leftover off-line component measured, and
    alpha = -drift compared with eps.  A pair that stays in the tube on the
    whole window must have a negligible off-line component, and then
    y = phi_alpha(x) with |alpha| < eps.
    """
    from .scales import jim_scale

    v = np.asarray(getattr(flow, "v", None), dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("certify_example_jim needs a translation fixture")
    eps = check_positive(eps, "eps")
    delta = jim_scale(v, eps)
    vv = float(v @ v)
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(n_pairs):
            x = flow.sample_points(rng, 1)[0]
            pairs.append((x, flow.perturb(rng, x, delta(x))))
    times = _grid(window_T, dt)
    rows, consistent = [], True
    for x, y in pairs:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        row = JimPair(x.tolist(), y.tolist(), bool(np.linalg.norm(x - y) < delta(x)))
        if row.premise_ok:
            ox = flow.orbit(x, times)
            # s(t) minimizes |phi_t x - phi_s y| along the line through y
            s = ((ox - y) @ v) / vv
            drift = float(np.mean(s - times))
            row.drift = drift
            row.drift_residual = float(np.max(np.abs((s - times) - drift)))
            row.alpha = 0.0 - drift
            row.off_line = float(np.linalg.norm((x - y) - ((x - y) @ v / vv) * v))
            oy = flow.orbit(y, s)
            row.close_on_window = bool(np.all(flow.space.dist(ox, oy) < delta.evaluate_many(ox)))
            row.alpha_within_eps = bool(abs(row.alpha) < eps)
            if not row.alpha_within_eps:
                consistent = False
            if row.close_on_window and row.off_line > delta.evaluate_many(ox).min():
                consistent = False
        rows.append(row)
    return JimCertificate(eps, v.tolist(), rows, consistent, window_T, dt)


def _radius(flow, s):
    r = flow.isolation_radius
    return float(r(s)) if callable(r) else float(r)


def check_singularities_isolated(flow, samples=None, n_samples=2000, seed=0):
    """True iff B(sigma, r(sigma)) meets the samples only in sigma, for every known singularity.

    Singularities are the declared ones plus every singular sample point;
    r is the fixture's isolation radius.  No singularities: vacuously true.
    """
    if samples is None:
        try:
            samples = flow.sample_points(np.random.default_rng(seed), n_samples)
        except NotImplementedError:
            samples = flow.space.as_points([]) if flow.space.kind == "symbolic" else np.empty((0, 1))
    sing = list(flow.singularities)
    sing += [flow.space.take(samples, i) for i in range(len(samples)) if flow.is_singular(flow.space.take(samples, i))]
    if not sing:
        return True
    if flow.isolation_radius is None:
        raise ValueError(f"{flow.name}: singularities present but no isolation radius declared")
    for s in sing:
        d = flow.space.dist(samples, s)
        if np.any((d > 0) & (d < _radius(flow, s))):
            return False
    return True


def check_isolated_at_infinity(flow, samples, times=None):
    """Every sampled regular orbit meets the fixture's declared compact (sampled in time)."""
    pred = flow.isolated_at_infinity
    if pred is None:
        raise ValueError(f"{flow.name}: no compact declared for isolation at infinity")
    times = np.linspace(-40, 40, 801) if times is None else np.asarray(times, dtype=float)
    for i in range(len(samples)):
        x = flow.space.take(samples, i)
        if flow.is_singular(x):
            continue
        hit = False
        for t in times:
            try:
                if pred(flow.evaluate(x, t)):
                    hit = True
                    break
            except DomainEscape:
                continue
        if not hit:
            return False
    return True


class ExpansivityFalsifier(BaseEstimator):
    """Estimator form of ``falsify``; ``fit()`` runs the search and sets ``verdict_`` and ``witness_``."""

    def __init__(self, flow=None, notion="expansive", eps=1.0, delta=None, pair_samples=64, knot_count=33,
                 window_T=20.0, dt=0.05, iterations=100_000, margin=DISTINCTNESS_MARGIN, random_state=0,
                 n_jobs=1):
        self.flow = flow
        self.notion = notion
        self.eps = eps
        self.delta = delta
        self.pair_samples = pair_samples
        self.knot_count = knot_count
        self.window_T = window_T
        self.dt = dt
        self.iterations = iterations
        self.margin = margin
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if self.flow is None or self.delta is None:
            raise ValueError("ExpansivityFalsifier needs a flow and a delta")
        budget = SearchBudget(self.pair_samples, self.knot_count, self.window_T, self.dt, self.random_state,
                              self.iterations, margin=self.margin)
        self.verdict_ = falsify(self.flow, self.notion, self.eps, self.delta, budget, self.n_jobs)
        self.witness_ = self.verdict_.witness
        return self
