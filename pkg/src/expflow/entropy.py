"""Growth-rate estimates: classical entropy e(phi) and the normalized invariant e*(phi).

Every (K, delta) pair is a *cell*.  A cell tabulates the log-numerator
L(t) = log S (classical), log(S/beta) or log(R/beta) over the time grid.
Its tail rate is the larger of the two last local growth rates
(L(t_k) - L(t_{k-1})) / (t_k - t_{k-1}); the estimate is the maximum tail
rate over cells.  Limits in t, in epsilon and the sup over scales are thus
all replaced by finite sweeps, and the report carries the sweep.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_time_grid
from .core import TimeScaledFlow
from .scales import ScaleFn, constant
from .separation import CompactSample, SeparationEngine, make_compact

MODES = ("classical_e", "e_star_separating", "e_star_spanning")
AGGREGATION = "max over cells of max(local growth rate at the two largest t)"


@dataclass
class EntropyReport:
    estimate: float
    mode: str
    t_grid: list
    delta_family_id: list
    K_id: list
    per_t_rates: list
    local_rates: list
    regression: dict
    best_cell: dict
    cells: list = field(default_factory=list)
    dt: float = 0.0
    seed: int = 0
    aggregation: str = AGGREGATION
    note: str = "sup over scales and compacts approximated by the swept family (lower estimate)"

    def to_dict(self):
        return asdict(self)

    def plot_rows(self):
        """Two-column (t, rate) rows of the best cell."""
        return [(t, r) for t, r in self.per_t_rates]


def tail_rate(t_grid, log_values):
    """max of the local growth rates at the two largest grid times."""
    t = np.asarray(t_grid, dtype=float)
    L = np.asarray(log_values, dtype=float)
    if len(t) < 2:
        raise ValueError("tail rate needs at least two time values")
    local = np.diff(L) / np.diff(t)
    return float(local[-2:].max()), local


def _cell(flow, K, delta, t_grid, dt, mode, seed, n_jobs):
    eng = SeparationEngine(flow, K, delta, dt, float(t_grid[-1]), n_jobs)
    counts, betas, logs, exact = [], [], [], []
    for t in t_grid:
        if mode == "e_star_spanning":
            idx, ex, _ = eng.spanning_set(t, seed)
        else:
            idx, ex, _ = eng.separated_set(t, seed)
        counts.append(len(idx))
        exact.append(ex)
        if mode == "classical_e":
            logs.append(math.log(len(idx)))
        else:
            b = eng.beta(t)
            betas.append(b)
            logs.append(math.log(len(idx) / b))
    rate, local = tail_rate(t_grid, logs)
    slope, intercept = np.polyfit(t_grid, logs, 1) if len(t_grid) > 1 else (0.0, logs[0])
    return {
        "K": K.name,
        "delta": delta.name,
        "counts": counts,
        "betas": betas,
        "log_numerators": logs,
        "exact": exact,
        "tail_rate": rate,
        "local_rates": [[float(t), float(r)] for t, r in zip(t_grid[1:], local)],
        "per_t_rates": [[float(t), (L / t if t > 0 else float("nan"))] for t, L in zip(t_grid, logs)],
        "regression": {"slope": float(slope), "intercept": float(intercept)},
    }


def _aggregate(cells, mode, t_grid, dt, seed, family, K_list):
    best = max(cells, key=lambda c: c["tail_rate"])
    return EntropyReport(
        estimate=best["tail_rate"],
        mode=mode,
        t_grid=[float(t) for t in t_grid],
        delta_family_id=[d.name for d in family],
        K_id=[K.name for K in K_list],
        per_t_rates=best["per_t_rates"],
        local_rates=best["local_rates"],
        regression=best["regression"],
        best_cell={"K": best["K"], "delta": best["delta"]},
        cells=cells,
        dt=float(dt),
        seed=int(seed),
    )


def _is_cloud(item):
    """True for a point cloud, False for a single point."""
    if isinstance(item, CompactSample):
        return True
    if isinstance(item, np.ndarray):
        return item.ndim == 2 or item.dtype == object
    if isinstance(item, (list, tuple)):
        return len(item) > 0 and not isinstance(item[0], (int, float, np.number))
    return False


def _as_compacts(flow, K_list):
    if not isinstance(K_list, (list, tuple)) or (len(K_list) and not _is_cloud(K_list[0])):
        K_list = [K_list]
    return [make_compact(flow, K, name=getattr(K, "name", f"K{i}")) for i, K in enumerate(K_list)]


def estimate_entropy_compact(flow, K, eps_grid, t_grid, dt, seed=0, n_jobs=1):
    """Bowen-Dinaburg estimate: rates of log S(t, eps) swept over constant eps."""
    t_grid = check_time_grid(t_grid, min_len=2)
    family = [constant(e, f"eps={e:g}") for e in eps_grid]
    (K,) = _as_compacts(flow, K)
    cells = [_cell(flow, K, d, t_grid, dt, "classical_e", seed, n_jobs) for d in family]
    return _aggregate(cells, "classical_e", t_grid, dt, seed, family, [K])


def estimate_e_star(flow, K_list, delta_family, t_grid, dt, mode="separating", seed=0, n_jobs=1):
    """Rates of log(S/beta) (or log(R/beta)) maximized over compacts and positive continuous scales."""
    t_grid = check_time_grid(t_grid, min_len=2)
    full_mode = {"separating": "e_star_separating", "spanning": "e_star_spanning"}.get(mode, mode)
    if full_mode not in MODES[1:]:
        raise ValueError(f"unknown e* mode {mode!r}")
    family = [d if isinstance(d, ScaleFn) else constant(d, f"delta={d:g}") for d in delta_family]
    for d in family:
        if d.kind != "positive_continuous":
            raise ValueError(f"{d.name}: e* needs positive continuous scales")
    Ks = _as_compacts(flow, K_list)
    cells = [_cell(flow, K, d, t_grid, dt, full_mode, seed, n_jobs) for K in Ks for d in family]
    return _aggregate(cells, full_mode, t_grid, dt, seed, family, Ks)


@dataclass
class IdentityVerdict:
    identity: str
    lhs: float
    rhs: float
    margin: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def default_tolerance(lhs, rhs):
    return max(0.05, 0.1 * max(abs(lhs), abs(rhs)))


def verify_identity(identity, instance, tolerance=None):
    """Compare both sides of an entropy identity on a concrete instance.

    ``instance`` keys by identity:

    * conjugacy_invariance: lhs/rhs dicts with flow, K_list, family; t_grid, dt
    * compact_equality: flow, K, family (eps values), t_grid, dt
    * time_rescale: flow, K_list, family, t_grid, dt, a
    * spanning_equals_separating: flow, K_list, family, t_grid, dt

    A failed comparison is reported in the verdict, never raised.
    """
    seed = instance.get("seed", 0)
    n_jobs = instance.get("n_jobs", 1)
    t_grid = instance["t_grid"]
    dt = instance["dt"]
    if identity == "conjugacy_invariance":
        sides = []
        for key in ("lhs", "rhs"):
            side = instance[key]
            sides.append(estimate_e_star(side["flow"], side["K_list"], side["family"], t_grid, dt,
                                         "separating", seed, n_jobs))
        lhs, rhs = sides[0].estimate, sides[1].estimate
        reports = {"lhs": sides[0].to_dict(), "rhs": sides[1].to_dict()}
    elif identity == "compact_equality":
        flow, K = instance["flow"], instance["K"]
        star = estimate_e_star(flow, [K], instance["family"], t_grid, dt, "separating", seed, n_jobs)
        classical = estimate_entropy_compact(flow, K, instance["family"], t_grid, dt, seed, n_jobs)
        lhs, rhs = star.estimate, classical.estimate
        reports = {"e_star": star.to_dict(), "classical": classical.to_dict()}
    elif identity == "time_rescale":
        a = float(instance["a"])
        flow = instance["flow"]
        base = estimate_e_star(flow, instance["K_list"], instance["family"], t_grid, dt, "separating", seed,
                               n_jobs)
        # matched orbit length: the scaled flow covers a*t in time t
        scaled = estimate_e_star(TimeScaledFlow(flow, a), instance["K_list"], instance["family"],
                                 np.asarray(t_grid, dtype=float) / a, dt / a, "separating", seed, n_jobs)
        lhs, rhs = scaled.estimate, a * base.estimate
        ratio = lhs / base.estimate if base.estimate > 0 else float("nan")
        tol = tolerance if tolerance is not None else 0.1 * a
        passed = bool(np.isfinite(ratio) and abs(ratio - a) <= tol)
        return IdentityVerdict(identity, lhs, rhs, abs(lhs - rhs), tol, passed,
                               {"a": a, "ratio": ratio, "base": base.to_dict(), "scaled": scaled.to_dict()})
    elif identity == "spanning_equals_separating":
        flow = instance["flow"]
        sep = estimate_e_star(flow, instance["K_list"], instance["family"], t_grid, dt, "separating", seed,
                              n_jobs)
        span = estimate_e_star(flow, instance["K_list"], instance["family"], t_grid, dt, "spanning", seed,
                               n_jobs)
        lhs, rhs = span.estimate, sep.estimate
        reports = {"spanning": span.to_dict(), "separating": sep.to_dict()}
    else:
        raise ValueError(f"unknown identity {identity!r}")
    tol = tolerance if tolerance is not None else default_tolerance(lhs, rhs)
    margin = abs(lhs - rhs)
    return IdentityVerdict(identity, lhs, rhs, margin, tol, bool(margin <= tol), reports)


class EntropyEstimator(BaseEstimator):
    """Estimator form of the entropy sweeps.

    Parameters
    ----------
    flow : Flow
    mode : {"classical", "e_star", "e_star_spanning"}
    scales : list of float or ScaleFn
        Epsilon grid (classical) or scale family (e*).
    t_grid : sequence of float
    dt : float
    random_state : int
        Seed of the greedy admission order.
    n_jobs : int

    ``fit(X)`` takes a compact sample (or a list of them for e*) and sets
    ``estimate_`` and ``report_``.
    """

    def __init__(self, flow=None, mode="classical", scales=(0.25, 0.125), t_grid=(1.0, 2.0, 3.0), dt=1.0,
                 random_state=0, n_jobs=1):
        self.flow = flow
        self.mode = mode
        self.scales = scales
        self.t_grid = t_grid
        self.dt = dt
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.flow is None:
            raise ValueError("EntropyEstimator needs a flow")
        if self.mode == "classical":
            self.report_ = estimate_entropy_compact(self.flow, X, self.scales, self.t_grid, self.dt,
                                                    self.random_state, self.n_jobs)
        elif self.mode in ("e_star", "e_star_spanning"):
            sub = "separating" if self.mode == "e_star" else "spanning"
            self.report_ = estimate_e_star(self.flow, X, self.scales, self.t_grid, self.dt, sub,
                                           self.random_state, self.n_jobs)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.estimate_ = self.report_.estimate
        return self
