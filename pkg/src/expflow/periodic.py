"""Periodic-orbit census of constant-roof suspensions over subshifts of finite type.

Points of symbolic period n are counted exactly as trace(A^n) with Python
integers; Moebius inversion turns these into orbits of least period n, each
of which is one periodic flow orbit of period n * roof.
"""

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from ._validation import check_positive

MAX_EXACT_N = 64


def mobius(n):
    if n < 1:
        raise ValueError("mobius is defined for n >= 1")
    result, k = 1, 2
    while k * k <= n:
        if n % k == 0:
            n //= k
            if n % k == 0:
                return 0
            result = -result
        k += 1
    return -result if n > 1 else result


def divisors(n):
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def matrix_power_traces(adjacency, n_max):
    """[trace(A^1), ..., trace(A^n_max)] in exact integer arithmetic."""
    A = np.array([[int(v) for v in row] for row in adjacency], dtype=object)
    P = A.copy()
    traces = []
    for _ in range(n_max):
        traces.append(int(sum(P[i, i] for i in range(len(A)))))
        P = P.dot(A)
    return traces


@dataclass
class CensusRow:
    n: int
    trace: int
    least_period_orbits: int
    flow_period: float
    v_cumulative: int


@dataclass
class OrbitCensus:
    sft: dict
    roof: float
    t_max: float
    rows: list = field(default_factory=list)

    def v(self, t):
        """Number of periodic orbits with flow period <= t."""
        total = 0
        for row in self.rows:
            if row.flow_period <= t + 1e-12 * max(1.0, abs(t)):
                total += row.least_period_orbits
        return total

    def v_before(self, t):
        """Orbits with flow period < t (the left limit v(t-))."""
        total = 0
        for row in self.rows:
            if row.flow_period < t - 1e-12 * max(1.0, abs(t)):
                total += row.least_period_orbits
        return total

    def to_dict(self):
        return asdict(self)

    CSV_HEADER = ("n", "trace", "least_period_orbits", "flow_period", "v_cumulative")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([r.n, r.trace, r.least_period_orbits, format(r.flow_period, ".17g"), r.v_cumulative])
        return buf.getvalue()


def orbit_census(sft, t_max):
    """Rows n = 1..floor(t_max / roof) with exact traces, least-period counts and v."""
    t_max = check_positive(t_max, "t_max")
    if t_max < sft.roof:
        raise ValueError(f"t_max must be at least the roof {sft.roof}")
    n_max = int(math.floor(t_max / sft.roof + 1e-12))
    traces = matrix_power_traces(sft.adjacency, n_max)
    census = OrbitCensus(sft.describe(), sft.roof, float(t_max))
    cumulative = 0
    for n in range(1, n_max + 1):
        total = sum(mobius(n // d) * traces[d - 1] for d in divisors(n))
        if total % n:
            raise ArithmeticError(f"Moebius sum {total} not divisible by {n}")
        least = total // n
        cumulative += least
        census.rows.append(CensusRow(n, traces[n - 1], least, n * sft.roof, cumulative))
    return census


def census_window(census, t_star, rho):
    """Orbits with flow period in [t_star - rho, t_star + rho]."""
    check_positive(t_star, "t_star", allow_zero=True)
    check_positive(rho, "rho", allow_zero=True)
    return census.v(t_star + rho) - census.v_before(t_star - rho)


@dataclass
class GrowthRate:
    rate: float
    t_max: float
    series: list

    def to_dict(self):
        return asdict(self)


def growth_rate(census):
    """(1/t_max) log v(t_max) with the series (t, (1/t) log v(t)) over the census rows."""
    if len(census.rows) < 3:
        raise ValueError("growth rate needs a census with at least 3 rows")
    last = census.rows[-1]
    if last.v_cumulative == 0:
        raise ValueError("no orbits")
    series = [[r.flow_period, math.log(r.v_cumulative) / r.flow_period] for r in census.rows if r.v_cumulative > 0]
    return GrowthRate(math.log(last.v_cumulative) / last.flow_period, last.flow_period, series)


@dataclass
class GrowthBoundVerdict:
    growth_rate: float
    entropy_estimate: float
    slack: float
    passed: bool
    classical_estimate: float = None

    def to_dict(self):
        return asdict(self)


def check_growth_bound(census, entropy_report, slack=0.05, classical_report=None):
    """growth rate of v(t) <= entropy estimate + slack; both sides are recorded."""
    g = growth_rate(census).rate
    e = float(entropy_report.estimate)
    return GrowthBoundVerdict(g, e, float(slack), bool(g <= e + slack),
                              None if classical_report is None else float(classical_report.estimate))


def necklace_counts(sft, n_max):
    """Least-period orbit counts by brute force over cyclic words (independent of traces).

    Each admissible cyclic word of length n whose least period is n is
    counted once per rotation class.
    """
    counts = []
    for n in range(1, n_max + 1):
        seen = set()
        for w in product(range(sft.m), repeat=n):
            if not sft.is_admissible(w, cyclic=True):
                continue
            if any(w == w[p:] + w[:p] for p in range(1, n) if n % p == 0):
                continue
            seen.add(min(w[i:] + w[:i] for i in range(n)))
        counts.append(len(seen))
    return counts


def necklace_v(sft, n_max):
    """Cumulative v(n * roof), n = 1..n_max, from the brute-force counts."""
    return list(np.cumsum(necklace_counts(sft, n_max)).tolist())
