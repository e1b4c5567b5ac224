"""Subshifts of finite type and their constant-roof suspension flows.

Symbolic points are periodic bi-infinite sequences: a point stores one period
``word`` and an ``origin`` so that x_i = word[(origin + i) mod len(word)].
Every such sequence that is cyclically admissible belongs to the subshift,
and the metric can be evaluated exactly.
"""

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product

import numpy as np

from ._validation import check_positive
from .core import Flow, MetricSpace

# distances below 2**-MAX_AGREEMENT are reported as 0 only for identical sequences
MAX_AGREEMENT = 4096


@dataclass(frozen=True)
class SFT:
    """Vertex shift on {0, ..., m-1} with 0/1 adjacency matrix and constant roof."""

    adjacency: tuple
    roof: float = 1.0
    name: str = "sft"

    def __post_init__(self):
        A = tuple(tuple(int(v) for v in row) for row in self.adjacency)
        m = len(A)
        if m == 0 or any(len(row) != m for row in A):
            raise ValueError("adjacency must be a nonempty square matrix")
        if any(v not in (0, 1) for row in A for v in row):
            raise ValueError("adjacency entries must be 0 or 1")
        if not any(v for row in A for v in row):
            raise ValueError("adjacency has no allowed transition")
        check_positive(self.roof, "roof")
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "roof", float(self.roof))

    @property
    def m(self):
        return len(self.adjacency)

    @cached_property
    def matrix(self):
        return np.array(self.adjacency, dtype=np.int64)

    def allowed(self, a, b):
        return self.adjacency[a][b] == 1

    def is_admissible(self, word, cyclic=False):
        pairs = zip(word, word[1:] + (word[:1] if cyclic else ()))
        return all(self.allowed(a, b) for a, b in pairs)

    def words(self, length):
        """All admissible words of the given length, in lexicographic order."""
        if length <= 0:
            yield ()
            return
        stack = [(a,) for a in reversed(range(self.m))]
        while stack:
            w = stack.pop()
            if len(w) == length:
                yield w
                continue
            for b in reversed(range(self.m)):
                if self.allowed(w[-1], b):
                    stack.append(w + (b,))

    def spectral_radius(self):
        return float(max(abs(np.linalg.eigvals(self.matrix.astype(float)))))

    def _path(self, a, b):
        """Shortest list of intermediate symbols on a path a -> ... -> b."""
        if self.allowed(a, b):
            return []
        prev = {a: None}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for v in range(self.m):
                if self.allowed(u, v) and v not in prev:
                    prev[v] = u
                    if self.allowed(v, b):
                        path = [v]
                        while prev[path[-1]] != a:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    queue.append(v)
        return None

    def _rest_cycle(self):
        for s in range(self.m):
            if self.allowed(s, s):
                return [s]
        for s in range(self.m):
            back = self._path(s, s)
            if back is not None:
                return [s] + back
        raise ValueError("subshift has no periodic point")

    def describe(self):
        return {"name": self.name, "alphabet_size": self.m, "adjacency": [list(r) for r in self.adjacency],
                "roof": self.roof}


FULL_2_SHIFT = SFT(((1, 1), (1, 1)), 1.0, "full2")
GOLDEN_MEAN_SHIFT = SFT(((1, 1), (1, 0)), 1.0, "golden")
PRESETS = {"full2": FULL_2_SHIFT, "golden": GOLDEN_MEAN_SHIFT, "fixed": SFT(((1,),), 1.0, "fixed")}


@dataclass(frozen=True)
class SymbolicPoint:
    """Point (x, h) of a suspension: periodic sequence plus height 0 <= h < roof."""

    word: tuple
    origin: int = 0
    height: float = 0.0

    def __post_init__(self):
        if len(self.word) == 0:
            raise ValueError("word must be nonempty")
        if not math.isfinite(self.height) or self.height < 0:
            raise ValueError(f"height must be finite and >= 0, got {self.height}")

    @cached_property
    def _array(self):
        return np.asarray(self.word, dtype=np.int64)

    def symbols(self, positions):
        positions = np.asarray(positions, dtype=np.int64)
        return self._array[(positions + self.origin) % len(self.word)]

    def shifted(self, n, height):
        return SymbolicPoint(self.word, self.origin + int(n), height)

    def canonical(self):
        return (self.word, self.origin % len(self.word), self.height)

    def __eq__(self, other):
        return isinstance(other, SymbolicPoint) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())


def first_disagreement(x, y):
    """min{|i| : x_i != y_i}, or None if the sequences coincide."""
    p = len(x.word) * len(y.word) // math.gcd(len(x.word), len(y.word))
    limit = min(p, MAX_AGREEMENT)
    idx = np.arange(limit + 1)
    diff = (x.symbols(idx) != y.symbols(idx)) | (x.symbols(-idx) != y.symbols(-idx))
    hits = np.flatnonzero(diff)
    if hits.size:
        return int(hits[0])
    return None if p <= MAX_AGREEMENT else MAX_AGREEMENT + 1


def symbolic_distance(x, y):
    """2**-n with n the first index (in absolute value) where the sequences differ."""
    n = first_disagreement(x, y)
    return 0.0 if n is None else 2.0 ** -n


class SuspensionSpace(MetricSpace):
    """Suspension of an SFT with the product surrogate max(symbolic, |height difference|)."""

    kind = "symbolic"

    def __init__(self, sft):
        super().__init__(f"suspension({sft.name})", None)
        self.sft = sft
        self._pair_dist = np.frompyfunc(self.metric, 2, 1)

    def metric(self, x, y):
        return max(symbolic_distance(x, y), abs(x.height - y.height))

    def dist(self, a, b):
        return np.asarray(self._pair_dist(a, b), dtype=float)

    def as_points(self, points):
        points = list(points)
        out = np.empty(len(points), dtype=object)
        for i, p in enumerate(points):
            out[i] = self.check_point(p)
        return out

    def check_point(self, x):
        if not isinstance(x, SymbolicPoint):
            raise ValueError(f"expected a SymbolicPoint, got {type(x).__name__}")
        if not 0.0 <= x.height < self.sft.roof:
            raise ValueError(f"height {x.height} outside [0, {self.sft.roof})")
        w = np.asarray(x.word)
        if w.min() < 0 or w.max() >= self.sft.m:
            raise ValueError("word uses symbols outside the alphabet")
        if not np.all(self.sft.matrix[w, np.roll(w, -1)]):
            raise ValueError("word is not cyclically admissible")
        return x

    def contains(self, x):
        try:
            self.check_point(x)
        except ValueError:
            return False
        return True

    def describe(self):
        return {"id": self.name, "discreteness": "none", "sft": self.sft.describe(),
                "metric": "max(2^-n symbolic, |height difference|)"}


class SuspensionFlow(Flow):
    """Constant-roof suspension: time flows up the height, crossing the roof applies the shift."""

    def __init__(self, sft):
        super().__init__(f"suspension:{sft.name}", SuspensionSpace(sft), {"sft": sft.describe()})
        self.sft = sft
        # the whole compact suspension meets every orbit
        self.isolated_at_infinity = lambda x: True

    def _move(self, x, t):
        r = self.sft.roof
        total = x.height + t
        n = math.floor(total / r)
        h = total - n * r
        if h >= r - 1e-12 * r:
            n, h = n + 1, 0.0
        elif h < 0:
            h = 0.0
        return x.shifted(n, h)

    def _evaluate_many(self, x, times):
        out = np.empty(len(times), dtype=object)
        for j, t in enumerate(times):
            out[j] = x if t == 0.0 else self._move(x, float(t))
        return out

    def evaluate(self, x, t):
        t = float(t)
        if not math.isfinite(t):
            raise ValueError("time must be finite")
        return x if t == 0.0 else self._move(x, t)

    def sample_points(self, rng, n, period=12):
        words = cyclic_words(self.sft, period)
        if not words:
            raise ValueError("no admissible periodic words of the requested period")
        pts = []
        for _ in range(n):
            w = words[int(rng.integers(0, len(words)))]
            pts.append(SymbolicPoint(w, int(rng.integers(0, period)), float(rng.uniform(0, self.sft.roof))))
        return self.space.as_points(pts)

    def perturb(self, rng, x, scale):
        h = min(max(x.height + rng.uniform(-scale, scale), 0.0), self.sft.roof * (1 - 1e-12))
        return SymbolicPoint(x.word, x.origin, h)

    def separation_classes(self, points, t, delta_value, dt, relation):
        """Exact class labels for a constant scale when all heights agree.

        With equal heights and constant delta, "not separated" and "mutually
        shadowing" are equivalence relations (agreement of the symbols on a
        window fixed by the grid shifts), so class counts give exact S and R.
        Returns None when the shortcut does not apply.
        """
        if len(points) == 0:
            return None
        h0 = points[0].height
        if len({p.height for p in points}) != 1:
            return None
        r = self.sft.roof
        nsteps = int(math.floor(t / dt + 1e-9))
        shifts = sorted({math.floor((h0 + j * dt) / r + 1e-12) for j in range(nsteps + 1)})
        if relation == "separated":
            radius = math.floor(math.log2(1.0 / delta_value) + 1e-12) if delta_value <= 1 else -1
        elif relation == "shadow":
            radius = math.ceil(math.log2(1.0 / delta_value) - 1e-12) - 1
        else:
            raise ValueError(f"unknown relation {relation!r}")
        if radius < 0:
            return np.zeros(len(points), dtype=np.int64)
        window = np.array(sorted({n + i for n in shifts for i in range(-radius, radius + 1)}), dtype=np.int64)
        rows = symbol_table(points, window)
        # row-wise unique through a byte view; much faster than unique(axis=0)
        packed = np.ascontiguousarray(rows.astype(np.uint8 if self.sft.m < 256 else np.int64))
        keys = packed.view(np.dtype((np.void, packed.dtype.itemsize * packed.shape[1]))).ravel()
        _, labels = np.unique(keys, return_inverse=True)
        return labels.ravel()


_GROUP_CACHE = []  # [(points, groups)], held by reference so ids stay valid


def _period_groups(points):
    for cached, groups in _GROUP_CACHE:
        if cached is points:
            return groups
    by_len = {}
    for i, p in enumerate(points):
        by_len.setdefault(len(p.word), []).append(i)
    groups = []
    for period, idx in by_len.items():
        words = np.array([points[i].word for i in idx], dtype=np.int64)
        origins = np.array([points[i].origin for i in idx], dtype=np.int64)
        groups.append((period, np.array(idx), words, origins))
    _GROUP_CACHE.append((points, groups))
    del _GROUP_CACHE[:-4]
    return groups


def symbol_table(points, positions):
    """(N, len(positions)) array of symbols, vectorized over points sharing a period length."""
    positions = np.asarray(positions, dtype=np.int64)
    out = np.empty((len(points), len(positions)), dtype=np.int64)
    for period, idx, words, origins in _period_groups(points):
        cols = (positions[None, :] + origins[:, None]) % period
        out[idx] = np.take_along_axis(words, cols, axis=1)
    return out


@lru_cache(maxsize=16)
def cyclic_words(sft, period):
    return [w for w in product(range(sft.m), repeat=period) if sft.is_admissible(w, cyclic=True)]


def cylinder_sample(sft, depth, height=0.0, filler=64):
    """One periodic representative per admissible word of length ``depth``.

    The word sits on positions 0..depth-1 and is closed up by shortest
    connecting paths through a fixed rest cycle of length >= ``filler``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rest = sft._rest_cycle()
    reps = max(1, -(-filler // len(rest)))
    pts = []
    for w in sft.words(depth):
        out = sft._path(w[-1], rest[0])
        back = sft._path(rest[-1], w[0])
        if out is None or back is None:
            continue
        pts.append(SymbolicPoint(tuple(w) + tuple(out) + tuple(rest) * reps + tuple(back), 0, float(height)))
    return pts
