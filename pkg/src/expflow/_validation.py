"""Input validation helpers shared by the estimators."""

import math
import numbers

import numpy as np


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_time_grid(t_grid, min_len=1):
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size < min_len:
        raise ValueError(f"time grid needs at least {min_len} values, got {t.size}")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("time grid values must be finite and nonnegative")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def time_steps(t, dt):
    """Grid times {0, dt, 2dt, ...} intersected with [0, t]."""
    check_positive(dt, "dt")
    check_positive(t, "t", allow_zero=True)
    n = int(math.floor(t / dt + 1e-9))
    return np.arange(n + 1) * dt


def check_vector_point(x, dim=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"vector point must be one-dimensional, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    return x


def check_random_state(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required for stochastic operations")
    return np.random.default_rng(seed)
