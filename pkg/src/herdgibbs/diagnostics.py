"""Measured quantities computed from sample records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .herding import SampleRecord
from .oracle import JOINT_CAP, CapExceeded, ExactDistribution, exact_marginals
from .pgm import state_index

MARGINAL = "marginal_abs_error"
TV_JOINT = "tv_joint"
METRICS = (MARGINAL, TV_JOINT)


class InsufficientData(ValueError):
    pass


def empirical_counts(rec: SampleRecord, tau: int, T: int) -> np.ndarray:
    n = rec.num_vars
    if n > JOINT_CAP:
        raise CapExceeded(f"{n} variables exceeds the joint cap of {JOINT_CAP}")
    if tau < 0 or T < 1:
        raise ValueError("need tau >= 0 and T >= 1")
    if len(rec) < tau + T:
        raise InsufficientData(f"record has {len(rec)} sweeps, need {tau + T}")
    codes = rec.state_codes()[tau : tau + T]
    return np.bincount(codes, minlength=2**n)


def empirical_distribution(rec: SampleRecord, tau: int, T: int) -> ExactDistribution:
    """Fraction of the ``T`` samples starting at sweep ``tau`` spent in each state."""
    counts = empirical_counts(rec, tau, T)
    return ExactDistribution(rec.num_vars, counts / T)


@dataclass
class ErrorSeries:
    points: list[tuple[int, float]]
    metric: str
    tau: int = 0
    variable: int = 0

    @property
    def T(self) -> np.ndarray:
        return np.array([t for t, _ in self.points], dtype=float)

    @property
    def errors(self) -> np.ndarray:
        return np.array([e for _, e in self.points], dtype=float)


def _check_grid(T_grid: Iterable[int]) -> np.ndarray:
    grid = np.asarray(list(T_grid), dtype=np.int64)
    if grid.size == 0 or grid[0] < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("T grid must be positive and strictly increasing")
    return grid


def error_series(
    rec: SampleRecord,
    oracle: ExactDistribution | np.ndarray,
    metric: str = TV_JOINT,
    tau: int = 0,
    T_grid: Iterable[int] = (),
    variable: int = 0,
) -> ErrorSeries:
    """Error of the empirical estimate from ``tau`` onward at every ``T`` in the grid.

    For ``marginal_abs_error`` the oracle may be either a joint distribution
    or a vector of marginals.
    """
    grid = _check_grid(T_grid)
    if len(rec) < tau + grid[-1]:
        raise InsufficientData(f"record has {len(rec)} sweeps, need {tau + grid[-1]}")
    if metric == MARGINAL:
        target = (
            exact_marginals(oracle)[variable]
            if isinstance(oracle, ExactDistribution)
            else float(np.asarray(oracle)[variable])
        )
        hits = np.cumsum(rec.samples[tau : tau + grid[-1], variable], dtype=np.int64)
        errs = np.abs(hits[grid - 1] / grid - target)
    elif metric == TV_JOINT:
        if not isinstance(oracle, ExactDistribution):
            raise TypeError("tv_joint needs an ExactDistribution oracle")
        if oracle.n != rec.num_vars:
            raise ValueError("oracle and record disagree on the number of variables")
        if rec.num_vars > JOINT_CAP:
            raise CapExceeded("joint metrics need at most 20 variables")
        codes = rec.state_codes()[tau : tau + grid[-1]]
        errs = np.empty(grid.size)
        counts = np.zeros(2**rec.num_vars, dtype=np.int64)
        prev = 0
        for g, T in enumerate(grid):
            counts += np.bincount(codes[prev:T], minlength=counts.size)
            prev = T
            errs[g] = 0.5 * np.abs(counts / T - oracle.probs).sum()
    else:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return ErrorSeries([(int(T), float(e)) for T, e in zip(grid, errs)], metric, tau, variable)


def upper_envelope(errors: Sequence[float]) -> np.ndarray:
    """``env[k] = max(errors[k:])``: the smallest non-increasing upper bound."""
    e = np.asarray(errors, dtype=float)
    return np.maximum.accumulate(e[::-1])[::-1]


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    n_points: int
    n_excluded: int = 0
    excluded_T: list[int] = field(default_factory=list)

    def report(self) -> str:
        return (
            f"slope={self.slope!r}\nintercept={self.intercept!r}\n"
            f"n_points={self.n_points}\nn_excluded={self.n_excluded}\n"
        )


def convergence_slope(
    series: ErrorSeries,
    fit_range: tuple[float, float] | None = None,
    envelope: bool = True,
    min_points: int = 5,
) -> SlopeFit:
    """Least-squares slope of ``log(error)`` against ``log(T)``.

    With ``envelope`` the errors are first replaced by their non-increasing
    upper envelope (computed over the whole series) to remove oscillations.
    Zero errors cannot be logged and are excluded and counted.
    """
    T = series.T
    e = upper_envelope(series.errors) if envelope else series.errors
    keep = np.ones(T.size, dtype=bool)
    if fit_range is not None:
        keep &= (T >= fit_range[0]) & (T <= fit_range[1])
    zero = keep & (e <= 0)
    keep &= e > 0
    if keep.sum() < min_points:
        raise InsufficientData(f"only {int(keep.sum())} usable points, need {min_points}")
    slope, intercept = np.polyfit(np.log(T[keep]), np.log(e[keep]), 1)
    return SlopeFit(float(slope), float(intercept), int(keep.sum()), int(zero.sum()), T[zero].astype(int).tolist())


def torus(weights: np.ndarray) -> np.ndarray:
    """Map weights onto the unit torus ``[0, 1)``."""
    return np.mod(np.asarray(weights, dtype=float), 1.0)


def weight_discrepancy(points: np.ndarray, grid: int = 64, min_points: int = 100) -> float:
    """Anchored-box star discrepancy of points in ``[0, 1)^d``, ``d <= 3``.

    Boxes ``[0, a)`` with every corner coordinate on the grid ``{1/g, ..., 1}``
    are scanned; the result is a grid estimate (a lower bound) of the exact
    star discrepancy.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m, d = pts.shape
    if m < min_points:
        raise InsufficientData(f"need at least {min_points} points, got {m}")
    if d > 3:
        raise ValueError("box scanning is limited to 3 dimensions")
    if np.any((pts < 0) | (pts >= 1)):
        raise ValueError("points must lie in [0, 1)")
    # cell k holds points with coordinate in [k/g, (k+1)/g)
    cells = np.minimum((pts * grid).astype(np.int64), grid - 1)
    hist = np.zeros((grid,) * d)
    np.add.at(hist, tuple(cells.T), 1.0)
    cum = hist
    for ax in range(d):
        cum = np.cumsum(cum, axis=ax)
    # cum[k...] counts points in [0, (k+1)/g)^d
    edges = np.arange(1, grid + 1) / grid
    vol = edges
    for _ in range(d - 1):
        vol = np.multiply.outer(vol, edges)
    return float(np.abs(cum / m - vol).max())


def van_der_corput(m: int, base: int = 2) -> np.ndarray:
    out = np.zeros(m)
    for k in range(m):
        q, denom, n = 0.0, 1.0, k
        while n:
            n, r = divmod(n, base)
            denom *= base
            q += r / denom
        out[k] = q
    return out


@dataclass
class VisitRate:
    counts: np.ndarray
    window: int

    @property
    def min_rate(self) -> float:
        return float(self.counts.min() / self.window) if self.counts.size else 0.0


def visit_rate(
    source: SampleRecord | np.ndarray,
    x: Sequence[int],
    slot: int = 0,
    window: int | None = None,
) -> VisitRate:
    """Count visits of state ``x`` at position ``slot`` of each sweep.

    ``source`` is either a record made with ``record_steps=True`` or the
    step-state array itself (row ``t`` is the state after ``t`` steps).
    Sweeps are grouped into consecutive windows of ``window`` sweeps (all of
    them by default) and one count per window is returned.
    """
    states = source.states if isinstance(source, SampleRecord) else np.asarray(source)
    if states is None:
        raise InsufficientData("visit rates need a record made with record_steps=True")
    n = states.shape[1]
    if not 0 <= slot < n:
        raise ValueError(f"slot must lie in [0, {n})")
    sweeps = (states.shape[0] - 1) // n
    at_slot = states[slot : slot + sweeps * n : n]
    hit = np.all(at_slot == np.asarray(x, dtype=states.dtype), axis=1)
    window = sweeps if window is None else int(window)
    k = sweeps // window
    counts = hit[: k * window].reshape(k, window).sum(axis=1)
    return VisitRate(counts, window)


def nesting_consistent(rec: SampleRecord, tau: int, T: int) -> bool:
    """Sliding-window identity between the ``T`` and ``T + 1`` sample counts."""
    a = empirical_counts(rec, tau, T)
    b = empirical_counts(rec, tau, T + 1)
    b[state_index(rec.samples[tau + T])] -= 1
    return bool(np.array_equal(a, b))


def log_T_scaled(series: ErrorSeries) -> np.ndarray:
    """``T * error / log(T)`` for each point."""
    return series.T * series.errors / np.log(series.T)


def powers_of_two(lo: int, hi: int) -> list[int]:
    return [2**k for k in range(int(math.log2(lo)), int(math.log2(hi)) + 1)]
