"""Functional observations on a shared time grid.

Curves live on one strictly increasing grid; integrals over the time
interval use the trapezoid rule on that grid, and the supremum of a
pointwise statistic is realized as the maximum over grid points (the
only observable values).  Per-window summaries are produced by
incremental prefix accumulation so a whole window family costs one
curve addition per window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ScanWindow, WindowSet


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points with trapezoid quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        wts = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("need at least 2 time points")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("time points must be strictly increasing")
        if wts.shape != pts.shape or not np.all(wts > 0):
            raise ValueError("weights must be positive and match the points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def from_points(cls, points) -> "TimeGrid":
        return cls(points, trapezoid_weights(points))

    @classmethod
    def uniform(cls, n_points: int, start: float = 0.0, end: float = 1.0) -> "TimeGrid":
        return cls.from_points(np.linspace(start, end, n_points))

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def span(self) -> float:
        return float(self.points[-1] - self.points[0])


def trapezoid_weights(points) -> np.ndarray:
    """Trapezoid-rule weights; they sum to the grid span."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 1 or pts.size < 2:
        raise ValueError("need at least 2 time points")
    gaps = np.diff(pts)
    w = np.zeros_like(pts)
    w[:-1] += gaps / 2.0
    w[1:] += gaps / 2.0
    return w


def integrate_curve(f, grid: TimeGrid, axis: int = 0):
    """Integrate a time-indexed array of values (scalars, vectors or
    matrices) over the grid, entrywise: ``sum_k w_k f(t_k)``."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.shape[axis] != grid.n_points:
        raise ValueError(
            f"curve has {arr.shape[axis]} samples along axis {axis}, "
            f"grid has {grid.n_points} points"
        )
    return np.tensordot(grid.weights, np.moveaxis(arr, axis, 0), axes=(0, 0))


@dataclass(frozen=True)
class FunctionalDataset:
    """n sites, p variables observed at the grid's T time points.

    ``values[i, a, t]`` is variable ``a`` of site ``i`` at time ``t_t``.
    """

    values: np.ndarray
    grid: TimeGrid
    variables: tuple = None

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 3:
            raise ValueError("values must have shape (n_sites, n_vars, n_times)")
        if vals.shape[2] != self.grid.n_points:
            raise ValueError("values and grid disagree on the number of time points")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite (no missing data)")
        object.__setattr__(self, "values", vals)
        variables = self.variables
        if variables is None:
            variables = tuple(f"var{a + 1}" for a in range(vals.shape[1]))
        else:
            variables = tuple(str(v) for v in variables)
            if len(variables) != vals.shape[1]:
                raise ValueError("variable names and values disagree on p")
        object.__setattr__(self, "variables", variables)

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    @property
    def n_times(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class DatasetTotals:
    """Whole-dataset aggregates shared by all windows of one scan.

    total_sum:       S(t) = sum_i X_i(t), shape (p, T)
    cross_moment:    Q(t) = sum_i X_i(t) X_i(t)^T, shape (T, p, p)
    site_sq_int:     per-site integrated outer product, shape (n, p, p)
    site_cross_int:  per-site integral of X_i(t) S(t)^T, shape (n, p, p)
    second_moment:   sum_i of site_sq_int, shape (p, p)
    sum_sq_int:      integral of S(t) S(t)^T, shape (p, p)
    """

    total_sum: np.ndarray
    cross_moment: np.ndarray
    site_sq_int: np.ndarray
    site_cross_int: np.ndarray
    second_moment: np.ndarray
    sum_sq_int: np.ndarray


def dataset_totals(data: FunctionalDataset) -> DatasetTotals:
    x = data.values
    w = data.grid.weights
    total = x.sum(axis=0)
    cross = np.einsum("iat,ibt->tab", x, x, optimize=True)
    site_sq = np.einsum("iat,ibt,t->iab", x, x, w, optimize=True)
    site_cross = np.einsum("iat,bt,t->iab", x, total, w, optimize=True)
    return DatasetTotals(
        total_sum=np.ascontiguousarray(total),
        cross_moment=np.ascontiguousarray(cross),
        site_sq_int=np.ascontiguousarray(site_sq),
        site_cross_int=np.ascontiguousarray(site_cross),
        second_moment=np.ascontiguousarray(site_sq.sum(axis=0)),
        sum_sq_int=np.ascontiguousarray(np.einsum("at,bt,t->ab", total, total, w)),
    )


@dataclass(frozen=True)
class WindowSummaries:
    """Group sizes and per-time group sums for one window, plus shared
    dataset totals.  The complement sum is ``totals.total_sum - sum_in``."""

    window: ScanWindow
    n_sites: int
    size_in: int
    sum_in: np.ndarray  # (p, T)
    totals: DatasetTotals

    @property
    def size_out(self) -> int:
        return self.n_sites - self.size_in

    @property
    def sum_out(self) -> np.ndarray:
        return self.totals.total_sum - self.sum_in


def window_prefix_summaries(data: FunctionalDataset, windows: WindowSet, totals: DatasetTotals = None):
    """Yield ``(window, summaries)`` over a window set.

    Windows are grouped by center and visited in ascending prefix order,
    so each window adds exactly one site curve to a running sum; emitted
    sums are bit-identical to summing the member curves in the center's
    distance-sorted order.
    """
    x = data.values
    n, p, T = x.shape
    if windows.n_sites != n:
        raise ValueError("window set and dataset disagree on the number of sites")
    if totals is None:
        totals = dataset_totals(data)
    acc = np.zeros((p, T))
    current_center = -1
    filled = 0
    for k, win in enumerate(windows):
        center = windows.win_center[k]
        length = int(windows.win_len[k])
        if center != current_center:
            current_center = center
            acc[:] = 0.0
            filled = 0
        while filled < length:
            acc += x[windows.order[center, filled]]
            filled += 1
        yield win, WindowSummaries(
            window=win,
            n_sites=n,
            size_in=length,
            sum_in=acc.copy(),
            totals=totals,
        )
