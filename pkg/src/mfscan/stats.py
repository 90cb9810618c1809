"""Concentration indices for circular scan windows.

Four indices over a window w against its complement:

PMFSS   Lawley-Hotelling trace of the integrated between-group scatter
        against the integrated within-group scatter.
MDFFSS  supremum over the grid of the pointwise two-sample Hotelling T^2
        with pooled covariance (divisor n - 2).
MRBFSS  supremum over the grid of a two-group statistic on sphericized
        spatial-sign ranks.
NPFSS   L2 norm of the mean pairwise sign function between the groups.

Each index can be evaluated per window from :class:`WindowSummaries`
(the direct route) or for a whole window family through a scan context
backed by the compiled/numpy kernels (the fast route used by the
permutation machinery).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .fdata import FunctionalDataset, TimeGrid, dataset_totals, integrate_curve
from .geometry import ScanWindow, WindowSet

METHODS = ("PMFSS", "MDFFSS", "MRBFSS", "NPFSS")

#: reciprocal-condition threshold below which a scatter/covariance matrix
#: is treated as singular and the window (or time point) is skipped
RCOND_TOL = 1e-12

TYLER_TOL = 1e-6
TYLER_MAX_ITER = 200


class TylerConvergenceError(RuntimeError):
    """Fixed-point sphericizing iteration failed to reach tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class StatisticValue:
    window: ScanWindow
    method: str
    value: float
    degenerate: bool = False


@dataclass(frozen=True)
class RankField:
    """Per-time sphericizing transforms and spatial-sign ranks.

    ranks[i, :, t] is the multivariate rank of site i at grid point t and
    sq_norm_total[t] = sum_i ranks[i,:,t] . ranks[i,:,t] normalizes the
    rank statistic.  rank_total holds sum_i ranks[i,:,t], which vanishes
    identically by sign antisymmetry (sgn(x - y) = -sgn(y - x), ties give
    zero), so the complement rank sum is exactly the negated window sum.
    """

    transforms: np.ndarray      # (T, p, p)
    ranks: np.ndarray           # (n, p, T)
    sq_norm_total: np.ndarray   # (T,)
    rank_total: np.ndarray      # (p, T)
    residuals: np.ndarray       # (T,)
    iterations: np.ndarray      # (T,)

    @property
    def n_sites(self) -> int:
        return self.ranks.shape[0]


def _sym_rcond_ok(mat, scale_ref=0.0, tol=RCOND_TOL) -> bool:
    """Usability of a PSD scatter/covariance matrix: well conditioned and
    not vanishing against the raw second-moment scale it was formed from
    (anything below tol * scale_ref is cancellation noise)."""
    evals = np.linalg.eigvalsh(mat)
    return bool(
        evals[-1] > 0
        and evals[0] / evals[-1] >= tol
        and evals[-1] >= tol * scale_ref
    )


def lh_statistic(summ, grid: TimeGrid) -> StatisticValue:
    """Lawley-Hotelling trace for one window from its summaries.

    The within-group scatter is assembled algebraically from the
    dataset's integrated second moment and the two group sums, which is
    exactly equivalent to summing per-site deviations.
    """
    t = summ.totals
    w = grid.weights
    m = float(summ.size_in)
    c = float(summ.size_out)
    n = float(summ.n_sites)
    if m < 1 or c < 1:
        raise ValueError("window and complement must both be nonempty")
    cw = summ.sum_in
    cc = summ.sum_out
    g_in = np.einsum("at,bt,t->ab", cw, cw, w)
    g_out = np.einsum("at,bt,t->ab", cc, cc, w)
    between = g_in / m + g_out / c - t.sum_sq_int / n
    within = t.second_moment - g_in / m - g_out / c
    if not _sym_rcond_ok(within, scale_ref=np.trace(t.second_moment) / cw.shape[0]):
        return StatisticValue(summ.window, "PMFSS", np.nan, degenerate=True)
    value = float(np.trace(np.linalg.solve(within, between)))
    return StatisticValue(summ.window, "PMFSS", value)


def hotelling_sup_statistic(summ, data: FunctionalDataset) -> StatisticValue:
    """Supremum over the grid of the pointwise Hotelling T^2 for one window.

    Grid points with a singular pooled covariance are skipped; the
    window is degenerate only if every point is singular.
    """
    t = summ.totals
    n = summ.n_sites
    if n < 3:
        raise ValueError("need n >= 3 for the pooled covariance divisor")
    m = float(summ.size_in)
    c = float(summ.size_out)
    if m < 1 or c < 1:
        raise ValueError("window and complement must both be nonempty")
    cw = summ.sum_in
    cc = summ.sum_out
    p = cw.shape[0]
    d = cw / m - cc / c                                   # (p, T)
    pooled = (
        t.cross_moment
        - np.einsum("at,bt->tab", cw, cw) / m
        - np.einsum("at,bt->tab", cc, cc) / c
    ) / (n - 2)
    time_scale = np.trace(t.cross_moment, axis1=1, axis2=2) / (p * (n - 2))
    evals = np.linalg.eigvalsh(pooled)
    ok = (
        (evals[:, -1] > 0)
        & (evals[:, 0] / np.where(evals[:, -1] > 0, evals[:, -1], 1.0) >= RCOND_TOL)
        & (evals[:, -1] >= RCOND_TOL * time_scale)
    )
    if not ok.any():
        return StatisticValue(summ.window, "MDFFSS", np.nan, degenerate=True)
    dvec = d.T[ok]
    sol = np.linalg.solve(pooled[ok], dvec[..., None])[..., 0]
    quad = (dvec * sol).sum(axis=-1)
    value = float((m * c / n) * quad.max())
    return StatisticValue(summ.window, "MDFFSS", value)


def pointwise_ranks_with_transform(points, transform) -> np.ndarray:
    """Spatial-sign ranks of n p-vectors under a fixed transform."""
    pts = np.asarray(points, dtype=np.float64)
    y = pts @ np.asarray(transform, dtype=np.float64).T
    diff = y[:, None, :] - y[None, :, :]
    nrm = np.sqrt((diff**2).sum(axis=-1))
    inv = np.zeros_like(nrm)
    nz = nrm > 0
    inv[nz] = 1.0 / nrm[nz]
    return (diff * inv[..., None]).sum(axis=1) / pts.shape[0]


def _canonical_order(points):
    pts = np.asarray(points, dtype=np.float64)
    keys = tuple(pts[:, a] for a in reversed(range(pts.shape[1])))
    return np.lexsort(keys)


def tyler_transform(points, tol: float = TYLER_TOL, max_iter: int = TYLER_MAX_ITER,
                    return_info: bool = False):
    """Sphericizing transform for one cloud of p-vectors.

    Fixed-point iteration from the inverse symmetric square root of the
    sample covariance, stopping once the rank scatter is proportional to
    the identity within ``tol`` (Frobenius, relative to the mean squared
    rank norm); the result is normalized to determinant one.  Points are
    processed in a canonical order so the transform does not depend on
    input ordering.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2:
        raise ValueError("points must have shape (n, p)")
    n, p = pts.shape
    if n <= p:
        raise ValueError(f"need more points than dimensions (n={n}, p={p})")
    srt = _canonical_order(pts)
    inv_idx = np.ascontiguousarray(srt[None, :].astype(np.int64))
    sorted_pts = np.ascontiguousarray(pts[srt][None, :, :])
    ranks, transforms, sq_norms, residuals, iterations, status = _core.rank_field(
        sorted_pts, inv_idx, tol, max_iter, RCOND_TOL
    )
    _raise_rank_field_status(status, residuals, where="point cloud")
    if return_info:
        return transforms[0], float(residuals[0]), int(iterations[0])
    return transforms[0]


def _raise_rank_field_status(status, residuals, where):
    bad = np.nonzero(status)[0]
    if bad.size == 0:
        return
    t = int(bad[0])
    code = int(status[t])
    if code == 1:
        raise ValueError(f"rank-deficient {where} (grid index {t})")
    if code == 2:
        raise TylerConvergenceError(
            f"sphericizing iteration did not converge at grid index {t} "
            f"(residual {residuals[t]:.3e})",
            residual=float(residuals[t]),
        )
    raise ValueError(f"degenerate rank scatter in {where} (grid index {t})")


def compute_pointwise_ranks(data: FunctionalDataset, tol: float = TYLER_TOL,
                            max_iter: int = TYLER_MAX_ITER) -> RankField:
    """Sphericized spatial-sign ranks at every grid point.

    Shuffling the sites of ``data`` yields the identically shuffled rank
    field, exactly: each grid point is processed in a canonical order of
    the observed p-vectors, independent of site labels.  Permutation
    studies therefore compute ranks once and index-permute them.
    """
    x = data.values
    n, p, T = x.shape
    if n <= p:
        raise ValueError(f"need more sites than variables (n={n}, p={p})")
    pts_sorted = np.empty((T, n, p))
    inv_idx = np.empty((T, n), dtype=np.int64)
    for t in range(T):
        pts = np.ascontiguousarray(x[:, :, t])
        srt = _canonical_order(pts)
        pts_sorted[t] = pts[srt]
        inv_idx[t] = srt
    ranks, transforms, sq_norms, residuals, iterations, status = _core.rank_field(
        np.ascontiguousarray(pts_sorted), np.ascontiguousarray(inv_idx),
        tol, max_iter, RCOND_TOL,
    )
    _raise_rank_field_status(status, residuals, where="site values")
    return RankField(
        transforms=transforms,
        ranks=ranks,
        sq_norm_total=sq_norms,
        rank_total=np.zeros((p, T)),
        residuals=residuals,
        iterations=iterations,
    )


def wilcoxon_sup_statistic(ranks: RankField, window: ScanWindow) -> StatisticValue:
    """Supremum over the grid of the two-group rank statistic for one window."""
    r = ranks.ranks
    n, p, T = r.shape
    members = np.asarray(window.members, dtype=np.intp)
    m = members.size
    c = n - m
    if m < 1 or c < 1:
        raise ValueError("window and complement must both be nonempty")
    uw = r[members].sum(axis=0)
    uc = ranks.rank_total - uw
    valid = ranks.sq_norm_total > 0
    if not valid.any():
        return StatisticValue(window, "MRBFSS", np.nan, degenerate=True)
    denom = np.where(valid, ranks.sq_norm_total, 1.0)
    stat = (p * n / denom) * ((uw**2).sum(axis=0) / m + (uc**2).sum(axis=0) / c)
    value = float(np.where(valid, stat, -np.inf).max())
    return StatisticValue(window, "MRBFSS", value)


def pairwise_sign_field(data: FunctionalDataset) -> np.ndarray:
    """Per-site sums of L2-normalized curve differences (computed once,
    then index-permuted across a permutation study)."""
    return _core.sign_sums(data.values, data.grid.weights)


def sign_field_norm_base(sign_field, grid: TimeGrid) -> float:
    """sum_k ||D_k||^2 / (n (n-1)): the per-pair scale of the sign field,
    shared by every window of a scan."""
    n = sign_field.shape[0]
    sq = float(np.einsum("kat,kat,t->", sign_field, sign_field, grid.weights))
    return sq / (n * (n - 1))


def npfss_statistic(data: FunctionalDataset, window: ScanWindow,
                    sign_field=None, normalized: bool = True) -> StatisticValue:
    """Standardized norm of the summed pairwise sign field over a window.

    The double sum of sgn(X_out - X_in) over (inside, outside) pairs
    collapses to the sum of the precomputed per-site fields over the
    window, because same-group pairs cancel by antisymmetry.  The norm
    is divided by its exact random-labelling standard deviation
    sqrt(m c / (n (n-1)) * sum_k ||D_k||^2) so windows of different
    sizes are comparable; ``normalized=False`` returns the raw sum norm
    for cross-checking.
    """
    n = data.n_sites
    members = np.asarray(window.members, dtype=np.intp)
    m = members.size
    c = n - m
    if m < 1 or c < 1:
        raise ValueError("window and complement must both be nonempty")
    if sign_field is None:
        sign_field = pairwise_sign_field(data)
    u = sign_field[members].sum(axis=0)
    value = float(np.sqrt(max(integrate_curve((u**2).sum(axis=0), data.grid, axis=0), 0.0)))
    if normalized:
        base = sign_field_norm_base(sign_field, data.grid)
        value = value / np.sqrt(m * c * base) if base > 0 else 0.0
    return StatisticValue(window, "NPFSS", value)


class ScanContext:
    """Per-method precomputations enabling fast whole-family evaluation
    under site relabelings (one kernel call per permutation)."""

    def __init__(self, method, data, windows, rank_field=None, sign_field=None,
                 tyler_tol=TYLER_TOL, tyler_max_iter=TYLER_MAX_ITER):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        if len(windows) == 0:
            raise ValueError("window set is empty")
        if windows.n_sites != data.n_sites:
            raise ValueError("window set and dataset disagree on the number of sites")
        self.method = method
        self.windows = windows
        self.n_sites = data.n_sites
        self._grid = data.grid
        x = data.values
        if method == "PMFSS":
            totals = dataset_totals(data)
            self._scale = float(np.trace(totals.second_moment)) / data.n_vars
            self._args = (
                x, data.grid.weights, totals.site_sq_int, totals.site_cross_int,
                totals.sum_sq_int, totals.second_moment,
            )
        elif method == "MDFFSS":
            if data.n_sites < 3:
                raise ValueError("need n >= 3 for the pooled covariance divisor")
            totals = dataset_totals(data)
            self._scale = np.ascontiguousarray(
                np.trace(totals.cross_moment, axis1=1, axis2=2)
                / (data.n_vars * (data.n_sites - 2))
            )
            self._args = (x, totals.total_sum, totals.cross_moment)
        elif method == "MRBFSS":
            if rank_field is None:
                rank_field = compute_pointwise_ranks(data, tol=tyler_tol, max_iter=tyler_max_iter)
            self.rank_field = rank_field
            self._args = (
                np.ascontiguousarray(rank_field.ranks),
                np.ascontiguousarray(rank_field.rank_total),
                np.ascontiguousarray(rank_field.sq_norm_total),
            )
        else:  # NPFSS
            if sign_field is None:
                sign_field = pairwise_sign_field(data)
            self.sign_field = sign_field
            self._args = (
                np.ascontiguousarray(sign_field), data.grid.weights,
                sign_field_norm_base(sign_field, data.grid),
            )
        self._identity = np.arange(self.n_sites, dtype=np.int64)

    def values(self, perm=None):
        """Per-window statistic values and degeneracy flags, aligned with
        the window set order.  ``perm`` relabels sites: the curve used at
        site s is the input curve perm[s]."""
        if perm is None:
            perm = self._identity
        else:
            perm = np.ascontiguousarray(np.asarray(perm, dtype=np.int64))
        w = self.windows
        if self.method == "PMFSS":
            return _core.lh_scan(*self._args, w.order, w.win_center, w.win_len, perm,
                                 RCOND_TOL, self._scale)
        if self.method == "MDFFSS":
            return _core.hotelling_scan(*self._args, w.order, w.win_center, w.win_len, perm,
                                        RCOND_TOL, self._scale)
        if self.method == "MRBFSS":
            return _core.wilcoxon_scan(*self._args, w.order, w.win_center, w.win_len, perm)
        signs, wts, base = self._args
        return _core.npfss_scan(signs, wts, w.order, w.win_center, w.win_len, perm, True, base)


def select_mlc(windows: WindowSet, vals, deg):
    """Index of the maximal non-degenerate window; ties go to the
    smallest window, then the lowest center index."""
    vals = np.asarray(vals)
    usable = ~np.asarray(deg, dtype=bool) & np.isfinite(vals)
    if not usable.any():
        raise ValueError("all windows degenerate")
    lam = vals[usable].max()
    best = None
    for k in np.nonzero(usable & (vals == lam))[0]:
        key = (windows[k].size, windows[k].center_index)
        if best is None or key < best[0]:
            best = (key, int(k))
    return best[1], float(lam)


def scan_all_windows(data: FunctionalDataset, windows: WindowSet, method: str,
                     context: ScanContext = None):
    """Evaluate one concentration index over every window.

    Returns ``(mlc_window, lam, values)`` where ``values`` is the list of
    per-window :class:`StatisticValue` in window-set order and ``lam`` is
    the maximum over non-degenerate windows.
    """
    if context is None:
        context = ScanContext(method, data, windows)
    vals, deg = context.values()
    k, lam = select_mlc(windows, vals, deg)
    stat_values = [
        StatisticValue(win, method, float(vals[i]), bool(deg[i]))
        for i, win in enumerate(windows)
    ]
    return windows[k], lam, stat_values
