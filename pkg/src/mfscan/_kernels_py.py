"""Pure-numpy scan kernels.

Fallback backend used when the compiled extension is unavailable (or
explicitly requested via ``MFSCAN_BACKEND=python``).  Function
signatures and semantics match ``mfscan._kernels``; evaluation is
vectorized per center over window prefixes, so it stays usable on real
problem sizes, just slower than the compiled core.

Shared array conventions:
  x / ranks / sign_sums : (n, p, T) C-contiguous float64
  order                 : (n, n) int64 distance-sorted site order per center
  win_center, win_len   : (W,) int64, windows sorted by (center, prefix len)
  perm                  : (n,) int64 site relabeling (identity for observed data)
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def _center_groups(win_center):
    start = 0
    W = win_center.shape[0]
    while start < W:
        end = start + 1
        while end < W and win_center[end] == win_center[start]:
            end += 1
        yield int(win_center[start]), start, end
        start = end


def _rcond_mask(evals, rcond_tol, scale_ref):
    """True where the symmetric matrix with these eigenvalues is usable.

    A matrix is rejected when ill-conditioned or when its largest
    eigenvalue is negligible against ``scale_ref`` (the raw
    second-moment scale the matrix was assembled from — anything below
    rcond_tol of that is cancellation noise).
    """
    lmax = evals[..., -1]
    lmin = evals[..., 0]
    safe = np.where(lmax > 0, lmax, 1.0)
    return (lmax > 0) & (lmin / safe >= rcond_tol) & (lmax >= rcond_tol * scale_ref)


def lh_scan(x, wts, site_sq, site_cross, sum_sq_int, second_moment,
            order, win_center, win_len, perm, rcond_tol, scale_ref):
    """Lawley-Hotelling trace of between/within integrated scatter per window."""
    n, p, T = x.shape
    W = win_center.shape[0]
    vals = np.full(W, np.nan)
    deg = np.zeros(W, dtype=np.uint8)
    gs = sum_sq_int
    eye = np.eye(p)
    for center, start, end in _center_groups(win_center):
        lens = win_len[start:end]
        kmax = int(lens[-1])
        idx = perm[order[center, :kmax]]
        csum = np.cumsum(x[idx], axis=0)
        g_pref = np.einsum("kat,kbt,t->kab", csum, csum, wts, optimize=True)
        k_pref = np.cumsum(site_cross[idx], axis=0)
        sel = lens - 1
        g = g_pref[sel]
        k = k_pref[sel]
        m = lens.astype(np.float64)[:, None, None]
        c = (n - lens).astype(np.float64)[:, None, None]
        g_out = gs - k - k.transpose(0, 2, 1) + g
        between = g / m + g_out / c - gs / n
        within = second_moment - g / m - g_out / c
        evals = np.linalg.eigvalsh(within)
        ok = _rcond_mask(evals, rcond_tol, scale_ref)
        safe = np.where(ok[:, None, None], within, eye)
        trace = np.trace(np.linalg.solve(safe, between), axis1=1, axis2=2)
        vals[start:end] = np.where(ok, trace, np.nan)
        deg[start:end] = ~ok
    return vals, deg


def hotelling_scan(x, total_sum, cross_moment,
                   order, win_center, win_len, perm, rcond_tol, time_scale):
    """Max over time of the pointwise two-sample Hotelling T^2 per window.

    ``time_scale[t]`` anchors the per-time singularity threshold for the
    pooled covariance.
    """
    n, p, T = x.shape
    W = win_center.shape[0]
    vals = np.full(W, np.nan)
    deg = np.zeros(W, dtype=np.uint8)
    eye = np.eye(p)
    for center, start, end in _center_groups(win_center):
        lens = win_len[start:end]
        kmax = int(lens[-1])
        idx = perm[order[center, :kmax]]
        csum = np.cumsum(x[idx], axis=0)
        cw = csum[lens - 1]                      # (K, p, T)
        m = lens.astype(np.float64)
        c = (n - lens).astype(np.float64)
        cc = total_sum[None] - cw
        d = cw / m[:, None, None] - cc / c[:, None, None]
        pooled = (
            cross_moment[None]
            - np.einsum("kat,kbt->ktab", cw, cw, optimize=True) / m[:, None, None, None]
            - np.einsum("kat,kbt->ktab", cc, cc, optimize=True) / c[:, None, None, None]
        ) / (n - 2)
        evals = np.linalg.eigvalsh(pooled)
        ok = _rcond_mask(evals, rcond_tol, time_scale[None, :])   # (K, T)
        safe = np.where(ok[..., None, None], pooled, eye)
        dvec = d.transpose(0, 2, 1)              # (K, T, p)
        sol = np.linalg.solve(safe, dvec[..., None])[..., 0]
        quad = (dvec * sol).sum(axis=-1)
        tn = (m * c / n)[:, None] * quad
        tn = np.where(ok, tn, -np.inf)
        best = tn.max(axis=1)
        usable = ok.any(axis=1)
        vals[start:end] = np.where(usable, best, np.nan)
        deg[start:end] = ~usable
    return vals, deg


def wilcoxon_scan(ranks, rank_total, sq_norm_total,
                  order, win_center, win_len, perm):
    """Max over time of the two-group multivariate rank statistic per window."""
    n, p, T = ranks.shape
    W = win_center.shape[0]
    vals = np.full(W, np.nan)
    deg = np.zeros(W, dtype=np.uint8)
    valid = sq_norm_total > 0
    if not valid.any():
        return vals, np.ones(W, dtype=np.uint8)
    denom = np.where(valid, sq_norm_total, 1.0)
    for center, start, end in _center_groups(win_center):
        lens = win_len[start:end]
        kmax = int(lens[-1])
        idx = perm[order[center, :kmax]]
        usum = np.cumsum(ranks[idx], axis=0)
        uw = usum[lens - 1]
        uc = rank_total[None] - uw
        m = lens.astype(np.float64)
        c = (n - lens).astype(np.float64)
        stat = (p * n / denom)[None] * (
            (uw**2).sum(axis=1) / m[:, None] + (uc**2).sum(axis=1) / c[:, None]
        )
        stat = np.where(valid[None], stat, -np.inf)
        vals[start:end] = stat.max(axis=1)
    return vals, deg


def npfss_scan(sign_sums, wts, order, win_center, win_len, perm, normalized, denom_base):
    """L2 norm of the summed pairwise sign field per window.

    ``normalized`` divides by the exact random-labelling standard
    deviation sqrt(m * c * denom_base) so values are comparable across
    window sizes; ``denom_base`` is sum_k ||D_k||^2 / (n (n-1)).
    """
    n, p, T = sign_sums.shape
    W = win_center.shape[0]
    vals = np.full(W, np.nan)
    deg = np.zeros(W, dtype=np.uint8)
    for center, start, end in _center_groups(win_center):
        lens = win_len[start:end]
        kmax = int(lens[-1])
        idx = perm[order[center, :kmax]]
        usum = np.cumsum(sign_sums[idx], axis=0)
        u = usum[lens - 1]
        nrm2 = np.einsum("kat,kat,t->k", u, u, wts, optimize=True)
        v = np.sqrt(np.maximum(nrm2, 0.0))
        if normalized:
            m = lens.astype(np.float64)
            if denom_base > 0:
                v = v / np.sqrt(m * (n - m) * denom_base)
            else:
                v = np.zeros_like(v)
        vals[start:end] = v
    return vals, deg


def sign_sums(x, wts):
    """Per-site sums of L2-normalized curve differences.

    Returns D with D[i] = sum_k sgn(X_k - X_i) where sgn(f) = f / ||f||
    in L2 of the grid (zero for identical curves).
    """
    n, p, T = x.shape
    diffs = x[None, :, :, :] - x[:, None, :, :]   # diffs[i, k] = X_k - X_i
    nrm2 = np.einsum("ikat,ikat,t->ik", diffs, diffs, wts, optimize=True)
    inv = np.zeros_like(nrm2)
    nz = nrm2 > 0
    inv[nz] = 1.0 / np.sqrt(nrm2[nz])
    return np.ascontiguousarray(np.einsum("ikat,ik->iat", diffs, inv, optimize=True))


def rank_field(pts_sorted, inv_idx, tol, max_iter, rcond_tol):
    """Sphericized spatial-sign ranks at every grid point.

    ``pts_sorted[t]`` holds the n p-vectors observed at time t in a
    canonical (lexicographic) order; ``inv_idx[t, k]`` is the site the
    k-th sorted row belongs to.  Processing in canonical order makes the
    result invariant, bit for bit, to relabeling of the input sites.

    Returns (ranks (n,p,T), transforms (T,p,p), sq_norms (T,),
    residuals (T,), iterations (T,), status (T,) uint8) with status
    0 = ok, 1 = rank-deficient points, 2 = no convergence,
    3 = degenerate rank scatter.
    """
    T, n, p = pts_sorted.shape
    ranks = np.zeros((n, p, T))
    transforms = np.zeros((T, p, p))
    sq_norms = np.zeros(T)
    residuals = np.full(T, np.nan)
    iterations = np.zeros(T, dtype=np.int64)
    status = np.zeros(T, dtype=np.uint8)
    eye = np.eye(p)
    for t in range(T):
        pts = pts_sorted[t]
        centered = pts - pts.mean(axis=0)
        cov = centered.T @ centered / n
        evals, evecs = np.linalg.eigh(cov)
        if evals[-1] <= 0 or evals[0] / evals[-1] < rcond_tol:
            status[t] = 1
            continue
        a = (evecs * evals**-0.5) @ evecs.T
        it = 0
        resid = np.nan
        while True:
            y = pts @ a.T
            diff = y[:, None, :] - y[None, :, :]
            nrm = np.sqrt((diff**2).sum(axis=-1))
            inv = np.zeros_like(nrm)
            nz = nrm > 0
            inv[nz] = 1.0 / nrm[nz]
            r = (diff * inv[..., None]).sum(axis=1) / n
            scatter = r.T @ r
            total_sq = float((r * r).sum())
            scale = total_sq / n
            if scale <= 0:
                status[t] = 3
                break
            shaped = (p / n) * scatter
            resid = float(np.linalg.norm(shaped - scale * eye, "fro") / scale)
            if resid <= tol:
                break
            if it >= max_iter:
                status[t] = 2
                break
            mw, mv = np.linalg.eigh(shaped / scale)
            if mw[0] <= 0:
                status[t] = 3
                break
            a = ((mv * mw**-0.5) @ mv.T) @ a
            it += 1
        residuals[t] = resid
        iterations[t] = it
        if status[t] != 0:
            continue
        det = np.linalg.det(a)
        transforms[t] = a / det ** (1.0 / p)
        ranks[inv_idx[t], :, t] = r
        sq_norms[t] = total_sq
    return ranks, transforms, sq_norms, residuals, iterations, status
