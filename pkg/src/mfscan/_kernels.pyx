# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scan kernels.

Same contracts as ``mfscan._kernels_py``; every window family is swept
in C with incremental prefix accumulators, and the heavy loops release
the GIL so permutation replicates can run on a thread pool.  Small
symmetric eigenproblems (p x p scatter/covariance blocks) use a cyclic
Jacobi sweep, which is exact enough at these sizes and keeps the
extension free of external linear-algebra linkage.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, fabs, pow, sqrt

COMPILED = True

ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8


cdef void _jacobi(double* a, double* v, double* d, int p) noexcept nogil:
    """Eigen-decomposition of the symmetric p x p matrix ``a`` (row major,
    destroyed).  Columns of ``v`` receive eigenvectors, ``d`` the
    (unsorted) eigenvalues."""
    cdef int i, j, k, sweep
    cdef double off, base, theta, t, c, s, tau, h, aik, ajk, vki, vkj, apq
    for i in range(p):
        for j in range(p):
            v[i * p + j] = 1.0 if i == j else 0.0
    if p == 1:
        d[0] = a[0]
        return
    for sweep in range(64):
        off = 0.0
        base = 0.0
        for i in range(p):
            base += a[i * p + i] * a[i * p + i]
            for j in range(i + 1, p):
                off += a[i * p + j] * a[i * p + j]
        if off <= 1e-30 * (base + off) or off == 0.0:
            break
        for i in range(p):
            for j in range(i + 1, p):
                apq = a[i * p + j]
                if apq == 0.0:
                    continue
                theta = 0.5 * (a[j * p + j] - a[i * p + i]) / apq
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                h = t * apq
                a[i * p + i] -= h
                a[j * p + j] += h
                a[i * p + j] = 0.0
                a[j * p + i] = 0.0
                for k in range(p):
                    if k == i or k == j:
                        continue
                    aik = a[i * p + k]
                    ajk = a[j * p + k]
                    a[i * p + k] = aik - s * (ajk + tau * aik)
                    a[k * p + i] = a[i * p + k]
                    a[j * p + k] = ajk + s * (aik - tau * ajk)
                    a[k * p + j] = a[j * p + k]
                for k in range(p):
                    vki = v[k * p + i]
                    vkj = v[k * p + j]
                    v[k * p + i] = vki - s * (vkj + tau * vki)
                    v[k * p + j] = vkj + s * (vki - tau * vkj)
    for i in range(p):
        d[i] = a[i * p + i]


cdef inline double _eig_min(double* d, int p) noexcept nogil:
    cdef int k
    cdef double m = d[0]
    for k in range(1, p):
        if d[k] < m:
            m = d[k]
    return m


cdef inline double _eig_max(double* d, int p) noexcept nogil:
    cdef int k
    cdef double m = d[0]
    for k in range(1, p):
        if d[k] > m:
            m = d[k]
    return m


cdef double _det(double* a, int p) noexcept nogil:
    """Determinant by Gaussian elimination with partial pivoting
    (``a`` destroyed)."""
    cdef int i, j, k, piv
    cdef double det = 1.0, mx, f, tmp
    for k in range(p):
        piv = k
        mx = fabs(a[k * p + k])
        for i in range(k + 1, p):
            if fabs(a[i * p + k]) > mx:
                mx = fabs(a[i * p + k])
                piv = i
        if mx == 0.0:
            return 0.0
        if piv != k:
            for j in range(p):
                tmp = a[k * p + j]
                a[k * p + j] = a[piv * p + j]
                a[piv * p + j] = tmp
            det = -det
        det *= a[k * p + k]
        for i in range(k + 1, p):
            f = a[i * p + k] / a[k * p + k]
            for j in range(k, p):
                a[i * p + j] -= f * a[k * p + j]
    return det


def lh_scan(double[:, :, ::1] x, double[::1] wts,
            double[:, :, ::1] site_sq, double[:, :, ::1] site_cross,
            double[:, ::1] sum_sq_int, double[:, ::1] second_moment,
            i64[:, ::1] order, i64[::1] win_center, i64[::1] win_len,
            i64[::1] perm, double rcond_tol, double scale_ref):
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], T = x.shape[2]
    cdef Py_ssize_t W = win_center.shape[0]
    vals_arr = np.full(W, np.nan)
    deg_arr = np.zeros(W, dtype=np.uint8)
    cdef double[::1] vals = vals_arr
    cdef u8[::1] deg = deg_arr
    work = np.zeros((p, T))
    gwork = np.zeros((6, p, p))
    ework = np.zeros(p)
    cdef double[:, ::1] C = work
    cdef double[:, :, ::1] gw = gwork
    cdef double[::1] evals = ework
    cdef double* G
    cdef double* K
    cdef double* cross
    cdef double* Hm
    cdef double* Em
    cdef double* evec
    cdef Py_ssize_t w = 0, center, filled, L, j, a, b, t, k
    cdef double acc, m, c2, gc, lam_min, lam_max, tr, q, ha
    with nogil:
        G = &gw[0, 0, 0]
        K = &gw[1, 0, 0]
        cross = &gw[2, 0, 0]
        Hm = &gw[3, 0, 0]
        Em = &gw[4, 0, 0]
        evec = &gw[5, 0, 0]
        while w < W:
            center = win_center[w]
            for a in range(p):
                for t in range(T):
                    C[a, t] = 0.0
                for b in range(p):
                    G[a * p + b] = 0.0
                    K[a * p + b] = 0.0
            filled = 0
            while w < W and win_center[w] == center:
                L = win_len[w]
                while filled < L:
                    j = perm[order[center, filled]]
                    for a in range(p):
                        for b in range(p):
                            acc = 0.0
                            for t in range(T):
                                acc += wts[t] * C[a, t] * x[j, b, t]
                            cross[a * p + b] = acc
                    for a in range(p):
                        for b in range(p):
                            G[a * p + b] += cross[a * p + b] + cross[b * p + a] + site_sq[j, a, b]
                            K[a * p + b] += site_cross[j, a, b]
                        for t in range(T):
                            C[a, t] += x[j, a, t]
                    filled += 1
                m = <double>L
                c2 = <double>(n - L)
                for a in range(p):
                    for b in range(p):
                        gc = sum_sq_int[a, b] - K[a * p + b] - K[b * p + a] + G[a * p + b]
                        Hm[a * p + b] = G[a * p + b] / m + gc / c2 - sum_sq_int[a, b] / n
                        Em[a * p + b] = second_moment[a, b] - G[a * p + b] / m - gc / c2
                _jacobi(Em, evec, &evals[0], <int>p)
                lam_min = _eig_min(&evals[0], <int>p)
                lam_max = _eig_max(&evals[0], <int>p)
                if lam_max <= 0.0 or lam_min / lam_max < rcond_tol or lam_max < rcond_tol * scale_ref:
                    deg[w] = 1
                    vals[w] = NAN
                else:
                    tr = 0.0
                    for k in range(p):
                        q = 0.0
                        for a in range(p):
                            ha = 0.0
                            for b in range(p):
                                ha += Hm[a * p + b] * evec[b * p + k]
                            q += evec[a * p + k] * ha
                        tr += q / evals[k]
                    vals[w] = tr
                w += 1
    return vals_arr, deg_arr


def hotelling_scan(double[:, :, ::1] x, double[:, ::1] total_sum,
                   double[:, :, ::1] cross_moment,
                   i64[:, ::1] order, i64[::1] win_center, i64[::1] win_len,
                   i64[::1] perm, double rcond_tol, double[::1] time_scale):
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], T = x.shape[2]
    cdef Py_ssize_t W = win_center.shape[0]
    vals_arr = np.full(W, np.nan)
    deg_arr = np.zeros(W, dtype=np.uint8)
    cdef double[::1] vals = vals_arr
    cdef u8[::1] deg = deg_arr
    work = np.zeros((p, T))
    mats = np.zeros((2, p, p))
    vecs = np.zeros((3, p))
    cdef double[:, ::1] C = work
    cdef double[:, :, ::1] mw = mats
    cdef double[:, ::1] vw = vecs
    cdef double* V
    cdef double* evec
    cdef double* d
    cdef double* cc
    cdef double* evals
    cdef Py_ssize_t w = 0, center, filled, L, j, a, b, t, k
    cdef double m, c2, lam_min, lam_max, q, proj, best, scale
    cdef double v00, v01, v11, tr, gap, det, d0, d1, cc0, cc1
    cdef bint any_ok
    with nogil:
        V = &mw[0, 0, 0]
        evec = &mw[1, 0, 0]
        d = &vw[0, 0]
        cc = &vw[1, 0]
        evals = &vw[2, 0]
        while w < W:
            center = win_center[w]
            for a in range(p):
                for t in range(T):
                    C[a, t] = 0.0
            filled = 0
            while w < W and win_center[w] == center:
                L = win_len[w]
                while filled < L:
                    j = perm[order[center, filled]]
                    for a in range(p):
                        for t in range(T):
                            C[a, t] += x[j, a, t]
                    filled += 1
                m = <double>L
                c2 = <double>(n - L)
                scale = m * c2 / n
                best = -INFINITY
                any_ok = False
                if p == 2:
                    # closed-form 2x2 eigenvalues and inverse
                    inv_m = 1.0 / m
                    inv_c = 1.0 / c2
                    inv_n2 = 1.0 / (n - 2)
                    for t in range(T):
                        cc0 = total_sum[0, t] - C[0, t]
                        cc1 = total_sum[1, t] - C[1, t]
                        d0 = C[0, t] * inv_m - cc0 * inv_c
                        d1 = C[1, t] * inv_m - cc1 * inv_c
                        v00 = (cross_moment[t, 0, 0] - C[0, t] * C[0, t] * inv_m - cc0 * cc0 * inv_c) * inv_n2
                        v01 = (cross_moment[t, 0, 1] - C[0, t] * C[1, t] * inv_m - cc0 * cc1 * inv_c) * inv_n2
                        v11 = (cross_moment[t, 1, 1] - C[1, t] * C[1, t] * inv_m - cc1 * cc1 * inv_c) * inv_n2
                        tr = v00 + v11
                        gap = sqrt((v00 - v11) * (v00 - v11) + 4.0 * v01 * v01)
                        lam_max = 0.5 * (tr + gap)
                        lam_min = 0.5 * (tr - gap)
                        if lam_max <= 0.0 or lam_min < rcond_tol * lam_max or lam_max < rcond_tol * time_scale[t]:
                            continue
                        det = v00 * v11 - v01 * v01
                        q = (v11 * d0 * d0 - 2.0 * v01 * d0 * d1 + v00 * d1 * d1) / det
                        any_ok = True
                        if scale * q > best:
                            best = scale * q
                else:
                    for t in range(T):
                        for a in range(p):
                            cc[a] = total_sum[a, t] - C[a, t]
                            d[a] = C[a, t] / m - cc[a] / c2
                        for a in range(p):
                            for b in range(p):
                                V[a * p + b] = (cross_moment[t, a, b]
                                                - C[a, t] * C[b, t] / m
                                                - cc[a] * cc[b] / c2) / (n - 2)
                        _jacobi(V, evec, evals, <int>p)
                        lam_min = _eig_min(evals, <int>p)
                        lam_max = _eig_max(evals, <int>p)
                        if lam_max <= 0.0 or lam_min / lam_max < rcond_tol or lam_max < rcond_tol * time_scale[t]:
                            continue
                        q = 0.0
                        for k in range(p):
                            proj = 0.0
                            for a in range(p):
                                proj += evec[a * p + k] * d[a]
                            q += proj * proj / evals[k]
                        any_ok = True
                        if scale * q > best:
                            best = scale * q
                if any_ok:
                    vals[w] = best
                else:
                    deg[w] = 1
                    vals[w] = NAN
                w += 1
    return vals_arr, deg_arr


def wilcoxon_scan(double[:, :, ::1] ranks, double[:, ::1] rank_total,
                  double[::1] sq_norm_total,
                  i64[:, ::1] order, i64[::1] win_center, i64[::1] win_len,
                  i64[::1] perm):
    cdef Py_ssize_t n = ranks.shape[0], p = ranks.shape[1], T = ranks.shape[2]
    cdef Py_ssize_t W = win_center.shape[0]
    vals_arr = np.full(W, np.nan)
    deg_arr = np.zeros(W, dtype=np.uint8)
    if not np.any(np.asarray(sq_norm_total) > 0):
        deg_arr[:] = 1
        return vals_arr, deg_arr
    cdef double[::1] vals = vals_arr
    cdef u8[::1] deg = deg_arr
    work = np.zeros((p, T))
    cdef double[:, ::1] U = work
    cdef Py_ssize_t w = 0, center, filled, L, j, a, t
    cdef double m, c2, uw2, uc2, uca, stat, best
    with nogil:
        while w < W:
            center = win_center[w]
            for a in range(p):
                for t in range(T):
                    U[a, t] = 0.0
            filled = 0
            while w < W and win_center[w] == center:
                L = win_len[w]
                while filled < L:
                    j = perm[order[center, filled]]
                    for a in range(p):
                        for t in range(T):
                            U[a, t] += ranks[j, a, t]
                    filled += 1
                m = <double>L
                c2 = <double>(n - L)
                best = -INFINITY
                for t in range(T):
                    if sq_norm_total[t] <= 0.0:
                        continue
                    uw2 = 0.0
                    uc2 = 0.0
                    for a in range(p):
                        uw2 += U[a, t] * U[a, t]
                        uca = rank_total[a, t] - U[a, t]
                        uc2 += uca * uca
                    stat = (p * n / sq_norm_total[t]) * (uw2 / m + uc2 / c2)
                    if stat > best:
                        best = stat
                vals[w] = best
                w += 1
    return vals_arr, deg_arr


def npfss_scan(double[:, :, ::1] sign_sums, double[::1] wts,
               i64[:, ::1] order, i64[::1] win_center, i64[::1] win_len,
               i64[::1] perm, bint normalized, double denom_base):
    cdef Py_ssize_t n = sign_sums.shape[0], p = sign_sums.shape[1], T = sign_sums.shape[2]
    cdef Py_ssize_t W = win_center.shape[0]
    vals_arr = np.full(W, np.nan)
    deg_arr = np.zeros(W, dtype=np.uint8)
    cdef double[::1] vals = vals_arr
    work = np.zeros((p, T))
    cdef double[:, ::1] U = work
    cdef Py_ssize_t w = 0, center, filled, L, j, a, t
    cdef double m, nrm2, rowsq, v
    with nogil:
        while w < W:
            center = win_center[w]
            for a in range(p):
                for t in range(T):
                    U[a, t] = 0.0
            filled = 0
            while w < W and win_center[w] == center:
                L = win_len[w]
                while filled < L:
                    j = perm[order[center, filled]]
                    for a in range(p):
                        for t in range(T):
                            U[a, t] += sign_sums[j, a, t]
                    filled += 1
                nrm2 = 0.0
                for t in range(T):
                    rowsq = 0.0
                    for a in range(p):
                        rowsq += U[a, t] * U[a, t]
                    nrm2 += wts[t] * rowsq
                v = sqrt(nrm2) if nrm2 > 0.0 else 0.0
                if normalized:
                    if denom_base > 0.0:
                        m = <double>L
                        v /= sqrt(m * (n - L) * denom_base)
                    else:
                        v = 0.0
                vals[w] = v
                w += 1
    return vals_arr, deg_arr


def sign_sums(double[:, :, ::1] x, double[::1] wts):
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], T = x.shape[2]
    out = np.zeros((n, p, T))
    cdef double[:, :, ::1] D = out
    cdef Py_ssize_t i, j, a, t
    cdef double nrm2, diff, inv, g
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                nrm2 = 0.0
                for a in range(p):
                    for t in range(T):
                        diff = x[j, a, t] - x[i, a, t]
                        nrm2 += wts[t] * diff * diff
                if nrm2 > 0.0:
                    inv = 1.0 / sqrt(nrm2)
                    for a in range(p):
                        for t in range(T):
                            g = (x[j, a, t] - x[i, a, t]) * inv
                            D[i, a, t] += g
                            D[j, a, t] -= g
    return out


def rank_field(double[:, :, ::1] pts_sorted, i64[:, ::1] inv_idx,
               double tol, int max_iter, double rcond_tol):
    cdef Py_ssize_t T = pts_sorted.shape[0], n = pts_sorted.shape[1], p = pts_sorted.shape[2]
    ranks_arr = np.zeros((n, p, T))
    transforms_arr = np.zeros((T, p, p))
    sq_norms_arr = np.zeros(T)
    residuals_arr = np.full(T, np.nan)
    iterations_arr = np.zeros(T, dtype=np.int64)
    status_arr = np.zeros(T, dtype=np.uint8)
    cdef double[:, :, ::1] ranks = ranks_arr
    cdef double[:, :, ::1] transforms = transforms_arr
    cdef double[::1] sq_norms = sq_norms_arr
    cdef double[::1] residuals = residuals_arr
    cdef i64[::1] iterations = iterations_arr
    cdef u8[::1] status = status_arr
    ywork = np.zeros((n, p))
    rwork = np.zeros((n, p))
    mats = np.zeros((5, p, p))
    vecs = np.zeros((2, p))
    cdef double[:, ::1] y = ywork
    cdef double[:, ::1] r = rwork
    cdef double[:, :, ::1] mw = mats
    cdef double[:, ::1] vw = vecs
    cdef double* cov
    cdef double* A
    cdef double* evec
    cdef double* tmp
    cdef double* nextA
    cdef double* mean
    cdef double* evals
    cdef Py_ssize_t t, i, j, a, b, k, site
    cdef int it
    cdef double nrm2, diff, inv, u, total_sq, scale, resid, acc
    cdef double lam_min, lam_max, det, dscale
    with nogil:
        cov = &mw[0, 0, 0]
        A = &mw[1, 0, 0]
        evec = &mw[2, 0, 0]
        tmp = &mw[3, 0, 0]
        nextA = &mw[4, 0, 0]
        mean = &vw[0, 0]
        evals = &vw[1, 0]
        for t in range(T):
            for a in range(p):
                mean[a] = 0.0
                for i in range(n):
                    mean[a] += pts_sorted[t, i, a]
                mean[a] /= n
            for a in range(p):
                for b in range(p):
                    acc = 0.0
                    for i in range(n):
                        acc += (pts_sorted[t, i, a] - mean[a]) * (pts_sorted[t, i, b] - mean[b])
                    cov[a * p + b] = acc / n
            _jacobi(cov, evec, evals, <int>p)
            lam_min = _eig_min(evals, <int>p)
            lam_max = _eig_max(evals, <int>p)
            if lam_max <= 0.0 or lam_min / lam_max < rcond_tol:
                status[t] = 1
                continue
            for a in range(p):
                for b in range(p):
                    acc = 0.0
                    for k in range(p):
                        acc += evec[a * p + k] * evec[b * p + k] / sqrt(evals[k])
                    A[a * p + b] = acc
            it = 0
            resid = NAN
            total_sq = 0.0
            while True:
                for i in range(n):
                    for a in range(p):
                        acc = 0.0
                        for b in range(p):
                            acc += A[a * p + b] * pts_sorted[t, i, b]
                        y[i, a] = acc
                for i in range(n):
                    for a in range(p):
                        r[i, a] = 0.0
                for i in range(n):
                    for j in range(i + 1, n):
                        nrm2 = 0.0
                        for a in range(p):
                            diff = y[i, a] - y[j, a]
                            nrm2 += diff * diff
                        if nrm2 > 0.0:
                            inv = 1.0 / sqrt(nrm2)
                            for a in range(p):
                                u = (y[i, a] - y[j, a]) * inv
                                r[i, a] += u
                                r[j, a] -= u
                for i in range(n):
                    for a in range(p):
                        r[i, a] /= n
                # rank scatter and its deviation from sphericity
                total_sq = 0.0
                for i in range(n):
                    for a in range(p):
                        total_sq += r[i, a] * r[i, a]
                scale = total_sq / n
                if scale <= 0.0:
                    status[t] = 3
                    break
                for a in range(p):
                    for b in range(p):
                        acc = 0.0
                        for i in range(n):
                            acc += r[i, a] * r[i, b]
                        cov[a * p + b] = acc * p / n
                resid = 0.0
                for a in range(p):
                    for b in range(p):
                        diff = cov[a * p + b] - (scale if a == b else 0.0)
                        resid += diff * diff
                resid = sqrt(resid) / scale
                if resid <= tol:
                    break
                if it >= max_iter:
                    status[t] = 2
                    break
                for a in range(p):
                    for b in range(p):
                        cov[a * p + b] /= scale
                _jacobi(cov, evec, evals, <int>p)
                if _eig_min(evals, <int>p) <= 0.0:
                    status[t] = 3
                    break
                for a in range(p):
                    for b in range(p):
                        acc = 0.0
                        for k in range(p):
                            acc += evec[a * p + k] * evec[b * p + k] / sqrt(evals[k])
                        tmp[a * p + b] = acc
                for a in range(p):
                    for b in range(p):
                        acc = 0.0
                        for k in range(p):
                            acc += tmp[a * p + k] * A[k * p + b]
                        nextA[a * p + b] = acc
                for a in range(p):
                    for b in range(p):
                        A[a * p + b] = nextA[a * p + b]
                it += 1
            residuals[t] = resid
            iterations[t] = it
            if status[t] != 0:
                continue
            for a in range(p):
                for b in range(p):
                    tmp[a * p + b] = A[a * p + b]
            det = _det(tmp, <int>p)
            dscale = pow(det, 1.0 / p)
            for a in range(p):
                for b in range(p):
                    transforms[t, a, b] = A[a * p + b] / dscale
            for k in range(n):
                site = inv_idx[t, k]
                for a in range(p):
                    ranks[site, a, t] = r[k, a]
            sq_norms[t] = total_sq
    return ranks_arr, transforms_arr, sq_norms_arr, residuals_arr, iterations_arr, status_arr
