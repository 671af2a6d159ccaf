# cython: language_level=3
"""Compiled versions of the hot kernels.

Mirrors ``_kernels_py`` function for function.  The inner loops run without
the GIL so independent calls from worker threads proceed in parallel.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef double PIVMIN = 1e-290
cdef double EPS = 2.220446049250313e-16


cdef double _offnorm(double[:, ::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], i, j
    cdef double s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += a[i, j] * a[i, j]
    return sqrt(s)


def jacobi_eigh(a_in, double tol, int max_sweeps):
    """Cyclic Jacobi rotations; returns ``(w, v, converged)`` unsorted."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double total = 0.0, apq, g, theta, t, c, s, x, y
    cdef bint converged = False
    for p in range(n):
        for q in range(n):
            total += a[p, q] * a[p, q]
    total = sqrt(total)
    if n == 1 or total == 0.0:
        return np.diag(a_arr).copy(), v_arr, True
    with nogil:
        for sweep in range(max_sweeps):
            if _offnorm(a) <= tol * total:
                converged = True
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    g = 100.0 * fabs(apq)
                    if fabs(a[p, p]) + g == fabs(a[p, p]) and fabs(a[q, q]) + g == fabs(a[q, q]):
                        # negligible against both diagonal entries
                        a[p, q] = 0.0
                        a[q, p] = 0.0
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                        if theta < 0.0:
                            t = -t
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = c * x - s * y
                        a[k, q] = s * x + c * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = c * x - s * y
                        a[q, k] = s * x + c * y
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = c * x - s * y
                        v[k, q] = s * x + c * y
        if not converged:
            converged = _offnorm(a) <= tol * total
    return np.diag(a_arr).copy(), v_arr, bool(converged)


def jacobi_svd(a_in, double tol, int max_sweeps):
    """One-sided Jacobi singular values; returns ``(sv, converged)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] src = np.asarray(a_in, dtype=np.float64)
    if src.shape[1] > src.shape[0]:
        src = src.T
    # columns stored as rows for contiguous access
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u_arr = np.array(src.T, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] u = u_arr
    cdef Py_ssize_t n = u.shape[0], m = u.shape[1], p, q, k
    cdef int sweep
    cdef double alpha, beta, gamma, zeta, t, c, s, x, y
    cdef bint rotated, converged = False
    # columns below this squared norm are round-off and carry no rank
    cdef double floor = (EPS * float(np.linalg.norm(u_arr))) ** 2
    with nogil:
        for sweep in range(max_sweeps):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    alpha = 0.0
                    beta = 0.0
                    gamma = 0.0
                    for k in range(m):
                        alpha += u[p, k] * u[p, k]
                        beta += u[q, k] * u[q, k]
                        gamma += u[p, k] * u[q, k]
                    if alpha <= floor or beta <= floor:
                        continue
                    if gamma == 0.0 or fabs(gamma) <= tol * sqrt(alpha * beta):
                        continue
                    rotated = True
                    zeta = (beta - alpha) / (2.0 * gamma)
                    t = 1.0 / (fabs(zeta) + sqrt(1.0 + zeta * zeta))
                    if zeta < 0.0:
                        t = -t
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = c * t
                    for k in range(m):
                        x = u[p, k]
                        y = u[q, k]
                        u[p, k] = c * x - s * y
                        u[q, k] = s * x + c * y
            if not rotated:
                converged = True
                break
    return np.sqrt(np.sum(u_arr * u_arr, axis=1)), bool(converged)


cdef Py_ssize_t _sturm_count(double[::1] d, double[::1] e2, double x) noexcept nogil:
    cdef Py_ssize_t i, n = d.shape[0], count = 0
    cdef double q = d[0] - x
    if fabs(q) < PIVMIN:
        q = -PIVMIN
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if fabs(q) < PIVMIN:
            q = -PIVMIN
        if q < 0.0:
            count += 1
    return count


def tridiag_lowest(d_in, e_in, Py_ssize_t k):
    """Lowest ``k`` eigenvalues of a symmetric tridiagonal matrix by bisection."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d_arr = np.ascontiguousarray(d_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e_arr = np.ascontiguousarray(e_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e2_arr = e_arr * e_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(k)
    cdef double[::1] d = d_arr
    cdef double[::1] e2 = e2_arr
    cdef double[::1] res = out
    cdef Py_ssize_t n = d.shape[0], i, j
    cdef double glo, ghi, r, lo, hi, mid, floor_lo
    cdef int it
    glo = d[0]
    ghi = d[0]
    for i in range(n):
        r = 0.0
        if i > 0:
            r += fabs(e_arr[i - 1])
        if i < n - 1:
            r += fabs(e_arr[i])
        if d[i] - r < glo:
            glo = d[i] - r
        if d[i] + r > ghi:
            ghi = d[i] + r
    floor_lo = glo
    with nogil:
        for j in range(k):
            lo = floor_lo
            hi = ghi
            for it in range(2200):
                if hi - lo <= 2.0 * EPS * max(fabs(lo), fabs(hi)) + PIVMIN:
                    break
                mid = 0.5 * (lo + hi)
                if _sturm_count(d, e2, mid) > j:
                    hi = mid
                else:
                    lo = mid
            res[j] = 0.5 * (lo + hi)
            floor_lo = lo
    return out
