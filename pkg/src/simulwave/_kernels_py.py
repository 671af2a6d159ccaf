"""Pure-Python (numpy) versions of the hot kernels.

Same algorithms and signatures as the compiled ``_kernels`` module.  Used when
the extension is unavailable or ``SIMULWAVE_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np

_PIVMIN = 1e-290


def _offnorm(a):
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def jacobi_eigh(a, tol, max_sweeps):
    """Cyclic Jacobi rotations on a symmetric matrix.

    Returns ``(w, v, converged)`` with unsorted eigenvalues ``w`` and
    eigenvectors in the columns of ``v``.  Convergence means the off-diagonal
    Frobenius norm dropped below ``tol`` times the full Frobenius norm.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    total = math.sqrt(float(np.sum(a * a)))
    if n == 1 or total == 0.0:
        return np.diag(a).copy(), v, True
    for _ in range(max_sweeps):
        off = _offnorm(a)
        if off <= tol * total:
            return np.diag(a).copy(), v, True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                g = 100.0 * abs(apq)
                if abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    # negligible against both diagonal entries
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                a[:, p] = c * cp - s * a[:, q]
                a[:, q] = s * cp + c * a[:, q]
                rp = a[p, :].copy()
                a[p, :] = c * rp - s * a[q, :]
                a[q, :] = s * rp + c * a[q, :]
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    off = _offnorm(a)
    return np.diag(a).copy(), v, off <= tol * total


def jacobi_svd(a, tol, max_sweeps):
    """One-sided (Hestenes) Jacobi singular values.

    Orthogonalizes the columns of ``a`` pairwise.  Returns unsorted singular
    values and a convergence flag.
    """
    u = np.array(a, dtype=np.float64, copy=True)
    if u.shape[1] > u.shape[0]:
        u = np.ascontiguousarray(u.T)
    n = u.shape[1]
    # columns below this squared norm are round-off and carry no rank
    floor = (np.finfo(float).eps * float(np.linalg.norm(u))) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up = u[:, p]
                uq = u[:, q]
                alpha = float(up @ up)
                beta = float(uq @ uq)
                gamma = float(up @ uq)
                if alpha <= floor or beta <= floor:
                    continue
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = 1.0 / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                if zeta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                tmp = up.copy()
                u[:, p] = c * tmp - s * uq
                u[:, q] = s * tmp + c * u[:, q]
        if not rotated:
            return np.sqrt(np.sum(u * u, axis=0)), True
    return np.sqrt(np.sum(u * u, axis=0)), False


def _sturm_counts(d, e2, x):
    """Number of eigenvalues strictly below each entry of ``x``."""
    q = d[0] - x
    q = np.where(np.abs(q) < _PIVMIN, -_PIVMIN, q)
    count = (q < 0).astype(np.int64)
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        q = np.where(np.abs(q) < _PIVMIN, -_PIVMIN, q)
        count += q < 0
    return count


def tridiag_lowest(d, e, k):
    """Lowest ``k`` eigenvalues of a symmetric tridiagonal matrix by bisection.

    Sturm counts on the LDL^T pivots give componentwise accuracy, so small
    eigenvalues of strongly graded matrices keep full relative precision.
    """
    d = np.asarray(d, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    n = d.size
    e2 = e * e
    ae = np.abs(e)
    rad = np.zeros(n)
    rad[:-1] += ae
    rad[1:] += ae
    lo = np.full(k, float(np.min(d - rad)))
    hi = np.full(k, float(np.max(d + rad)))
    idx = np.arange(k)
    eps = np.finfo(float).eps
    for _ in range(2200):
        width = hi - lo
        active = width > 2.0 * eps * np.maximum(np.abs(lo), np.abs(hi)) + _PIVMIN
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        below = _sturm_counts(d, e2, mid[active]) > idx[active]
        m_hi = hi[active]
        m_lo = lo[active]
        m_hi[below] = mid[active][below]
        m_lo[~below] = mid[active][~below]
        hi[active] = m_hi
        lo[active] = m_lo
    return 0.5 * (lo + hi)
