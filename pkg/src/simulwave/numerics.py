"""Dense numerical kernels used throughout the package.

Matrices are plain 2-D ``numpy.ndarray`` objects of ``float64``.  The heavy
loops (Jacobi rotations, one-sided Jacobi SVD, Sturm bisection) live in the
kernel backends selected by :mod:`simulwave._backend`; every function taking a
``backend`` argument accepts ``"compiled"``, ``"python"`` or ``None`` for the
default.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .errors import ConvergenceError, ValidationError

__all__ = [
    "QuadratureRule",
    "as_matrix",
    "cholesky",
    "gauss_legendre_rule",
    "generalized_eigh",
    "generalized_min_eig",
    "integrate_1d",
    "rank_with_tolerance",
    "simpson_weights",
    "singular_values",
    "solve_lower",
    "solve_spd",
    "solve_upper",
    "sym_eig",
    "tridiagonal_lowest",
]

JACOBI_TOL = 1e-14
JACOBI_SWEEPS = 80
SYMMETRY_TOL = 1e-12


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``m`` to a finite 2-D float array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def _as_symmetric(m, name: str) -> np.ndarray:
    arr = as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    if scale > 0 and float(np.max(np.abs(arr - arr.T))) > SYMMETRY_TOL * scale:
        raise ValidationError(f"{name} is not symmetric within {SYMMETRY_TOL:g} relative")
    return 0.5 * (arr + arr.T)


def _canonical_order(w: np.ndarray, v: np.ndarray):
    """Sign convention (first nonzero entry positive) and ascending order."""
    v = v.copy()
    for i in range(v.shape[1]):
        col = v[:, i]
        big = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if big.size and col[big[0]] < 0:
            v[:, i] = -col
    keys = tuple(v[r] for r in range(v.shape[0] - 1, -1, -1)) + (w,)
    order = np.lexsort(keys)
    return w[order], v[:, order]


# ---------------------------------------------------------------- rank / SVD

def singular_values(m, backend: str | None = None) -> np.ndarray:
    """Singular values in descending order via one-sided Jacobi."""
    arr = as_matrix(m)
    if arr.size == 0:
        return np.zeros(0)
    sv, ok = _backend.get(backend).jacobi_svd(arr, JACOBI_TOL, JACOBI_SWEEPS)
    if not ok:
        raise ConvergenceError("one-sided Jacobi SVD did not converge")
    return np.sort(np.asarray(sv))[::-1]


def rank_with_tolerance(m, tol: float = 1e-8, backend: str | None = None) -> int:
    """Number of singular values exceeding ``tol`` times the largest one.

    Singular values come from orthogonalizing columns directly, never from
    ``m.T @ m``, so values near ``tol`` are not swamped by squaring.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    sv = singular_values(m, backend=backend)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


# ---------------------------------------------------------------- eigen

def sym_eig(m, backend: str | None = None):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Returns
    -------
    w : ndarray
        Eigenvalues, ascending.
    v : ndarray
        Orthonormal eigenvectors in columns, first nonzero entry positive.
    """
    arr = _as_symmetric(m, "matrix")
    if arr.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    w, v, ok = _backend.get(backend).jacobi_eigh(arr, JACOBI_TOL, JACOBI_SWEEPS)
    if not ok:
        raise ConvergenceError("Jacobi eigensolver did not converge")
    return _canonical_order(np.asarray(w), np.asarray(v))


def cholesky(m) -> np.ndarray:
    """Lower Cholesky factor; rejects matrices that are not positive definite."""
    arr = _as_symmetric(m, "norm matrix")
    n = arr.shape[0]
    low = np.zeros_like(arr)
    for j in range(n):
        piv = arr[j, j] - low[j, :j] @ low[j, :j]
        if not piv > 0:
            raise ValidationError("matrix is not positive definite")
        low[j, j] = math.sqrt(piv)
        low[j + 1:, j] = (arr[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def solve_lower(low: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution ``low @ x = rhs`` (rhs vector or matrix)."""
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.array(rhs, copy=True)
    for i in range(low.shape[0]):
        x[i] = (rhs[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def solve_upper(up: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Back substitution ``up @ x = rhs`` (rhs vector or matrix)."""
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.array(rhs, copy=True)
    n = up.shape[0]
    for i in range(n - 1, -1, -1):
        x[i] = (rhs[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x


def generalized_eigh(a, m, backend: str | None = None):
    """Solve ``a x = lam m x`` for symmetric ``a`` and SPD ``m``.

    Reduces with ``m = L L^T`` to the standard problem for ``L^-1 a L^-T``.
    Eigenvectors are returned ``m``-orthonormal.
    """
    a = _as_symmetric(a, "matrix")
    low = cholesky(m)
    if a.shape != low.shape:
        raise ValidationError("matrix and norm matrix sizes differ")
    half = solve_lower(low, a)                 # L^-1 a
    c = solve_lower(low, half.T).T             # L^-1 a L^-T
    w, y = sym_eig(0.5 * (c + c.T), backend=backend)
    x = solve_upper(low.T, y)
    return _canonical_order(w, x)


def generalized_min_eig(a, m, backend: str | None = None) -> float:
    """Smallest generalized eigenvalue, the minimum of ``z^T a z / z^T m z``."""
    w, _ = generalized_eigh(a, m, backend=backend)
    return float(w[0])


# ---------------------------------------------------------------- CG

def solve_spd(a, rhs, tol: float, max_iter: int | None = None) -> np.ndarray:
    """Conjugate gradients for a symmetric positive definite system.

    Stops when the true residual satisfies ``|a x - rhs| <= tol |rhs|``.
    Raises :class:`ConvergenceError` after ``10 * dim`` iterations or when a
    non-positive curvature direction reveals an indefinite matrix.
    """
    a = as_matrix(a)
    b = np.asarray(rhs, dtype=np.float64)
    n = b.size
    if a.shape != (n, n):
        raise ValidationError("matrix and right-hand side sizes differ")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n)
    if bnorm == 0.0:
        return x
    limit = 10 * n if max_iter is None else max_iter
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    for _ in range(limit):
        ap = a @ p
        curv = float(p @ ap)
        if not curv > 0:
            raise ConvergenceError("non-positive curvature in CG: matrix not positive definite")
        alpha = rr / curv
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= tol * bnorm:
            r = b - a @ x              # guard against recurrence drift
            rr_new = float(r @ r)
            if math.sqrt(rr_new) <= tol * bnorm:
                return x
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceError(f"CG did not reach tol {tol:g} in {limit} iterations")


# ---------------------------------------------------------------- quadrature

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights of a rule on ``[lo, hi]``."""

    nodes: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        if not np.all(np.diff(self.nodes) > 0):
            raise ValidationError("quadrature nodes must be strictly increasing")
        if not np.all(self.weights > 0):
            raise ValidationError("quadrature weights must be positive")
        span = self.hi - self.lo
        if abs(float(self.weights.sum()) - span) > 1e-12 * span:
            raise ValidationError("quadrature weights do not sum to the interval length")

    def apply(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def gauss_legendre_rule(lo: float, hi: float, panels: int) -> QuadratureRule:
    """Composite 5-point Gauss-Legendre rule with ``panels`` equal panels."""
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValidationError("need finite lo < hi")
    if panels < 1:
        raise ValidationError("panels must be >= 1")
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mids[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return QuadratureRule(nodes, weights, float(lo), float(hi))


def integrate_1d(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, panels: int) -> float:
    """Integrate a vectorized ``f`` over ``[lo, hi]`` with composite GL5."""
    rule = gauss_legendre_rule(lo, hi, panels)
    vals = np.asarray(f(rule.nodes), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("integrand produced non-finite samples")
    return rule.apply(np.broadcast_to(vals, rule.nodes.shape))


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for ``n`` (odd) equally spaced samples."""
    if n < 3 or n % 2 == 0:
        raise ValidationError("Simpson's rule needs an odd sample count >= 3")
    w = np.full(n, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


# ---------------------------------------------------------------- tridiagonal

def tridiagonal_lowest(d, e, k: int, backend: str | None = None) -> np.ndarray:
    """Lowest ``k`` eigenvalues (ascending) of a symmetric tridiagonal matrix."""
    d = np.asarray(d, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if d.ndim != 1 or e.shape != (max(d.size - 1, 0),):
        raise ValidationError("need diagonal of length n and off-diagonal of length n-1")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
        raise ValidationError("tridiagonal entries must be finite")
    if not 1 <= k <= d.size:
        raise ValidationError("k out of range")
    return np.asarray(_backend.get(backend).tridiag_lowest(d, e, int(k)))
