"""Kalman rank condition for systems with a diagonal speed matrix.

For ``D = diag(d_1, ..., d_n)`` and a control matrix ``B`` of size ``n x m``
the Kalman matrix is ``[D^{n-1} B | ... | D B | B]``.  Grouping equal speeds
into blocks ``B_i`` gives the equivalent test ``rank(B_i) = n_i`` for every
block, which :func:`block_normal_form` makes explicit through a block
Gaussian elimination.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import ValidationError

__all__ = [
    "AmbiguousGroupingError",
    "BlockDecomposition",
    "BlockNormalForm",
    "SpeedBlock",
    "SpeedSystem",
    "block_decompose",
    "block_normal_form",
    "kalman_matrix",
    "kalman_rank_ok",
    "kalman_via_blocks",
]

RANK_TOL = 1e-8
SPEED_TOL = 1e-9


class AmbiguousGroupingError(ValidationError):
    """Speeds form a tolerance chain whose ends are not themselves equal."""


@dataclass(frozen=True)
class SpeedSystem:
    """Constant-coefficient system ``u_tt - D u_xx = B f``.

    Parameters
    ----------
    speeds : array_like, shape (n,)
        Diagonal of ``D`` (squared wave speeds), all positive.
    control_matrix : array_like, shape (n, m) or (n,)
        ``B``; a 1-D input is read as a single control column.
    """

    speeds: np.ndarray
    control_matrix: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.speeds, dtype=np.float64).reshape(-1)
        b = np.asarray(self.control_matrix, dtype=np.float64)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if d.size < 1:
            raise ValidationError("need at least one component")
        if not np.all(np.isfinite(d)) or not np.all(d > 0):
            raise ValidationError("speeds must be finite and positive")
        if b.ndim != 2 or b.shape[0] != d.size:
            raise ValidationError(f"control matrix must have {d.size} rows, got shape {b.shape}")
        if not 1 <= b.shape[1] <= d.size:
            raise ValidationError("need 1 <= m <= n controls")
        if not np.all(np.isfinite(b)):
            raise ValidationError("control matrix has non-finite entries")
        d.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "speeds", d)
        object.__setattr__(self, "control_matrix", b)

    @property
    def n(self) -> int:
        return self.speeds.size

    @property
    def m(self) -> int:
        return self.control_matrix.shape[1]

    def to_dict(self) -> dict:
        return {"speeds": self.speeds.tolist(), "B": self.control_matrix.tolist()}


@dataclass(frozen=True)
class SpeedBlock:
    """Rows of ``B`` sharing one speed value."""

    speed: float
    rows: tuple
    matrix: np.ndarray
    rank: int

    @property
    def size(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class BlockDecomposition:
    """Speed blocks in ascending speed order.

    ``permutation`` lists original row indices in block order, so
    ``B[permutation]`` stacks the block matrices; ``inverse_permutation``
    restores the original order.
    """

    blocks: tuple
    permutation: np.ndarray
    inverse_permutation: np.ndarray = field(repr=False)

    def to_dict(self) -> list:
        return [{"speed": b.speed, "size": b.size, "rank": b.rank, "rows": list(b.rows)}
                for b in self.blocks]


def kalman_matrix(sys: SpeedSystem) -> np.ndarray:
    """``[D^{n-1} B | ... | D B | B]``, highest power leftmost."""
    n = sys.n
    powers = sys.speeds[:, None] ** np.arange(n - 1, -1, -1)[None, :]     # (n, n)
    return (powers[:, :, None] * sys.control_matrix[:, None, :]).reshape(n, n * sys.m)


def kalman_rank_ok(sys: SpeedSystem, tol: float = RANK_TOL) -> bool:
    """True iff the Kalman matrix has full row rank ``n``."""
    return nm.rank_with_tolerance(kalman_matrix(sys), tol) == sys.n


def block_decompose(sys: SpeedSystem, speed_tol: float = SPEED_TOL,
                    rank_tol: float = RANK_TOL) -> BlockDecomposition:
    """Group rows with speeds equal within ``speed_tol`` (relative).

    Raises
    ------
    AmbiguousGroupingError
        If consecutive speeds chain together within tolerance while the chain
        ends differ by more than the tolerance.
    """
    if not speed_tol > 0:
        raise ValidationError("speed_tol must be positive")
    order = np.argsort(sys.speeds, kind="stable")
    d = sys.speeds[order]
    groups = [[order[0]]]
    for prev, cur, idx in zip(d[:-1], d[1:], order[1:]):
        if cur - prev <= speed_tol * cur:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    blocks = []
    for g in groups:
        rows = tuple(sorted(int(i) for i in g))
        vals = sys.speeds[list(rows)]
        if vals.max() - vals.min() > speed_tol * vals.max():
            raise AmbiguousGroupingError(
                f"speeds {vals.tolist()} chain within tolerance but their extremes do not")
        mat = sys.control_matrix[list(rows)].copy()
        blocks.append(SpeedBlock(float(vals[0]) if np.all(vals == vals[0]) else float(vals.mean()),
                                 rows, mat, nm.rank_with_tolerance(mat, rank_tol)))
    perm = np.array([i for b in blocks for i in b.rows], dtype=np.int64)
    return BlockDecomposition(tuple(blocks), perm, np.argsort(perm))


def kalman_via_blocks(sys: SpeedSystem, speed_tol: float = SPEED_TOL,
                      rank_tol: float = RANK_TOL) -> bool:
    """Block criterion: every speed block ``B_i`` has full row rank."""
    dec = block_decompose(sys, speed_tol, rank_tol)
    return all(b.rank == b.size for b in dec.blocks)


# ---------------------------------------------------------------- normal form

def _reduce_block(b: np.ndarray, r: int):
    """Invertible ``P_i, Q_i`` with ``P_i b Q_i = diag(I_r, 0)``.

    Full-pivot elimination ``Pr b Pc = L U`` for ``r`` steps, then
    ``P_i = L^-1 Pr`` and ``Q_i = Pc [[U11^-1, -U11^-1 U12], [0, I]]``.
    Also returns ``Q_i^-1`` in closed form.
    """
    rows, cols = b.shape
    if r == 0:
        return np.eye(rows), np.eye(cols), np.eye(cols)
    a = b.copy()
    low = np.eye(rows)
    rp = np.arange(rows)
    cp = np.arange(cols)
    for t in range(r):
        sub = np.abs(a[t:, t:])
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        i += t
        j += t
        a[[t, i]] = a[[i, t]]
        low[[t, i], :t] = low[[i, t], :t]
        rp[[t, i]] = rp[[i, t]]
        a[:, [t, j]] = a[:, [j, t]]
        cp[[t, j]] = cp[[j, t]]
        f = a[t + 1:, t] / a[t, t]
        low[t + 1:, t] = f
        a[t + 1:, t:] -= np.outer(f, a[t, t:])
        a[t + 1:, t] = 0.0
    a[r:, :] = 0.0      # below-tolerance remainder
    u11 = a[:r, :r]
    u12 = a[:r, r:]
    u11_inv = nm.solve_upper(u11, np.eye(r))
    right = np.eye(cols)
    right[:r, :r] = u11_inv
    right[:r, r:] = -u11_inv @ u12
    right_inv = np.eye(cols)
    right_inv[:r, :r] = u11
    right_inv[:r, r:] = u12
    pr = np.eye(rows)[rp]
    pc = np.eye(cols)[:, cp]
    p_i = nm.solve_lower(low, pr)
    q_i = pc @ right
    q_inv = right_inv @ pc.T
    return p_i, q_i, q_inv


@dataclass(frozen=True)
class BlockNormalForm:
    """``reduced = P [D|B] Q T``, block lower triangular.

    ``pivots[i]`` is the scalar multiplying ``E_i = diag(I_{r_i}, 0)`` in
    diagonal block ``i``.
    """

    P: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    reduced: np.ndarray
    pivots: np.ndarray
    rank: int
    decomposition: BlockDecomposition

    def __iter__(self):
        return iter((self.P, self.Q, self.T, self.reduced))

    def residual(self, sys: SpeedSystem) -> float:
        """Relative max-norm mismatch between the product and ``reduced``."""
        prod = self.P @ kalman_matrix(sys) @ self.Q @ self.T
        return float(np.abs(prod - self.reduced).max() / max(np.abs(prod).max(), 1e-300))


def block_normal_form(sys: SpeedSystem, speed_tol: float = SPEED_TOL,
                      rank_tol: float = RANK_TOL) -> BlockNormalForm:
    """Block Gaussian elimination of the Kalman matrix.

    Rows are permuted into speed blocks and each ``B_i`` is reduced to
    ``E_i`` by ``P_i, Q_i``.  Column block ``j`` of the Kalman matrix carries
    the factor ``d_i^{n-j}``, so block ``(i, j)`` of ``P [D|B] Q`` equals
    ``c_ij E_i Q_i^-1 Q_j`` with ``Q_j = I`` for columns past the last speed
    block.  Eliminating with those scalars yields ``reduced``, which is built
    from the formula and checked against the explicit product.
    """
    dec = block_decompose(sys, speed_tol, rank_tol)
    n, m = sys.n, sys.m
    s = len(dec.blocks)
    speeds = np.array([b.speed for b in dec.blocks])
    if not np.all(speeds > 0):
        raise ValidationError("block speeds must be nonzero")
    parts = [_reduce_block(b.matrix, b.rank) for b in dec.blocks]
    qs = [p[1] for p in parts] + [np.eye(m)] * (n - s)
    qinv = [p[2] for p in parts] + [np.eye(m)] * (n - s)
    sizes = [b.size for b in dec.blocks]
    offs = np.concatenate([[0], np.cumsum(sizes)])

    perm = np.eye(n)[dec.permutation]
    p_diag = np.zeros((n, n))
    for i, (p_i, _, _) in enumerate(parts):
        p_diag[offs[i]:offs[i + 1], offs[i]:offs[i + 1]] = p_i
    p_big = p_diag @ perm
    q_big = np.zeros((n * m, n * m))
    for j in range(n):
        q_big[j * m:(j + 1) * m, j * m:(j + 1) * m] = qs[j]

    c = speeds[:, None] ** np.arange(n - 1, -1, -1)[None, :]     # c_ij = d_i^{n-j}
    frozen = c.copy()                                             # value when column j was pivoted
    t_big = np.eye(n * m)
    for t in range(s):
        step = np.eye(n * m)
        for j in range(t + 1, n):
            f = c[t, j] / c[t, t]
            step[t * m:(t + 1) * m, j * m:(j + 1) * m] = -f * (qinv[t] @ qs[j])
        t_big = t_big @ step
        c[:, t + 1:] = c[:, t + 1:] - np.outer(c[:, t] / c[t, t], c[t, t + 1:])
        c[t, t + 1:] = 0.0
        if t + 1 < n:
            frozen[:, t + 1] = c[:, t + 1]
    frozen[:, s:] = c[:, s:]
    pivots = np.array([frozen[i, i] for i in range(s)])

    reduced = np.zeros((n, n * m))
    for i, blk in enumerate(dec.blocks):
        e_i = np.zeros((blk.size, m))
        e_i[range(blk.rank), range(blk.rank)] = 1.0
        for j in range(min(i + 1, n)):
            coef = frozen[i, j]
            block = coef * e_i if j == i else coef * (e_i @ qinv[i] @ qs[j])
            reduced[offs[i]:offs[i + 1], j * m:(j + 1) * m] = block
    rank = sum(b.rank for b in dec.blocks)
    return BlockNormalForm(p_big, q_big, t_big, reduced, pivots, rank, dec)
