"""Hilbert Uniqueness Method at spectral truncation order ``N``.

The adjoint data ``z`` (sine coefficients of position and velocity, laid out
by :func:`simulwave.waves.row_index`) generates the observation
``B^T V_z`` on ``omega x ]0, T[``.  Its quadratic form is the Gramian ``G``;
``M`` is the diagonal norm matrix of the ``L^2 x H^-1`` data space.  Controls
are ``f = B^T V_z`` with ``G z = r``, where ``r`` pairs the state to be
cancelled against the adjoint flow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _parallel
from . import numerics as nm
from . import waves as wv
from .errors import NumericalError, ValidationError
from .kalman import SpeedSystem

__all__ = [
    "Gramian",
    "HumSolution",
    "ScanRow",
    "assemble_gramian",
    "hum_rhs_exact",
    "hum_rhs_null",
    "hum_solve",
    "kernel_dim",
    "kernel_directions",
    "observability_constant",
    "round_trip_error",
    "synthesize_control",
    "synthesize_partial_control",
    "time_scan",
]

PI = math.pi
KERNEL_TOL = 1e-10
RESONANCE_TOL = 1e-12
CG_TOL = 1e-12


@dataclass(frozen=True)
class Gramian:
    """Observability Gramian ``G`` and norm matrix ``M`` of size ``2nN``."""

    G: np.ndarray
    M: np.ndarray
    n: int
    N: int
    T: float
    omega: tuple
    speeds: np.ndarray

    def index(self, j: int, k: int, alpha: int) -> int:
        """Row of component ``j`` (0-based), mode ``k`` (1-based), slot ``alpha``."""
        return wv.row_index(j, k, alpha, self.N)

    def generalized_eigh(self):
        """Ascending eigenvalues of ``(G, M)`` and ``M``-orthonormal vectors."""
        return nm.generalized_eigh(self.G, self.M)

    def generalized_eigenvalues(self) -> np.ndarray:
        return self.generalized_eigh()[0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "T": self.T,
            "omega": list(self.omega),
            "eigenvalues_of_(G,M)": self.generalized_eigenvalues().tolist(),
        }


def _space_overlap(N: int, lo: float, hi: float) -> np.ndarray:
    """``S[k, q] = int_lo^hi sin(k x) sin(q x) dx`` in closed form."""
    k = np.arange(1, N + 1, dtype=np.float64)
    kk, qq = np.meshgrid(k, k, indexing="ij")
    diff = kk - qq
    tot = kk + qq
    safe = np.where(diff == 0, 1.0, diff)
    off = 0.5 * ((np.sin(diff * hi) - np.sin(diff * lo)) / safe
                 - (np.sin(tot * hi) - np.sin(tot * lo)) / tot)
    on = 0.5 * ((hi - lo) - (np.sin(2 * k * hi) - np.sin(2 * k * lo)) / (2 * k))
    return np.where(diff == 0, on[:, None] * np.ones(N)[None, :], off)


def _cos_int(nu: np.ndarray, T: float) -> np.ndarray:
    """``int_0^T cos(nu t) dt`` with the resonant branch ``T``."""
    res = np.abs(nu) < RESONANCE_TOL
    safe = np.where(res, 1.0, nu)
    return np.where(res, T, np.sin(safe * T) / safe)


def _sin_int(nu: np.ndarray, T: float) -> np.ndarray:
    """``int_0^T sin(nu t) dt`` in the cancellation-free form, 0 when resonant."""
    res = np.abs(nu) < RESONANCE_TOL
    safe = np.where(res, 1.0, nu)
    return np.where(res, 0.0, 2.0 * np.sin(0.5 * safe * T) ** 2 / safe)


def norm_matrix(sys: SpeedSystem, N: int) -> np.ndarray:
    """Diagonal ``L^2 x H^-1`` weights: ``pi/2`` and ``(pi/2)/(d_j k^2)``."""
    k2 = np.arange(1, N + 1, dtype=np.float64) ** 2
    diag = np.concatenate([np.stack([np.full(N, PI / 2), (PI / 2) / (d * k2)]).reshape(-1)
                           for d in sys.speeds])
    return np.diag(diag)


def assemble_gramian(sys: SpeedSystem, win: wv.ObservationWindow, N: int) -> Gramian:
    """Closed-form Gramian of the truncated observation.

    Entry ``((j,k,a), (l,q,b))`` is ``(B B^T)_jl S(k,q) T_ab``, where ``T_ab``
    integrates the product of ``cos(omega t)`` (position slot) or
    ``sin(omega t)/omega`` (velocity slot) at the two frequencies over
    ``[0, T]`` via product-to-sum identities.
    """
    if N < 1:
        raise ValidationError("truncation order N must be >= 1")
    n = sys.n
    T = win.T
    om = wv.frequencies(sys, N)                                     # (n, N)
    w = sys.control_matrix @ sys.control_matrix.T                   # (n, n)
    s = _space_overlap(N, win.omega_lo, win.omega_hi)               # (N, N)

    o1 = om[:, :, None, None]
    o2 = om[None, None, :, :]
    c_minus = _cos_int(o1 - o2, T)
    c_plus = _cos_int(o1 + o2, T)
    s_minus = _sin_int(o1 - o2, T)
    s_plus = _sin_int(o1 + o2, T)
    cc = 0.5 * (c_minus + c_plus)
    ss = 0.5 * (c_minus - c_plus) / (o1 * o2)
    cs = 0.5 * (s_plus - s_minus) / o2
    sc = 0.5 * (s_plus + s_minus) / o1
    space = w[:, None, :, None] * s[None, :, None, :]              # (n, N, n, N)
    g = np.empty((n, 2, N, n, 2, N))
    g[:, 0, :, :, 0, :] = space * cc
    g[:, 0, :, :, 1, :] = space * cs
    g[:, 1, :, :, 0, :] = space * sc
    g[:, 1, :, :, 1, :] = space * ss
    g = g.reshape(2 * n * N, 2 * n * N)
    g = 0.5 * (g + g.T)
    return Gramian(g, norm_matrix(sys, N), n, N, T, win.omega, sys.speeds.copy())


def observability_constant(g: Gramian) -> float:
    """Smallest generalized eigenvalue of ``(G, M)``."""
    return nm.generalized_min_eig(g.G, g.M)


def _kernel_mask(w: np.ndarray, tol: float) -> np.ndarray:
    if not tol > 0:
        raise ValidationError("tol must be positive")
    return w <= tol * max(float(w[-1]), 0.0)


def kernel_dim(g: Gramian, tol: float = KERNEL_TOL) -> int:
    """Number of generalized eigenvalues at most ``tol * lambda_max``."""
    return int(np.count_nonzero(_kernel_mask(g.generalized_eigenvalues(), tol)))


def kernel_directions(g: Gramian, tol: float = KERNEL_TOL) -> list[wv.ModalData]:
    """Eigenvectors spanning the numerical kernel (approximately invisible data)."""
    w, x = g.generalized_eigh()
    return [wv.ModalData.from_vector(x[:, i], g.n, g.N) for i in np.flatnonzero(_kernel_mask(w, tol))]


# ---------------------------------------------------------------- right-hand sides

def hum_rhs_null(init_prime: wv.ModalData) -> np.ndarray:
    """Right-hand side for driving ``init_prime`` to rest.

    Cancelling the state requires ``(G z)_pos = -(pi/2) u1`` and
    ``(G z)_vel = (pi/2) u0`` mode by mode.
    """
    return wv.ModalData(-(PI / 2) * init_prime.vel, (PI / 2) * init_prime.pos).to_vector()


def hum_rhs_exact(sys: SpeedSystem, T: float, init: wv.ModalData, target: wv.ModalData) -> np.ndarray:
    """Right-hand side for steering ``init`` to ``target`` directly.

    Works forward: the Duhamel integrals must supply
    ``target - S(T) init``, which is rotated back into adjoint moments.
    """
    om = wv.frequencies(sys, init.N)
    free = wv.free_evolution(sys, init, T)
    da = target.pos - free.pos
    db = target.vel - free.vel
    c, s = np.cos(om * T), np.sin(om * T)
    i_cos = om * s * da + c * db
    i_sin = -c * da + s / om * db
    return wv.ModalData((PI / 2) * i_cos, (PI / 2) * i_sin).to_vector()


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class HumSolution:
    """Adjoint data ``z``, its observation ``control`` and solver facts."""

    control: wv.ControlSignal
    z: wv.ModalData
    gramian: Gramian
    rhs: np.ndarray
    rank: int
    route: str


def _check_data(sys, N, *datas):
    for d in datas:
        if d.n != sys.n or d.N != N:
            raise ValidationError(f"modal data must have shape ({sys.n}, {N}), got ({d.n}, {d.N})")


def _control_from(sys, win, z, n_t, n_x):
    N = z.N
    n_t = wv.default_time_samples(sys, N, win.T) if n_t is None else n_t
    n_x = wv.default_space_samples(N, win.omega_lo, win.omega_hi) if n_x is None else n_x
    return wv.observation(sys, z, win, n_t, n_x)


def _solve_scaled(g: Gramian, rhs: np.ndarray, tol: float) -> np.ndarray:
    """CG on ``M^-1/2 G M^-1/2``; the diagonal scaling equalises mode weights."""
    d = 1.0 / np.sqrt(np.diag(g.M))
    a = d[:, None] * g.G * d[None, :]
    return d * nm.solve_spd(a, d * rhs, tol)


def hum_solve(sys: SpeedSystem, win: wv.ObservationWindow, N: int, init: wv.ModalData,
              target: wv.ModalData, tol: float = CG_TOL, route: str = "null",
              n_t: int | None = None, n_x: int | None = None,
              gramian: Gramian | None = None) -> HumSolution:
    """Solve ``G z = r`` and sample the control ``B^T V_z``.

    ``route="null"`` cancels ``init - S(-T) target``; ``route="exact"``
    builds ``r`` from ``target - S(T) init`` without that reduction.

    Raises
    ------
    NumericalError
        If the truncated system is not observable above ``tol`` or CG fails.
    """
    _check_data(sys, N, init, target)
    g = assemble_gramian(sys, win, N) if gramian is None else gramian
    if route == "null":
        back = wv.free_evolution(sys, target, -win.T)
        prime = wv.ModalData(init.pos - back.pos, init.vel - back.vel)
        rhs = hum_rhs_null(prime)
    elif route == "exact":
        rhs = hum_rhs_exact(sys, win.T, init, target)
    else:
        raise ValidationError(f"unknown route {route!r}")
    if not np.any(rhs):
        z = np.zeros_like(rhs)
    else:
        if observability_constant(g) <= tol:
            raise NumericalError("system is not observable at this truncation; use partial control")
        z = _solve_scaled(g, rhs, tol)
    zd = wv.ModalData.from_vector(z, sys.n, N)
    return HumSolution(_control_from(sys, win, zd, n_t, n_x), zd, g, rhs, 2 * sys.n * N, route)


def synthesize_control(sys: SpeedSystem, win: wv.ObservationWindow, N: int, init: wv.ModalData,
                       target: wv.ModalData, tol: float = CG_TOL, **kw) -> wv.ControlSignal:
    """HUM control steering ``init`` to ``target`` at time ``win.T``."""
    return hum_solve(sys, win, N, init, target, tol=tol, **kw).control


def synthesize_partial_control(sys: SpeedSystem, win: wv.ObservationWindow, N: int,
                               init: wv.ModalData, target: wv.ModalData,
                               cutoff: float = KERNEL_TOL, n_t: int | None = None,
                               n_x: int | None = None, gramian: Gramian | None = None):
    """Spectral pseudo-inverse control on well-observed directions.

    Keeps the generalized eigendirections with eigenvalue above
    ``cutoff * lambda_max``.  Returns ``(control, rank)`` where ``rank`` is
    the number of directions used.
    """
    _check_data(sys, N, init, target)
    g = assemble_gramian(sys, win, N) if gramian is None else gramian
    back = wv.free_evolution(sys, target, -win.T)
    rhs = hum_rhs_null(wv.ModalData(init.pos - back.pos, init.vel - back.vel))
    w, x = g.generalized_eigh()
    keep = ~_kernel_mask(w, cutoff)
    if keep.any():
        xk = x[:, keep]
        z = xk @ ((xk.T @ rhs) / w[keep])
    else:
        z = np.zeros_like(rhs)
    zd = wv.ModalData.from_vector(z, sys.n, N)
    return _control_from(sys, win, zd, n_t, n_x), int(np.count_nonzero(keep))


def round_trip_error(sys: SpeedSystem, f: wv.ControlSignal, init: wv.ModalData,
                     target: wv.ModalData) -> float:
    """Energy of ``(final - target)`` relative to the larger of the two data energies."""
    out = wv.forward_solve(sys, f, init)
    miss = wv.ModalData(out.pos - target.pos, out.vel - target.vel)
    scale = max(wv.energy(sys, init).sum(), wv.energy(sys, target).sum(), 1e-300)
    return float(wv.energy(sys, miss).sum() / scale)


# ---------------------------------------------------------------- time scans

@dataclass(frozen=True)
class ScanRow:
    T: float
    observability_constant: float
    kernel_dim: int


def time_scan(sys: SpeedSystem, omega, N: int, times, tol: float = KERNEL_TOL) -> list[ScanRow]:
    """Observability constant and kernel dimension for each horizon in ``times``."""
    times = [float(T) for T in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValidationError("times must be strictly increasing")

    def one(T):
        g = assemble_gramian(sys, wv.ObservationWindow(omega[0], omega[1], T), N)
        w = g.generalized_eigenvalues()
        return ScanRow(T, float(w[0]), int(np.count_nonzero(_kernel_mask(w, tol))))

    return _parallel.map_ordered(one, times)
