"""Constant-coefficient wave systems on ]0, pi[ in the sine basis.

Component ``j`` of the state is ``u_j(t, x) = sum_k u_jk(t) sin(k x)`` with
frequency ``omega_jk = sqrt(d_j) k``.  Adjoint solutions are evaluated in
closed form and the controlled system is integrated mode by mode with the
Duhamel formula.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numerics as nm
from .errors import ValidationError
from .kalman import SpeedSystem

__all__ = [
    "ControlSignal",
    "ModalData",
    "ObservationWindow",
    "adjoint_eval",
    "default_space_samples",
    "default_time_samples",
    "energy",
    "forward_solve",
    "free_evolution",
    "frequencies",
    "observation",
    "random_unit_state",
    "required_time_samples",
    "row_index",
]

PI = math.pi
POS, VEL = 0, 1


def row_index(j: int, k: int, alpha: int, N: int) -> int:
    """Flat index of component ``j`` (0-based), mode ``k`` (1-based), slot ``alpha``.

    ``alpha`` is 0 for position and 1 for velocity coefficients.
    """
    return j * 2 * N + alpha * N + (k - 1)


@dataclass(frozen=True)
class ModalData:
    """Sine coefficients of (position, velocity), arrays of shape ``(n, N)``."""

    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        p = np.array(self.pos, dtype=np.float64, ndmin=2)
        v = np.array(self.vel, dtype=np.float64, ndmin=2)
        if p.ndim != 2 or p.shape != v.shape:
            raise ValidationError(f"pos and vel must share a 2-D shape, got {p.shape} and {v.shape}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValidationError("modal coefficients must be finite")
        object.__setattr__(self, "pos", p)
        object.__setattr__(self, "vel", v)

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    @property
    def N(self) -> int:
        return self.pos.shape[1]

    @classmethod
    def zeros(cls, n: int, N: int) -> "ModalData":
        return cls(np.zeros((n, N)), np.zeros((n, N)))

    def to_vector(self) -> np.ndarray:
        """Layout of :func:`row_index`: per component, positions then velocities."""
        return np.concatenate([self.pos, self.vel], axis=1).reshape(-1)

    @classmethod
    def from_vector(cls, vec, n: int, N: int) -> "ModalData":
        arr = np.asarray(vec, dtype=np.float64).reshape(n, 2, N)
        return cls(arr[:, 0, :].copy(), arr[:, 1, :].copy())

    def to_dict(self) -> dict:
        return {"pos": self.pos.tolist(), "vel": self.vel.tolist()}


@dataclass(frozen=True)
class ObservationWindow:
    """Control region ``]omega_lo, omega_hi[`` and horizon ``T``."""

    omega_lo: float
    omega_hi: float
    T: float

    def __post_init__(self):
        lo, hi, T = float(self.omega_lo), float(self.omega_hi), float(self.T)
        if not (0.0 <= lo < hi <= PI):
            raise ValidationError(f"need 0 <= omega_lo < omega_hi <= pi, got ({lo}, {hi})")
        if not (math.isfinite(T) and T > 0):
            raise ValidationError("T must be positive")
        object.__setattr__(self, "omega_lo", lo)
        object.__setattr__(self, "omega_hi", hi)
        object.__setattr__(self, "T", T)

    @property
    def omega(self) -> tuple[float, float]:
        return (self.omega_lo, self.omega_hi)


def frequencies(sys: SpeedSystem, N: int) -> np.ndarray:
    """``omega_jk = sqrt(d_j) k``, shape ``(n, N)``."""
    return np.sqrt(sys.speeds)[:, None] * np.arange(1, N + 1)[None, :]


def required_time_samples(sys: SpeedSystem, N: int, T: float) -> int:
    """Minimum sample count ``20 sqrt(d_max) N T / (2 pi)`` for a control grid."""
    return int(math.ceil(20.0 * math.sqrt(float(sys.speeds.max())) * N * T / (2.0 * PI)))


def _odd_at_least(k: int) -> int:
    return k if k % 2 == 1 else k + 1


def default_time_samples(sys: SpeedSystem, N: int, T: float) -> int:
    """Odd time-grid size with twice the required resolution."""
    return _odd_at_least(max(101, 2 * required_time_samples(sys, N, T)))


def default_space_samples(N: int, lo: float, hi: float) -> int:
    """Odd space-grid size with at least 40 points per wavelength of mode N."""
    return _odd_at_least(max(51, int(math.ceil(40.0 * N * (hi - lo) / (2.0 * PI))) + 1))


class ControlSignal:
    """Samples of an ``m``-channel control on a uniform grid of window x time.

    Parameters
    ----------
    t : ndarray, shape (n_t,)
        Uniform time grid from 0 to ``T``.
    x : ndarray, shape (n_x,)
        Uniform space grid covering the window.
    values : ndarray, shape (m, n_t, n_x)
        Channel values; a 2-D array is read as a single channel.
    """

    def __init__(self, t, x, values):
        t = np.asarray(t, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        vals = np.array(values, dtype=np.float64)
        if vals.ndim == 2:
            vals = vals[None]
        if t.ndim != 1 or x.ndim != 1 or t.size < 2 or x.size < 2:
            raise ValidationError("time and space grids must be 1-D with at least two samples")
        if vals.shape[1:] != (t.size, x.size):
            raise ValidationError(f"values shape {vals.shape} does not match grids ({t.size}, {x.size})")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("control values must be finite")
        if t[0] != 0.0 or not _uniform(t):
            raise ValidationError("time grid must be uniform and start at 0")
        if not _uniform(x) or x[0] < 0.0 or x[-1] > PI:
            raise ValidationError("space grid must be uniform inside [0, pi]")
        self.t = t
        self.x = x
        self.values = vals

    @classmethod
    def zeros(cls, win: ObservationWindow, m: int, n_t: int, n_x: int) -> "ControlSignal":
        return cls(np.linspace(0.0, win.T, n_t), np.linspace(win.omega_lo, win.omega_hi, n_x),
                   np.zeros((m, n_t, n_x)))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def window(self) -> tuple[float, float]:
        return (float(self.x[0]), float(self.x[-1]))

    def l2_norm(self) -> float:
        """Space-time L2 norm summed over channels (Simpson when possible)."""
        wt = _rule(self.t)
        wx = _rule(self.x)
        return math.sqrt(float(np.einsum("ctx,t,x->", self.values ** 2, wt, wx)))

    def metadata(self, n: int, N: int) -> dict:
        return {"n": int(n), "m": self.m, "N": int(N), "T": self.T, "omega": list(self.window)}

    def to_csv(self, path) -> list[Path]:
        """Write ``t,x,value`` rows; one file per channel when ``m > 1``."""
        path = Path(path)
        if self.m == 1:
            targets = [path]
        else:
            targets = [path.with_name(f"{path.stem}_c{c}{path.suffix}") for c in range(self.m)]
        tt, xx = np.meshgrid(self.t, self.x, indexing="ij")
        for c, target in enumerate(targets):
            with open(target, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "x", "value"])
                for row in zip(tt.ravel(), xx.ravel(), self.values[c].ravel()):
                    w.writerow([repr(float(v)) for v in row])
        return targets

    @classmethod
    def from_csv(cls, paths, win: ObservationWindow | None = None) -> "ControlSignal":
        """Read files written by :meth:`to_csv` (a path or list of channel paths)."""
        if isinstance(paths, (str, Path)):
            paths = [paths]
        chans = []
        t = x = None
        for p in paths:
            data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
            t = np.unique(data[:, 0])
            x = np.unique(data[:, 1])
            chans.append(data[:, 2].reshape(t.size, x.size))
        sig = cls(t, x, np.stack(chans))
        if win is not None and (abs(sig.T - win.T) > 1e-12 * win.T):
            raise ValidationError("CSV time grid does not match the window horizon")
        return sig


def _uniform(g: np.ndarray) -> bool:
    step = np.diff(g)
    return bool(np.all(step > 0) and np.max(np.abs(step - step.mean())) <= 1e-9 * abs(step.mean()))


def _rule(g: np.ndarray) -> np.ndarray:
    h = float(g[1] - g[0])
    if g.size % 2 == 1 and g.size >= 3:
        return nm.simpson_weights(g.size, h)
    w = np.full(g.size, h)
    w[[0, -1]] = 0.5 * h
    return w


def adjoint_eval(sys: SpeedSystem, data: ModalData, t, x) -> np.ndarray:
    """Closed-form adjoint solution ``v_j(t, x)``.

    ``t`` and ``x`` broadcast against each other; the result has shape
    ``(n,) + broadcast_shape``.
    """
    if data.n != sys.n:
        raise ValidationError("modal data and system disagree on n")
    t, x = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(x, dtype=np.float64))
    om = frequencies(sys, data.N)                                    # (n, N)
    k = np.arange(1, data.N + 1)
    phase = om[(...,) + (None,) * t.ndim] * t[None, None]            # (n, N, *shape)
    sx = np.sin(k[(...,) + (None,) * x.ndim] * x[None])              # (N, *shape)
    amp = (data.pos[(...,) + (None,) * t.ndim] * np.cos(phase)
           + (data.vel / om)[(...,) + (None,) * t.ndim] * np.sin(phase))
    return np.sum(amp * sx[None], axis=1)


def observation(sys: SpeedSystem, data: ModalData, win: ObservationWindow,
                n_t: int, n_x: int) -> ControlSignal:
    """Samples of ``B^T V(t, x)`` on the window grid, one channel per control."""
    t = np.linspace(0.0, win.T, n_t)
    x = np.linspace(win.omega_lo, win.omega_hi, n_x)
    v = adjoint_eval(sys, data, t[:, None], x[None, :])              # (n, n_t, n_x)
    vals = np.einsum("jc,jtx->ctx", sys.control_matrix, v)
    return ControlSignal(t, x, vals)


def free_evolution(sys: SpeedSystem, data: ModalData, T: float) -> ModalData:
    """Exact uncontrolled propagation of modal data by time ``T`` (any sign)."""
    om = frequencies(sys, data.N)
    c, s = np.cos(om * T), np.sin(om * T)
    return ModalData(data.pos * c + data.vel * s / om, -data.pos * om * s + data.vel * c)


def forward_solve(sys: SpeedSystem, f: ControlSignal, init: ModalData) -> ModalData:
    """State at ``T = f.T`` of ``u_tt - D u_xx = B f 1_omega`` from ``init``.

    Each mode obeys ``u'' + omega^2 u = sum_c B_jc f_ck(t)`` with
    ``f_ck(t) = (2/pi) int_omega f_c(t, x) sin(k x) dx``.  The Duhamel integral
    with kernels ``sin(omega (T - s)) / omega`` and ``cos(omega (T - s))`` is
    evaluated by Simpson's rule in ``s``; the space projection also uses
    Simpson's rule.

    Raises
    ------
    ValidationError
        If the grids are even-sized or too coarse for mode ``N``.
    """
    if init.n != sys.n:
        raise ValidationError("initial data and system disagree on n")
    if f.m != sys.m:
        raise ValidationError(f"control has {f.m} channels, system expects {sys.m}")
    N, T = init.N, f.T
    need = required_time_samples(sys, N, T)
    if f.t.size < need:
        raise ValidationError(f"control under-resolved in time: {f.t.size} samples, need >= {need}")
    if f.t.size % 2 == 0 or f.x.size % 2 == 0:
        raise ValidationError("Simpson quadrature needs odd time and space sample counts")
    wt = nm.simpson_weights(f.t.size, float(f.t[1] - f.t[0]))
    wx = nm.simpson_weights(f.x.size, float(f.x[1] - f.x[0]))
    k = np.arange(1, N + 1)
    basis = np.sin(np.outer(k, f.x)) * wx[None, :]                   # (N, n_x)
    proj = (2.0 / PI) * np.einsum("ctx,kx->ctk", f.values, basis)    # (m, n_t, N)
    force = np.einsum("jc,ctk->jtk", sys.control_matrix, proj)       # (n, n_t, N)
    om = frequencies(sys, N)
    lag = (T - f.t)[None, :, None] * om[:, None, :]                  # (n, n_t, N)
    duh_pos = np.einsum("t,jtk->jk", wt, np.sin(lag) * force) / om
    duh_vel = np.einsum("t,jtk->jk", wt, np.cos(lag) * force)
    free = free_evolution(sys, init, T)
    return ModalData(free.pos + duh_pos, free.vel + duh_vel)


def energy(sys: SpeedSystem, state: ModalData) -> np.ndarray:
    """Per-component energy ``(pi/4) sum_k (d_j k^2 pos^2 + vel^2)``."""
    if state.n != sys.n:
        raise ValidationError("state and system disagree on n")
    k2 = np.arange(1, state.N + 1) ** 2
    return (PI / 4.0) * np.sum(sys.speeds[:, None] * k2[None, :] * state.pos ** 2 + state.vel ** 2, axis=1)


def random_unit_state(sys: SpeedSystem, N: int, rng: np.random.Generator) -> ModalData:
    """Gaussian modal data (positions damped by ``1/k``) scaled to unit total energy."""
    d = ModalData(rng.standard_normal((sys.n, N)) / np.arange(1, N + 1), rng.standard_normal((sys.n, N)))
    s = math.sqrt(float(energy(sys, d).sum()))
    return ModalData(d.pos / s, d.vel / s)
