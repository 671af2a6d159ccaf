"""One-dimensional metrics ``g = c(x) dx^2`` on ]0, pi[.

The bump-profile construction gives a metric for which ``u1 = sin x`` and
``u2 = -chi(x) sin x`` both have eigenvalue 1 while ``u1 + u2`` vanishes on
``[a, b]``.  Spectra come from the arclength formula ``k^2 pi^2 / L^2`` and
are cross-checked by a finite-difference Sturm-Liouville solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from . import numerics as nm
from .errors import NumericalError, ValidationError

__all__ = [
    "BumpProfile",
    "CounterexampleMetric",
    "Metric1D",
    "SpectrumEntry",
    "arclength",
    "build_chi",
    "counterexample_metric",
    "counterexample_report",
    "dirichlet_spectrum",
    "fd_grid",
    "laplace_beltrami_apply",
    "metric_record",
    "resonance_check",
    "smoothstep",
    "sturm_liouville_fd",
]

PI = math.pi
HALF_PI = 0.5 * PI
SMOOTH_ORDER = 5
TAYLOR_RADIUS = 1e-3
ARC_PANELS = 200


def smoothstep(order: int) -> Polynomial:
    """Polynomial ``S`` on ``[0, 1]`` rising from 0 to 1 with ``order`` flat derivatives at both ends."""
    n = order
    coef = np.zeros(2 * n + 2)
    for k in range(n + 1):
        coef[n + 1 + k] = math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-1) ** k
    return Polynomial(coef)


# ---------------------------------------------------------------- profile

@dataclass(frozen=True)
class _Piece:
    """``f + S((x - lo)/(hi - lo)) (g - f)`` on ``[lo, hi]``, or just ``f`` when ``g`` is None."""

    lo: float
    hi: float
    f: Polynomial
    g: Polynomial | None = None

    def polynomial(self, step: Polynomial) -> Polynomial:
        t = Polynomial([0.0, 1.0], domain=[self.lo, self.hi], window=[0.0, 1.0])
        x = self.lo + (self.hi - self.lo) * t
        f = self.f(x) + 0 * t
        if self.g is None:
            return f
        return f + step(t) * (self.g(x) - self.f(x))

    def evaluate(self, x: np.ndarray, order: int, step: Polynomial) -> list:
        if self.g is None:
            q, out = self.f, []
            for _ in range(order + 1):
                out.append(q(x))
                q = q.deriv()
            return out
        width = self.hi - self.lo
        t = (x - self.lo) / width
        # near the far end write the blend as g + S(1 - t) (f - g) so both sides stay accurate
        left = t <= 0.5
        u = np.where(left, t, 1.0 - t)
        sign = np.where(left, 1.0, -1.0)
        base = [np.empty_like(x) for _ in range(order + 1)]
        diff = [np.empty_like(x) for _ in range(order + 1)]
        qf, qg, qd = self.f, self.g, self.g - self.f
        for r in range(order + 1):
            fv, gv, dv = qf(x), qg(x), qd(x)
            base[r] = np.where(left, fv, gv)
            diff[r] = np.where(left, dv, -dv)
            qf, qg, qd = qf.deriv(), qg.deriv(), qd.deriv()
        s_vals, sd = [], step
        for jj in range(order + 1):
            s_vals.append(sd(u) * sign ** jj / width ** jj)
            sd = sd.deriv()
        return [base[r] + sum(math.comb(r, jj) * s_vals[jj] * diff[r - jj] for jj in range(r + 1))
                for r in range(order + 1)]


@dataclass(frozen=True)
class BumpProfile:
    """Piecewise-polynomial bump ``chi`` with ``chi(pi/2) = K`` and ``chi = 1`` on ``[a, b]``.

    Pieces, left to right: a linear ramp from 0, a smoothstep blend into the
    cap ``K - beta (x - pi/2)^2``, the cap, a blend from the cap down to 1
    filling ``]pi/2, a[``, the plateau, a blend into a linear ramp and the
    ramp down to 0 at ``pi``.  The linear end pieces keep ``chi sin x`` odd
    about both endpoints.  Blends use a smoothstep of order
    :data:`SMOOTH_ORDER`, so ``chi`` is ``C^5``.
    """

    a: float
    b: float
    K: float
    beta: float
    knots: np.ndarray
    pieces: tuple
    step: Polynomial = field(repr=False)

    @property
    def curvature(self) -> float:
        """``chi''(pi/2) = -2 beta``."""
        return -2.0 * self.beta

    def _locate(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def derivative_pieces(self, x: float, order: int) -> list:
        """Polynomials ``chi, chi', ..., chi^(order)`` of the piece containing ``x``."""
        p = self.pieces[int(self._locate(np.array([x]))[0])].polynomial(self.step)
        out = [p]
        for _ in range(order):
            out.append(out[-1].deriv())
        return out

    def derivatives(self, x, order: int = 2) -> tuple:
        """``(chi, chi', ..., chi^(order))`` evaluated at ``x``."""
        x = np.asarray(x, dtype=np.float64)
        flat = x.reshape(-1)
        idx = self._locate(flat)
        outs = [np.empty_like(flat) for _ in range(order + 1)]
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if not mask.any():
                continue
            vals = piece.evaluate(flat[mask], order, self.step)
            for r in range(order + 1):
                outs[r][mask] = vals[r]
        return tuple(o.reshape(x.shape) for o in outs)

    def chi(self, x):
        return self.derivatives(x, 0)[0]

    def cap_excess(self, x: np.ndarray):
        """``eps = chi - cap`` and ``eps'`` next to ``pi/2``; zero on the cap side."""
        s = x - HALF_PI
        width = self.a - HALF_PI
        t = np.clip(s / width, 0.0, 1.0)
        one_minus_cap = 1.0 - (self.K - self.beta * s * s)
        st = self.step(t)
        eps = np.where(s > 0, st * one_minus_cap, 0.0)
        deps = np.where(s > 0, self.step.deriv()(t) / width * one_minus_cap + st * 2.0 * self.beta * s, 0.0)
        return eps, deps

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "K": self.K, "curvature": self.curvature,
                "knots": self.knots.tolist(), "smoothness": SMOOTH_ORDER}


def build_chi(a: float, b: float, K: float, curvature: float | None = None) -> BumpProfile:
    """Construct the bump profile for ``pi/2 < a < b < pi`` and ``K > 1``.

    Parameters
    ----------
    curvature : float, optional
        Prescribed ``chi''(pi/2) < 0``.  The default ``-K`` is reduced when
        needed so that the cap stays above 1 at ``a``.

    Raises
    ------
    ValidationError
        On parameters outside the admissible ranges.
    NumericalError
        If the assembled profile fails its sign checks.
    """
    a, b, K = float(a), float(b), float(K)
    if not a > HALF_PI:
        raise ValidationError("need a > pi/2 so that cos x < 0 on [a, b]")
    if not (a < b < PI):
        raise ValidationError("need a < b < pi")
    if not K > 1:
        raise ValidationError("need K > 1")
    width = a - HALF_PI
    if curvature is None:
        beta = min(0.5 * K, (K - 1.0) / (2.0 * width ** 2))
    else:
        if not curvature < 0:
            raise ValidationError("curvature at pi/2 must be negative")
        beta = -0.5 * float(curvature)
        if K - beta * width ** 2 <= 1.0:
            raise ValidationError("curvature too strong: the cap drops below 1 before a")
    w = min(0.25 * PI, math.sqrt((K - 1.0) / (2.0 * beta)))
    x_a, x_b = HALF_PI - w, HALF_PI - 0.5 * w
    x_d = 0.5 * (b + PI)
    lam = min(1.0, 0.9 * (K - beta * w * w)) / HALF_PI
    theta = 0.5
    step = smoothstep(SMOOTH_ORDER)
    knots = np.array([0.0, x_a, x_b, HALF_PI, a, b, x_d, PI])

    X = Polynomial([0.0, 1.0])
    cap = K - beta * (X - HALF_PI) ** 2
    lin = lam * X
    one = Polynomial([1.0])
    # ramp and its blend partner in the variable x - pi so that chi(pi) is exactly 0
    shifted = dict(domain=[PI, PI + 1.0], window=[0.0, 1.0])
    ramp = Polynomial([0.0, -theta / (PI - b)], **shifted)
    one_r = Polynomial([1.0], **shifted)
    pieces = (
        _Piece(0.0, x_a, lin),
        _Piece(x_a, x_b, lin, cap),
        _Piece(x_b, HALF_PI, cap),
        _Piece(HALF_PI, a, cap, one),
        _Piece(a, b, one),
        _Piece(b, x_d, one_r, ramp),
        _Piece(x_d, PI, ramp),
    )
    prof = BumpProfile(a, b, K, beta, knots, pieces, step)
    _check_profile(prof)
    return prof


def _check_profile(prof: BumpProfile, samples: int = 8193) -> None:
    x = np.linspace(0.0, PI, samples)
    chi, d1 = prof.derivatives(x, 1)
    inner = (x > 0) & (x < PI)
    ok = (np.all(chi[inner] > 0) and chi.max() <= prof.K * (1 + 1e-14)
          and np.all(d1[(x > 0) & (x < HALF_PI)] > 0)
          and np.all(d1[(x > HALF_PI) & (x < prof.a)] < 0)
          and np.all(d1[(x > prof.b) & (x < PI)] < 0))
    if not ok:
        raise NumericalError("bump profile violates its sign conditions")


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Metric1D:
    """Metric ``c(x) dx^2`` given by vectorized evaluators of ``c`` and ``c'``.

    ``breakpoints`` lists points where ``c`` is only finitely smooth; the
    arclength quadrature aligns panels with them.
    """

    c: Callable[[np.ndarray], np.ndarray]
    dc: Callable[[np.ndarray], np.ndarray]
    analytic_constant: bool = False
    value: float | None = None
    breakpoints: tuple = (0.0, PI)

    @classmethod
    def constant(cls, value: float) -> "Metric1D":
        v = float(value)
        if not (math.isfinite(v) and v > 0):
            raise ValidationError("constant metric needs a positive value")
        return cls(lambda x: np.full(np.shape(x), v), lambda x: np.zeros(np.shape(x)), True, v)

    def kappa(self, x):
        """Density ``sqrt(c)``."""
        return np.sqrt(self.c(np.asarray(x, dtype=np.float64)))

    def c_min(self, samples: int = 4096, interior: bool = True) -> float:
        """Minimum of ``c`` over a uniform grid (endpoints excluded when ``interior``)."""
        x = np.linspace(0.0, PI, samples + 1)
        if interior:
            x = x[1:-1]
        return float(np.min(self.c(x)))

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value} if self.analytic_constant else {"kind": "custom"}


@dataclass(frozen=True)
class CounterexampleMetric(Metric1D):
    """Metric built from a :class:`BumpProfile`."""

    profile: BumpProfile | None = None
    taylor_radius: float = TAYLOR_RADIUS

    def c_direct(self, x):
        """The quotient ``(chi' sin + chi cos)^2 / (K^2 - chi^2 sin^2)`` without the fill."""
        chi, d1 = self.profile.derivatives(x, 1)
        h = d1 * np.sin(x) + chi * np.cos(x)
        p = chi * np.sin(x)
        return h * h / ((self.profile.K - p) * (self.profile.K + p))

    def to_dict(self) -> dict:
        return {"kind": "counterexample", **self.profile.to_dict()}


def _taylor_c(prof: BumpProfile, x: np.ndarray) -> np.ndarray:
    """Quotient of the factored numerator and denominator near ``pi/2``.

    With ``s = x - pi/2`` and ``eps = chi - cap`` (``O(s^6)``), both
    ``h = s h~`` and ``K^2 - P^2 = s^2 g~`` are factored exactly, so the
    ratio ``h~^2 / g~`` stays accurate as ``s -> 0``.
    """
    K, beta = prof.K, prof.beta
    s = x - HALF_PI
    eps, deps = prof.cap_excess(x)
    safe = np.where(s == 0.0, 1.0, s)
    sinc = np.sinc(s / PI)
    half = np.sinc(0.5 * s / PI)
    h_t = (-2.0 * beta * np.cos(s) - (K - beta * s * s) * sinc
           + np.where(s == 0.0, 0.0, (deps * np.cos(s) - eps * np.sin(s)) / safe))
    p = (K - beta * s * s + eps) * np.cos(s)
    g_t = (0.5 * K * half * half + (beta - np.where(s == 0.0, 0.0, eps / (safe * safe))) * np.cos(s)) * (K + p)
    return h_t * h_t / g_t


def counterexample_metric(profile: BumpProfile) -> CounterexampleMetric:
    """Metric ``c = (chi' sin x + chi cos x)^2 / (K^2 - chi^2 sin^2 x)``.

    Within a small radius of ``pi/2`` (at most ``1e-3``) evaluation switches
    to the factored quotient, which equals ``1 - chi''(pi/2)/K`` at the
    removable point.

    Raises
    ------
    NumericalError
        If the denominator is not positive away from ``pi/2``.
    """
    prof = profile
    radius = min(TAYLOR_RADIUS, 0.5 * (prof.a - HALF_PI), 0.25 * (HALF_PI - prof.knots[1]))
    x_chk = np.linspace(0.0, PI, 8193)
    chk = prof.chi(x_chk) * np.sin(x_chk)
    far = np.abs(x_chk - HALF_PI) >= radius
    if np.any(prof.K * prof.K - chk[far] ** 2 <= 0):
        raise NumericalError("invalid profile: K^2 - chi^2 sin^2 x vanishes away from pi/2")

    def c(x):
        x = np.asarray(x, dtype=np.float64)
        chi, d1 = prof.derivatives(x, 1)
        sn, cs = np.sin(x), np.cos(x)
        h = d1 * sn + chi * cs
        p = chi * sn
        near = np.abs(x - HALF_PI) < radius
        with np.errstate(divide="ignore", invalid="ignore"):
            out = h * h / ((prof.K - p) * (prof.K + p))
        if np.any(near):
            out = np.where(near, _taylor_c(prof, np.where(near, x, HALF_PI)), out)
        return out

    def dc(x):
        x = np.asarray(x, dtype=np.float64)
        chi, d1, d2 = prof.derivatives(x, 2)
        sn, cs = np.sin(x), np.cos(x)
        h = d1 * sn + chi * cs
        dh = d2 * sn + 2.0 * d1 * cs - chi * sn
        p = chi * sn
        g = (prof.K - p) * (prof.K + p)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (2.0 * h * dh * g + 2.0 * p * h ** 3) / (g * g)
        near = np.abs(x - HALF_PI) < radius
        if np.any(near):
            # Richardson-extrapolated central difference of the factored quotient
            delta = 1e-3 * radius
            xs = np.where(near, x, HALF_PI)
            d_full = (c(xs + delta) - c(xs - delta)) / (2.0 * delta)
            d_half = (c(xs + 0.5 * delta) - c(xs - 0.5 * delta)) / delta
            fd = (4.0 * d_half - d_full) / 3.0
            out = np.where(near, fd, out)
        return out

    return CounterexampleMetric(c, dc, False, None, tuple(prof.knots.tolist()), prof, radius)


# ---------------------------------------------------------------- operators

def fd_grid(grid_points: int) -> tuple[np.ndarray, float]:
    """Uniform grid of ``grid_points`` intervals on ``[0, pi]`` and its step."""
    h = PI / grid_points
    return np.linspace(0.0, PI, grid_points + 1), h


def laplace_beltrami_apply(metric: Metric1D, u, h: float) -> np.ndarray:
    """Flux-form ``(1/sqrt c) D_h ((1/sqrt c) D_h u)`` on a uniform grid.

    ``u`` holds samples at ``x_i = i h`` including both Dirichlet endpoints;
    the result has the same length with zeros at the endpoints.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.size - 1
    if n - 1 < 64:
        raise ValidationError("need at least 64 interior grid points")
    if abs(n * h - PI) > 1e-9 * PI:
        raise ValidationError("grid step does not match the sample count on [0, pi]")
    if abs(u[0]) > 1e-12 * max(np.abs(u).max(), 1.0) or abs(u[-1]) > 1e-12 * max(np.abs(u).max(), 1.0):
        raise ValidationError("u must vanish at both endpoints")
    x = np.linspace(0.0, PI, n + 1)
    mid = 0.5 * (x[:-1] + x[1:])
    flux = np.diff(u) / (h * np.sqrt(metric.c(mid)))
    out = np.zeros_like(u)
    out[1:-1] = np.diff(flux) / (h * np.sqrt(metric.c(x[1:-1])))
    return out


def arclength(metric: Metric1D, panels: int = ARC_PANELS) -> float:
    """``L = int_0^pi sqrt(c) dx`` with Gauss-Legendre panels between breakpoints."""
    if metric.analytic_constant:
        return math.sqrt(metric.value) * PI
    bps = sorted(set(float(v) for v in metric.breakpoints) | {0.0, PI})
    return float(sum(nm.integrate_1d(metric.kappa, lo, hi, panels) for lo, hi in zip(bps[:-1], bps[1:])))


@dataclass(frozen=True)
class SpectrumEntry:
    k: int
    eigenvalue: float


def dirichlet_spectrum(metric: Metric1D, kmax: int) -> list[SpectrumEntry]:
    """``k^2 pi^2 / L^2`` for ``k = 1..kmax``."""
    if kmax < 1:
        raise ValidationError("kmax must be >= 1")
    L = arclength(metric)
    return [SpectrumEntry(k, k * k * PI * PI / (L * L)) for k in range(1, kmax + 1)]


def sturm_liouville_fd(metric: Metric1D, grid_points: int, kmax: int,
                       backend: str | None = None) -> list[SpectrumEntry]:
    """Lowest eigenvalues of the symmetric FD discretization of ``-Delta_g``.

    With ``w_i = sqrt(c(x_i))`` and ``p = 1/sqrt(c)`` at half points the
    generalized problem ``A u = lam W u`` is symmetrized to
    ``W^-1/2 A W^-1/2`` and solved by Sturm bisection.
    """
    if grid_points < 256:
        raise ValidationError("need at least 256 grid intervals")
    if not 1 <= kmax <= grid_points // 8:
        raise ValidationError("need 1 <= kmax <= grid_points / 8")
    x, h = fd_grid(grid_points)
    mid = 0.5 * (x[:-1] + x[1:])
    p = 1.0 / np.sqrt(metric.c(mid))
    w = np.sqrt(metric.c(x[1:-1]))
    if not (np.all(np.isfinite(p)) and np.all(w > 0)):
        raise NumericalError("metric degenerates on the FD grid")
    diag = (p[:-1] + p[1:]) / (h * h * w)
    off = -p[1:-1] / (h * h * np.sqrt(w[:-1] * w[1:]))
    vals = nm.tridiagonal_lowest(diag, off, kmax, backend=backend)
    return [SpectrumEntry(k + 1, float(v)) for k, v in enumerate(vals)]


# ---------------------------------------------------------------- resonance

def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Smallest-denominator fraction in ``[lo, hi]`` via continued fractions."""
    fl = lo.numerator // lo.denominator
    if Fraction(fl) == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    inner = _simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / inner


def resonance_check(L: float, qmax: int, tol: float):
    """Smallest-denominator ``p/q`` with ``q <= qmax`` and ``|L/pi - p/q| <= tol``.

    Returns ``(p, q)`` or ``None``.  ``None`` certifies that ``L/pi`` has no
    rational approximation at that tolerance with denominator up to ``qmax``.
    """
    if not (math.isfinite(L) and L > 0):
        raise ValidationError("L must be positive")
    if qmax < 1 or not tol > 0:
        raise ValidationError("need qmax >= 1 and tol > 0")
    rho = Fraction(L / PI)
    t = Fraction(tol)
    lo, hi = max(rho - t, Fraction(0)), rho + t
    if lo == 0:
        best = Fraction(0)
    else:
        best = _simplest_between(lo, hi)
    if best.denominator > qmax:
        return None
    # same denominator, numerator nearest to rho
    q = best.denominator
    p = round(rho * q)
    return (int(p), int(q))


# ---------------------------------------------------------------- reports

def metric_record(metric: Metric1D, grid_points: int, kmax: int = 10) -> dict:
    """JSON-ready ``{x, c, L, eigenvalues}`` for plotting."""
    x, _ = fd_grid(grid_points)
    return {
        "x": x.tolist(),
        "c": metric.c(x).tolist(),
        "L": arclength(metric),
        "eigenvalues": [e.eigenvalue for e in dirichlet_spectrum(metric, kmax)],
    }


def counterexample_report(profile: BumpProfile, grids=(512, 1024, 2048), kmax: int = 10) -> dict:
    """Residual, invisibility, positivity and resonance facts for the counterexample."""
    met = counterexample_metric(profile)
    residuals = []
    for n in grids:
        x, h = fd_grid(n)
        u2 = -profile.chi(x) * np.sin(x)
        residuals.append(float(np.abs(laplace_beltrami_apply(met, u2, h) + u2).max()))
    orders = [math.log2(r0 / r1) for r0, r1 in zip(residuals[:-1], residuals[1:])]
    x, _ = fd_grid(grids[-1])
    inv = (1.0 - profile.chi(x)) * np.sin(x)
    on_ab = (x >= profile.a) & (x <= profile.b)
    cvals = met.c(x)
    L = arclength(met)
    return {
        "profile": profile.to_dict(),
        "grid_points": list(grids),
        "residual_inf": residuals[-1],
        "residuals": residuals,
        "residual_orders": orders,
        "invisible_max_on_omega": float(np.abs(inv[on_ab]).max()),
        "invisible_max": float(np.abs(inv).max()),
        "c_min_interior": float(cvals[1:-1].min()),
        "c_endpoints": [float(cvals[0]), float(cvals[-1])],
        "c_at_half_pi": float(met.c(np.array([HALF_PI]))[0]),
        "c_max_on_ab": float(cvals[on_ab].max()),
        "L": L,
        "L_over_pi": L / PI,
        "resonance": resonance_check(L, 50, 1e-6),
    }
