"""Reflected rays on the interval and geometric control times.

On ``[0, pi]`` every boundary point is hyperbolic, so a ray of the wave
operator with speed ``s = sqrt(d)`` moves at constant speed and reverses
direction at ``0`` and ``pi``.  Trajectories are computed from breakpoints in
closed form, without time stepping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "GRID_POINTS",
    "Ray",
    "first_hit_time",
    "gcc_satisfied",
    "gcc_time",
    "gcc_time_analytic",
    "gcc_time_bruteforce",
    "trace_ray",
]

PI = math.pi
GRID_POINTS = 2000


@dataclass(frozen=True)
class Ray:
    """Start point ``x`` in ``[0, pi]``, direction ``+1``/``-1`` and speed ``sqrt(d)``."""

    x: float
    direction: int
    speed: float

    def __post_init__(self):
        if not 0.0 <= self.x <= PI:
            raise ValidationError("ray must start in [0, pi]")
        if self.direction not in (1, -1):
            raise ValidationError("direction must be +1 or -1")
        if not (math.isfinite(self.speed) and self.speed > 0):
            raise ValidationError("speed must be positive")


def _check_window(omega) -> tuple[float, float]:
    a, b = float(omega[0]), float(omega[1])
    if not (0.0 <= a < b <= PI):
        raise ValidationError(f"window must satisfy 0 <= a < b <= pi, got ({a}, {b})")
    return a, b


def trace_ray(r: Ray, T: float) -> list[tuple[float, float]]:
    """Breakpoints ``(t, x)`` of the trajectory on ``[0, T]``.

    The list starts at ``(0, r.x)``, contains every reflection and ends at
    time ``T``.
    """
    if not (math.isfinite(T) and T > 0):
        raise ValidationError("T must be positive")
    t, x, sgn = 0.0, float(r.x), r.direction
    pts = [(0.0, x)]
    while True:
        wall = PI if sgn > 0 else 0.0
        dt = abs(wall - x) / r.speed
        if dt == 0.0:            # sitting on the wall: reflect in place
            sgn = -sgn
            continue
        if t + dt >= T:
            pts.append((T, x + sgn * r.speed * (T - t)))
            return pts
        t += dt
        x = wall
        sgn = -sgn
        pts.append((t, x))


def _segment_entry(t0, xa, t1, xb, a, b, speed):
    """Infimum of times in a segment with position in the open ``]a, b[``."""
    if xb > xa:
        if xa >= b or xb <= a:
            return None
        return t0 + max(0.0, a - xa) / speed
    if xb < xa:
        if xa <= a or xb >= b:
            return None
        return t0 + max(0.0, xa - b) / speed
    return None


def first_hit_time(r: Ray, omega) -> float:
    """Infimum of times at which the ray lies in the open window."""
    a, b = _check_window(omega)
    horizon = 2.0 * PI / r.speed * 1.0000001
    pts = trace_ray(r, horizon)
    for (t0, xa), (t1, xb) in zip(pts[:-1], pts[1:]):
        hit = _segment_entry(t0, xa, t1, xb, a, b, r.speed)
        if hit is not None:
            return hit
    raise NumericalError("ray never met a nonempty window within one period")


def gcc_time_analytic(omega, d: float) -> float:
    """Worst first-hitting time ``2 max(a, pi - b) / sqrt(d)``."""
    a, b = _check_window(omega)
    if not d > 0:
        raise ValidationError("speed must be positive")
    return 2.0 * max(a, PI - b) / math.sqrt(d)


def gcc_time_bruteforce(omega, d: float, grid_points: int = GRID_POINTS) -> float:
    """Largest first-hitting time over a grid of start points and both directions."""
    _check_window(omega)
    if not d > 0:
        raise ValidationError("speed must be positive")
    s = math.sqrt(d)
    worst = 0.0
    for x0 in np.linspace(0.0, PI, grid_points):
        for sgn in (1, -1):
            worst = max(worst, first_hit_time(Ray(float(x0), sgn, s), omega))
    return worst


def gcc_time(omega, d: float) -> float:
    """Minimal control time for one speed, brute force checked against the formula.

    Raises
    ------
    NumericalError
        If the brute-force and analytic values disagree beyond four grid cells.
    """
    bf = gcc_time_bruteforce(omega, d)
    ana = gcc_time_analytic(omega, d)
    if abs(bf - ana) > 4.0 * PI / (GRID_POINTS - 1) / math.sqrt(d) + 1e-12:
        raise NumericalError(f"ray time mismatch: brute force {bf}, analytic {ana}")
    return bf


def gcc_satisfied(omega, T: float, speeds) -> bool:
    """True iff ``T`` exceeds the control time of every speed."""
    if not (math.isfinite(T) and T > 0):
        raise ValidationError("T must be positive")
    return all(T > gcc_time(omega, float(d)) for d in speeds)
