"""Reflected rays on [0, pi] and minimal geometric-control times."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simulwave import rays1d as rays
from simulwave.errors import ValidationError

PI = math.pi
RES = PI / (rays.GRID_POINTS - 1)


def position_oracle(x0, direction, speed, t):
    """Unfold the billiard onto a circle of length 2 pi."""
    y = (x0 if direction > 0 else 2 * PI - x0) + speed * t
    y = math.fmod(y, 2 * PI)
    return y if y <= PI else 2 * PI - y


def test_ray_validation():
    with pytest.raises(ValidationError):
        rays.Ray(-0.1, 1, 1.0)
    with pytest.raises(ValidationError):
        rays.Ray(1.0, 0, 1.0)
    with pytest.raises(ValidationError):
        rays.Ray(1.0, 1, 0.0)
    with pytest.raises(ValidationError):
        rays.trace_ray(rays.Ray(1.0, 1, 1.0), 0.0)


def test_trace_examples():
    pts = rays.trace_ray(rays.Ray(PI / 2, 1, 1.0), PI / 2)
    assert pts[0] == (0.0, PI / 2)
    assert pts[-1][0] == pytest.approx(PI / 2) and pts[-1][1] == pytest.approx(PI)
    pts = rays.trace_ray(rays.Ray(0.0, 1, 1.0), 2 * PI)
    assert pts[-1][1] == pytest.approx(0.0, abs=1e-12)
    assert [p[1] for p in pts] == pytest.approx([0.0, PI, 0.0])
    slow = rays.trace_ray(rays.Ray(0.3, -1, 1.0), 5.0)
    fast = rays.trace_ray(rays.Ray(0.3, -1, 2.0), 2.5)
    assert [p[0] for p in fast] == pytest.approx([p[0] / 2 for p in slow])
    assert [p[1] for p in fast] == pytest.approx([p[1] for p in slow])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, PI), st.sampled_from([-1, 1]), st.floats(0.1, 4.0), st.floats(0.01, 30.0))
def test_trace_matches_unfolding(x0, direction, speed, horizon):
    pts = rays.trace_ray(rays.Ray(x0, direction, speed), horizon)
    assert pts[-1][0] == pytest.approx(horizon)
    for (t0, x_a), (t1, x_b) in zip(pts[:-1], pts[1:]):
        assert t1 > t0
        assert abs(abs(x_b - x_a) - speed * (t1 - t0)) <= 1e-9
        assert 0.0 <= x_a <= PI and 0.0 <= x_b <= PI
    for t, x in pts:
        assert x == pytest.approx(position_oracle(x0, direction, speed, t), abs=1e-9)
    for t, x in pts[1:-1]:
        assert x in (0.0, PI)


def test_gcc_time_examples():
    assert rays.gcc_time((PI / 4, PI / 2), 1.0) == pytest.approx(PI, abs=1e-2)
    assert rays.gcc_time((0.0, PI), 3.0) == 0.0
    assert rays.gcc_time((PI / 4, PI / 2), 4.0) == pytest.approx(PI / 2, abs=1e-2)
    with pytest.raises(ValidationError):
        rays.gcc_time((1.0, 1.0), 1.0)


def test_analytic_vs_bruteforce_random_windows(rng):
    for _ in range(100):
        a, b = np.sort(rng.uniform(0, PI, 2))
        if b - a < 1e-3:
            continue
        d = float(rng.choice([1.0, 2.0, 4.0, 9.0]))
        ana = rays.gcc_time_analytic((a, b), d)
        bf = rays.gcc_time_bruteforce((a, b), d)
        assert abs(ana - bf) <= 4 * RES / math.sqrt(d) + 1e-12


@pytest.mark.parametrize("d", [1.0, 2.0, 4.0, 9.0])
def test_speed_scaling(d):
    w = (0.4, 1.3)
    assert rays.gcc_time(w, d) == pytest.approx(rays.gcc_time(w, 1.0) / math.sqrt(d), abs=2 * RES)


def test_monotone_in_window():
    inner = rays.gcc_time((1.0, 1.2), 1.0)
    assert rays.gcc_time((0.8, 1.2), 1.0) <= inner
    assert rays.gcc_time((1.0, 2.0), 1.0) <= inner


def test_gcc_satisfied_examples():
    w = (PI / 4, PI / 2)
    assert rays.gcc_satisfied(w, 3.2, [1.0, 4.0])
    assert not rays.gcc_satisfied(w, 3.0, [1.0, 4.0])
    assert rays.gcc_satisfied((0.0, PI), 1e-6, [1.0, 7.0])
    with pytest.raises(ValidationError):
        rays.gcc_satisfied(w, 0.0, [1.0])


def test_first_hit_open_window():
    # a ray touching only the closed endpoint of the window never meets it
    r = rays.Ray(0.0, 1, 1.0)
    assert rays.first_hit_time(r, (0.0, 1.0)) == 0.0
    r = rays.Ray(1.0, 1, 1.0)
    assert rays.first_hit_time(r, (0.5, 1.0)) == pytest.approx(2 * PI - 2.0)
