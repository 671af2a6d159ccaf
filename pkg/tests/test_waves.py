"""Spectral adjoint solutions, Duhamel forward solver and energy."""
import json
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from simulwave import waves as wv
from simulwave.errors import ValidationError
from simulwave.kalman import SpeedSystem

PI = math.pi


def rand_data(rng, n, N):
    return wv.ModalData(rng.standard_normal((n, N)), rng.standard_normal((n, N)))


def test_modal_data_layout(rng):
    data = rand_data(rng, 3, 5)
    vec = data.to_vector()
    assert vec.shape == (30,)
    assert np.array_equal(wv.ModalData.from_vector(vec, 3, 5).pos, data.pos)
    assert vec[wv.row_index(2, 4, 1, 5)] == data.vel[2, 3]
    assert vec[wv.row_index(1, 1, 0, 5)] == data.pos[1, 0]
    with pytest.raises(ValidationError):
        wv.ModalData(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValidationError):
        wv.ModalData(np.full((1, 2), np.nan), np.zeros((1, 2)))


def test_window_validation():
    wv.ObservationWindow(0.0, PI, 1.0)
    for bad in [(1.0, 1.0, 1.0), (-0.1, 1.0, 1.0), (0.0, 3.5, 1.0), (0.0, 1.0, 0.0)]:
        with pytest.raises(ValidationError):
            wv.ObservationWindow(*bad)


# ---------------------------------------------------------------- adjoint

def test_adjoint_examples():
    sys1 = SpeedSystem([1.0], [1.0])
    pos = np.zeros((1, 3))
    pos[0, 0] = 1.0
    d = wv.ModalData(pos, np.zeros((1, 3)))
    t, x = 0.7, 1.1
    assert wv.adjoint_eval(sys1, d, t, x)[0] == pytest.approx(math.cos(t) * math.sin(x), abs=1e-15)
    sys4 = SpeedSystem([4.0], [1.0])
    d = wv.ModalData(np.zeros((1, 3)), pos.copy())
    assert wv.adjoint_eval(sys4, d, t, x)[0] == pytest.approx(math.sin(2 * t) / 2 * math.sin(x), abs=1e-15)


def test_adjoint_solves_wave_equation(rng):
    sys = SpeedSystem([1.0, 4.0], [[1.0], [1.0]])
    data = rand_data(rng, 2, 6)
    t, x, h = 0.9, 1.3, 1e-3
    f = lambda tt, xx: wv.adjoint_eval(sys, data, tt, xx)
    vtt = (f(t + h, x) - 2 * f(t, x) + f(t - h, x)) / h ** 2
    vxx = (f(t, x + h) - 2 * f(t, x) + f(t, x - h)) / h ** 2
    np.testing.assert_allclose(vtt, sys.speeds * vxx, rtol=1e-4, atol=1e-4)
    xs = np.linspace(0, PI, 7)
    vt0 = (f(h, xs) - f(-h, xs)) / (2 * h)
    ref = np.array([sum(data.vel[j, k] * np.sin((k + 1) * xs) for k in range(6)) for j in range(2)])
    np.testing.assert_allclose(vt0, ref, atol=1e-4)
    np.testing.assert_allclose(f(0.0, np.array([0.0, PI])), 0.0, atol=1e-12)


def test_adjoint_broadcasts(rng):
    sys = SpeedSystem([1.0, 2.0], [[1.0], [0.5]])
    data = rand_data(rng, 2, 4)
    tt, xx = np.meshgrid(np.linspace(0, 2, 5), np.linspace(0, 3, 4), indexing="ij")
    full = wv.adjoint_eval(sys, data, tt, xx)
    assert full.shape == (2, 5, 4)
    assert full[1, 3, 2] == pytest.approx(wv.adjoint_eval(sys, data, tt[3, 2], xx[3, 2])[1])


# ---------------------------------------------------------------- observation

def test_observation_examples(rng):
    win = wv.ObservationWindow(0.5, 2.5, 3.0)
    sys = SpeedSystem([1.0, 1.0], [[2.0], [1.0]])
    phi = rng.standard_normal(4)
    data = wv.ModalData(np.array([phi, -2 * phi]), np.zeros((2, 4)))
    sig = wv.observation(sys, data, win, 31, 21)
    assert np.abs(sig.values).max() <= 1e-14
    sys1 = SpeedSystem([1.0], [1.0])
    d1 = rand_data(rng, 1, 3)
    sig = wv.observation(sys1, d1, win, 11, 9)
    tt, xx = np.meshgrid(sig.t, sig.x, indexing="ij")
    np.testing.assert_allclose(sig.values[0], wv.adjoint_eval(sys1, d1, tt, xx)[0], atol=1e-14)
    zero = wv.ModalData.zeros(1, 3)
    assert np.all(wv.observation(sys1, zero, win, 5, 5).values == 0.0)


def test_observation_multi_channel(rng):
    sys = SpeedSystem([1, 1, 2], [[1, 0], [0, 1], [1, 0]])
    win = wv.ObservationWindow(0.2, 2.0, 2.0)
    data = rand_data(rng, 3, 4)
    sig = wv.observation(sys, data, win, 9, 7)
    assert sig.m == 2 and sig.values.shape == (2, 9, 7)
    tt, xx = np.meshgrid(sig.t, sig.x, indexing="ij")
    v = wv.adjoint_eval(sys, data, tt, xx)
    np.testing.assert_allclose(sig.values[1], v[1], atol=1e-14)
    np.testing.assert_allclose(sig.values[0], v[0] + v[2], atol=1e-14)


# ---------------------------------------------------------------- control signal I/O

def test_control_signal_csv_round_trip(tmp_path, rng):
    win = wv.ObservationWindow(0.3, 1.9, 2.0)
    sig = wv.ControlSignal.zeros(win, 2, 5, 7)
    sig.values[...] = rng.standard_normal(sig.values.shape)
    paths = sig.to_csv(tmp_path / "control.csv")
    assert [p.name for p in paths] == ["control_c0.csv", "control_c1.csv"]
    head = paths[0].read_text().splitlines()[0]
    assert head == "t,x,value"
    back = wv.ControlSignal.from_csv(paths, win)
    np.testing.assert_array_equal(back.values, sig.values)
    meta = json.loads(json.dumps(sig.metadata(n=3, N=4)))
    assert meta == {"n": 3, "m": 2, "N": 4, "T": 2.0, "omega": [0.3, 1.9]}
    one = wv.ControlSignal.zeros(win, 1, 3, 3)
    assert [p.name for p in one.to_csv(tmp_path / "f.csv")] == ["f.csv"]


def test_control_signal_validation():
    win = wv.ObservationWindow(0.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        wv.ControlSignal(np.linspace(0, 2, 3), np.linspace(0, 1, 3), np.zeros((1, 3, 4)))
    with pytest.raises(ValidationError):
        wv.ControlSignal(np.linspace(0, 1, 3), np.linspace(0, 1, 3), np.full((1, 3, 3), np.inf))
    sig = wv.ControlSignal.zeros(win, 1, 3, 3)
    assert sig.T == 1.0 and sig.window == (0.0, 1.0)


# ---------------------------------------------------------------- forward solve

def test_free_evolution_conserves_energy(rng):
    for N, T in [(4, 3.0), (16, 10.0)]:
        sys = SpeedSystem([1.0, 2.5, 4.0], [[1.0], [0.0], [2.0]])
        init = rand_data(rng, 3, N)
        win = wv.ObservationWindow(0.4, 2.0, T)
        f = wv.ControlSignal.zeros(win, 1, wv.default_time_samples(sys, N, T), 5)
        out = wv.forward_solve(sys, f, init)
        np.testing.assert_allclose(wv.energy(sys, out), wv.energy(sys, init), rtol=1e-10)
        np.testing.assert_allclose(out.to_vector(), wv.free_evolution(sys, init, T).to_vector(),
                                   atol=1e-12 * np.abs(init.to_vector()).max() * 4 * N)


def test_free_evolution_matches_adjoint_formula(rng):
    sys = SpeedSystem([1.0, 3.0], [[1.0], [1.0]])
    init = rand_data(rng, 2, 5)
    T = 2.3
    moved = wv.free_evolution(sys, init, T)
    xs = np.linspace(0.1, 3.0, 9)
    direct = wv.adjoint_eval(sys, init, T, xs)
    via = wv.adjoint_eval(sys, moved, 0.0, xs)
    np.testing.assert_allclose(via, direct, atol=1e-12)


def test_time_reversal(rng):
    sys = SpeedSystem([1.0, 4.0], [[1.0], [1.0]])
    init = rand_data(rng, 2, 8)
    T = 5.0
    win = wv.ObservationWindow(0.5, 2.6, T)
    f = wv.ControlSignal.zeros(win, 1, wv.default_time_samples(sys, 8, T), 5)
    fwd = wv.forward_solve(sys, f, init)
    back = wv.forward_solve(sys, f, wv.ModalData(fwd.pos, -fwd.vel))
    np.testing.assert_allclose(back.pos, init.pos, atol=1e-10)
    np.testing.assert_allclose(-back.vel, init.vel, atol=1e-10)


def test_resonant_forcing_closed_form():
    # u'' + u = cos t from rest gives u = t sin t / 2
    sys = SpeedSystem([1.0], [1.0])
    T = 6.0
    win = wv.ObservationWindow(0.0, PI, T)
    t = np.linspace(0, T, 1201)
    x = np.linspace(0, PI, 401)
    vals = (np.cos(t)[:, None] * np.sin(x)[None, :])[None]
    out = wv.forward_solve(sys, wv.ControlSignal(t, x, vals), wv.ModalData.zeros(1, 4))
    assert out.pos[0, 0] == pytest.approx(T * math.sin(T) / 2, abs=1e-8)
    assert out.vel[0, 0] == pytest.approx((math.sin(T) + T * math.cos(T)) / 2, abs=1e-8)
    np.testing.assert_allclose(out.pos[0, 1:], 0.0, atol=1e-10)


def test_forward_against_ode_integrator(rng):
    sys = SpeedSystem([1.0, 2.0], [[1.0], [-0.5]])
    T, N = 2.5, 3
    win = wv.ObservationWindow(0.4, 2.2, T)
    t = np.linspace(0, T, 801)
    x = np.linspace(win.omega_lo, win.omega_hi, 201)
    field = lambda tt, xx: np.exp(-tt) * np.cos(3 * xx) + tt * xx
    vals = field(t[:, None], x[None, :])[None]
    init = rand_data(rng, 2, N)
    out = wv.forward_solve(sys, wv.ControlSignal(t, x, vals), init)
    lo, hi = win.omega_lo, win.omega_hi
    xq, wq = np.polynomial.legendre.leggauss(40)
    xq = 0.5 * (hi - lo) * xq + 0.5 * (hi + lo)
    wq = 0.5 * (hi - lo) * wq
    for j in range(2):
        for k in range(1, N + 1):
            om2 = sys.speeds[j] * k * k
            forcing = lambda s: sys.control_matrix[j, 0] * 2 / PI * np.dot(wq, field(s, xq) * np.sin(k * xq))
            sol = solve_ivp(lambda s, y: [y[1], -om2 * y[0] + forcing(s)], (0, T),
                            [init.pos[j, k - 1], init.vel[j, k - 1]], rtol=1e-11, atol=1e-12)
            assert out.pos[j, k - 1] == pytest.approx(sol.y[0, -1], abs=1e-7)
            assert out.vel[j, k - 1] == pytest.approx(sol.y[1, -1], abs=1e-7)


def test_zero_control_entry_decouples(rng):
    sys = SpeedSystem([1.0, 2.0], [[1.0], [0.0]])
    T = 3.0
    win = wv.ObservationWindow(0.2, 2.0, T)
    sig = wv.ControlSignal.zeros(win, 1, 301, 41)
    sig.values[...] = rng.standard_normal(sig.values.shape)
    out = wv.forward_solve(sys, sig, wv.ModalData.zeros(2, 4))
    assert np.all(out.pos[1] == 0.0) and np.all(out.vel[1] == 0.0)
    assert np.abs(out.pos[0]).max() > 0


def test_forward_rejects_under_resolved():
    sys = SpeedSystem([4.0], [1.0])
    win = wv.ObservationWindow(0.0, 1.0, 10.0)
    with pytest.raises(ValidationError):
        wv.forward_solve(sys, wv.ControlSignal.zeros(win, 1, 51, 5), wv.ModalData.zeros(1, 8))
    with pytest.raises(ValidationError):
        wv.forward_solve(sys, wv.ControlSignal.zeros(win, 1, 2001, 4), wv.ModalData.zeros(1, 8))
    with pytest.raises(ValidationError):
        wv.forward_solve(sys, wv.ControlSignal.zeros(win, 2, 2001, 5), wv.ModalData.zeros(1, 8))


# ---------------------------------------------------------------- energy

def test_energy_examples():
    sys = SpeedSystem([1.0], [1.0])
    assert wv.energy(sys, wv.ModalData.zeros(1, 3))[0] == 0.0
    pos = np.zeros((1, 3))
    pos[0, 0] = 1.0
    assert wv.energy(sys, wv.ModalData(pos, np.zeros((1, 3))))[0] == pytest.approx(PI / 4)


def test_energy_matches_quadrature(rng):
    sys = SpeedSystem([2.0], [1.0])
    data = rand_data(rng, 1, 5)
    x = np.linspace(0, PI, 4001)
    k = np.arange(1, 6)
    u_x = (data.pos[0] * k) @ np.cos(np.outer(k, x))
    u_t = data.vel[0] @ np.sin(np.outer(k, x))
    ref = 0.5 * np.trapezoid(2.0 * u_x ** 2 + u_t ** 2, x)
    assert wv.energy(sys, data)[0] == pytest.approx(ref, rel=1e-6)
