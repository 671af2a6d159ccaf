"""Dense kernels checked against numpy/scipy references."""
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from simulwave import numerics as nm
from simulwave.errors import ConvergenceError, ValidationError


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


# ---------------------------------------------------------------- rank

def test_rank_examples(backend):
    assert nm.rank_with_tolerance(np.eye(3), 1e-10, backend=backend) == 3
    assert nm.rank_with_tolerance(np.zeros((2, 5)), 1e-10, backend=backend) == 0
    kal = np.array([[1, 0, 1, 0, 1, 0], [0, 1, 0, 1, 0, 1], [4, 0, 2, 0, 1, 0]], float)
    assert nm.rank_with_tolerance(kal, 1e-10, backend=backend) == 3


def test_rank_rejects_bad_input(backend):
    with pytest.raises(ValidationError):
        nm.rank_with_tolerance(np.array([[1.0, np.nan]]), 1e-8, backend=backend)
    with pytest.raises(ValidationError):
        nm.rank_with_tolerance(np.eye(2), 0.0, backend=backend)


def test_singular_values_match_lapack(backend, rng):
    for shape in [(3, 7), (7, 3), (6, 6), (1, 4), (12, 30)]:
        a = rng.standard_normal(shape)
        ref = np.linalg.svd(a, compute_uv=False)
        got = nm.singular_values(a, backend=backend)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-13 * ref[0])


def test_rank_of_constructed_low_rank(backend, rng):
    for r in range(0, 6):
        u = rng.standard_normal((6, r))
        v = rng.standard_normal((r, 9))
        a = u @ v
        assert nm.rank_with_tolerance(a, 1e-8, backend=backend) == r
        assert nm.rank_with_tolerance(a.T, 1e-8, backend=backend) == r


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.integers(-3, 3).map(float)))
def test_rank_transpose_invariant(a):
    assert nm.rank_with_tolerance(a, 1e-8) == nm.rank_with_tolerance(a.T, 1e-8)
    assert nm.rank_with_tolerance(a, 1e-8) == np.linalg.matrix_rank(a)


# ---------------------------------------------------------------- sym_eig

def test_sym_eig_examples(backend):
    w, _ = nm.sym_eig(np.diag([3.0, 1.0, 2.0]), backend=backend)
    np.testing.assert_allclose(w, [1, 2, 3], atol=1e-15)
    w, v = nm.sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]), backend=backend)
    np.testing.assert_allclose(w, [1, 3], rtol=1e-14)
    w, v = nm.sym_eig(np.array([[5.0]]), backend=backend)
    assert w[0] == 5.0 and v[0, 0] == 1.0


def test_sym_eig_rejects_asymmetric(backend):
    with pytest.raises(ValidationError):
        nm.sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]), backend=backend)
    with pytest.raises(ValidationError):
        nm.sym_eig(np.ones((2, 3)), backend=backend)


@pytest.mark.parametrize("n", [2, 5, 17, 64])
def test_sym_eig_residual_and_reconstruction(backend, rng, n):
    a = random_symmetric(rng, n)
    w, v = nm.sym_eig(a, backend=backend)
    norm = np.linalg.norm(a, 2)
    assert np.all(np.diff(w) >= 0)
    res = np.linalg.norm(a @ v - v * w, axis=0)
    assert res.max() <= 1e-10 * norm
    assert np.abs(v.T @ v - np.eye(n)).max() <= 1e-10
    assert np.linalg.norm(v @ np.diag(w) @ v.T - a) <= 1e-9 * norm
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * norm)


def test_sym_eig_sign_convention(backend, rng):
    a = random_symmetric(rng, 9)
    _, v = nm.sym_eig(a, backend=backend)
    for i in range(v.shape[1]):
        col = v[:, i]
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0


def test_backends_agree(rng):
    from simulwave import _backend
    names = _backend.available()
    a = random_symmetric(rng, 30)
    outs = [nm.sym_eig(a, backend=b) for b in names]
    for w, v in outs[1:]:
        np.testing.assert_allclose(w, outs[0][0], atol=1e-12)
        np.testing.assert_allclose(np.abs(v.T @ outs[0][1]), np.eye(30), atol=1e-8)


# ---------------------------------------------------------------- generalized

def test_generalized_min_eig_examples(rng):
    s = rng.standard_normal((4, 4))
    m = s @ s.T + 4 * np.eye(4)
    assert nm.generalized_min_eig(2 * m, m) == pytest.approx(2.0, rel=1e-12)
    assert nm.generalized_min_eig(np.diag([1.0, 4.0]), np.eye(2)) == pytest.approx(1.0)
    assert abs(nm.generalized_min_eig(np.diag([0.0, 1.0]), np.eye(2))) <= 1e-15


def test_generalized_rejects_indefinite_norm():
    with pytest.raises(ValidationError):
        nm.generalized_min_eig(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(ValidationError):
        nm.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_generalized_eigh_against_scipy(backend, rng):
    n = 12
    b = rng.standard_normal((n, n))
    a = b @ b.T
    s = rng.standard_normal((n, n))
    m = s @ s.T + n * np.eye(n)
    w, x = nm.generalized_eigh(a, m, backend=backend)
    np.testing.assert_allclose(w, sla.eigh(a, m, eigvals_only=True), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(x.T @ m @ x, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(a @ x, m @ x * w, atol=1e-9 * np.linalg.norm(a))


def test_generalized_min_eig_congruence_invariant(rng):
    for _ in range(10):
        n = 6
        b = rng.standard_normal((n, n))
        a = b @ b.T + 0.1 * np.eye(n)
        c = rng.standard_normal((n, n))
        m = c @ c.T + np.eye(n)
        s = rng.standard_normal((n, n)) + 3 * np.eye(n)
        ref = nm.generalized_min_eig(a, m)
        got = nm.generalized_min_eig(s.T @ a @ s, s.T @ m @ s)
        assert got == pytest.approx(ref, rel=1e-8)


def test_cholesky_and_triangular(rng):
    c = rng.standard_normal((7, 7))
    m = c @ c.T + np.eye(7)
    low = nm.cholesky(m)
    np.testing.assert_allclose(low, np.linalg.cholesky(m), atol=1e-12)
    rhs = rng.standard_normal((7, 3))
    np.testing.assert_allclose(nm.solve_lower(low, rhs), sla.solve_triangular(low, rhs, lower=True), atol=1e-10)


# ---------------------------------------------------------------- CG

def test_solve_spd_examples():
    np.testing.assert_allclose(nm.solve_spd(np.eye(2), np.array([1.0, 2.0]), 1e-14), [1, 2])
    np.testing.assert_allclose(nm.solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 4.0]), 1e-14), [1, 1])
    np.testing.assert_allclose(nm.solve_spd(np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0]), 1e-14),
                               [1, 1], rtol=1e-13)


def test_solve_spd_residual_and_determinism(rng):
    n = 40
    c = rng.standard_normal((n, n))
    a = c @ c.T + 5 * np.eye(n)
    rhs = rng.standard_normal(n)
    x1 = nm.solve_spd(a, rhs, 1e-12)
    x2 = nm.solve_spd(a, rhs, 1e-12)
    assert np.linalg.norm(a @ x1 - rhs) <= 1e-12 * np.linalg.norm(rhs)
    assert np.array_equal(x1, x2)


def test_solve_spd_zero_rhs():
    assert np.array_equal(nm.solve_spd(np.eye(3), np.zeros(3), 1e-12), np.zeros(3))


def test_solve_spd_signals_indefinite():
    a = np.diag([1.0, -1.0, 2.0, -3.0])
    with pytest.raises(ConvergenceError):
        nm.solve_spd(a, np.ones(4), 1e-14)


# ---------------------------------------------------------------- quadrature

def test_quadrature_rule_invariants():
    rule = nm.gauss_legendre_rule(0.0, math.pi, 7)
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - math.pi) <= 1e-12 * math.pi
    assert rule.nodes.size == 35


def test_integrate_examples():
    assert nm.integrate_1d(lambda x: np.ones_like(x), 0.0, math.pi, 1) == pytest.approx(math.pi, rel=1e-15)
    assert abs(nm.integrate_1d(lambda x: np.sin(x) ** 2, 0.0, math.pi, 8) - math.pi / 2) <= 1e-12
    assert abs(nm.integrate_1d(lambda x: x ** 9, 0.0, 1.0, 1) - 0.1) <= 1e-13 * 0.1


@pytest.mark.parametrize("deg", range(10))
def test_integrate_polynomial_exactness(deg):
    got = nm.integrate_1d(lambda x: x ** deg, -0.5, 1.5, 3)
    ref = (1.5 ** (deg + 1) - (-0.5) ** (deg + 1)) / (deg + 1)
    assert got == pytest.approx(ref, rel=1e-13)


def test_integrate_convergence_order():
    f = lambda x: np.exp(np.sin(3 * x))
    ref = nm.integrate_1d(f, 0.0, 2.0, 400)
    errs = [abs(nm.integrate_1d(f, 0.0, 2.0, p) - ref) for p in (4, 8)]
    assert math.log2(errs[0] / errs[1]) >= 9


def test_integrate_rejects():
    with pytest.raises(ValidationError):
        nm.integrate_1d(lambda x: x, 1.0, 0.0, 2)
    with pytest.raises(ValidationError):
        nm.integrate_1d(lambda x: x, 0.0, 1.0, 0)
    with pytest.raises(ValidationError):
        nm.integrate_1d(lambda x: np.full_like(x, np.inf), 0.0, 1.0, 2)


def test_simpson_weights():
    w = nm.simpson_weights(5, 0.25)
    assert w.sum() == pytest.approx(1.0)
    x = np.linspace(0, 1, 101)
    assert np.dot(nm.simpson_weights(101, 0.01), x ** 3) == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(ValidationError):
        nm.simpson_weights(4, 0.1)


# ---------------------------------------------------------------- tridiagonal

def test_tridiagonal_lowest_against_scipy(backend, rng):
    n = 300
    d = rng.uniform(1, 5, n)
    e = rng.uniform(-1, 1, n - 1)
    ref = sla.eigh_tridiagonal(d, e, eigvals_only=True)[:12]
    got = nm.tridiagonal_lowest(d, e, 12, backend=backend)
    np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-13)


def test_tridiagonal_graded_matrix_relative_accuracy(backend):
    # discrete Laplacian, eigenvalues known in closed form
    n, h = 511, 1.0 / 512
    d = np.full(n, 2.0 / h ** 2)
    e = np.full(n - 1, -1.0 / h ** 2)
    k = np.arange(1, 9)
    exact = 4.0 / h ** 2 * np.sin(k * np.pi * h / 2) ** 2
    got = nm.tridiagonal_lowest(d, e, 8, backend=backend)
    np.testing.assert_allclose(got, exact, rtol=1e-10)
