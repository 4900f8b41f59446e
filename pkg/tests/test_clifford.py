import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wittenkit.clifford import build_clifford_rep, clifford_mul, clifford_residual, sphere_area, trace
from wittenkit.errors import InvalidDimensionError, ShapeError


@pytest.mark.parametrize("n", range(3, 9))
def test_anticommutation_and_anti_hermitian(n):
    rep = build_clifford_rep(n)
    assert rep.N == 2 ** (n // 2)
    assert rep.gammas.shape == (n, rep.N, rep.N)
    assert clifford_residual(rep) <= 1e-14
    for g in rep.gammas:
        np.testing.assert_allclose(g.conj().T, -g, atol=1e-15)
    np.testing.assert_allclose(rep.omega, 2 * np.pi ** (n / 2) / __import__("math").gamma(n / 2), rtol=1e-14)


def test_small_examples():
    rep = build_clifford_rep(3)
    assert rep.N == 2
    assert abs(rep.omega - 4 * np.pi) < 1e-14
    assert build_clifford_rep(4).N == 4
    g1, g2 = rep.gammas[0], rep.gammas[1]
    assert np.all(g1 @ g2 + g2 @ g1 == 0)
    assert sphere_area(2) == pytest.approx(4 * np.pi)


def test_mul_examples():
    rep = build_clifford_rep(3)
    I = rep.identity
    assert np.all(clifford_mul(rep, np.zeros(3), I) == 0)
    np.testing.assert_array_equal(clifford_mul(rep, [1, 0, 0], I), rep.gammas[0])
    v = np.array([1.0, 2.0, 2.0])
    np.testing.assert_allclose(clifford_mul(rep, v, clifford_mul(rep, v, I)), -9 * I, atol=1e-13)


def test_trace_examples():
    rep = build_clifford_rep(3)
    assert trace(rep.identity) == 2
    assert abs(trace(rep.gammas[0])) == 0


def test_errors():
    with pytest.raises(InvalidDimensionError):
        build_clifford_rep(2)
    rep = build_clifford_rep(3)
    with pytest.raises(ShapeError):
        clifford_mul(rep, [1.0, 0.0], rep.identity)
    with pytest.raises(ShapeError):
        clifford_mul(rep, [1.0, 0.0, 0.0], np.eye(3))


def test_reproducible():
    a, b = build_clifford_rep(5), build_clifford_rep(5)
    assert a.gammas.tobytes() == b.gammas.tobytes()


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 7), seed=st.integers(0, 2**32 - 1))
def test_unit_vector_squares_to_minus_one(n, seed):
    rng = np.random.default_rng(seed)
    rep = build_clifford_rep(n)
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    m = rng.normal(size=(rep.N, rep.N)) + 1j * rng.normal(size=(rep.N, rep.N))
    np.testing.assert_allclose(clifford_mul(rep, v, clifford_mul(rep, v, m)), -m, atol=1e-12)
    b = rng.normal(size=(rep.N, rep.N))
    assert abs(trace(m @ b) - trace(b @ m)) <= 1e-12
