import numpy as np
import pytest
from scipy.stats import unitary_group

from wittenkit.clifford import build_clifford_rep
from wittenkit.errors import DomainError, ShapeError
from wittenkit.radial import ModelManifold, RadialProfile, build_model_manifold
from wittenkit.witten import (Mode, deviation_operator, make_family, partial_wave_check, spinor_operator, weight,
                              witten_spinor)

REP3 = build_clifford_rep(3)


@pytest.fixture(scope="module")
def capped3():
    return build_model_manifold(3, 1.0, {"kind": "capped", "core": 0.6})


def l1_mode(rep, seed=0):
    rng = np.random.default_rng(seed)
    return Mode(1, 0.3 * (rng.normal(size=(rep.N, rep.N)) + 1j * rng.normal(size=(rep.N, rep.N))))


def l2_mode(rep, seed=1):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=rep.n)
    return Mode(2, 0.2 * rng.normal(size=(rep.N, rep.N)).astype(complex), tuple(d / np.linalg.norm(d)))


def flat_dirac_residual(family, i, x, h=1e-4):
    n = family.rep.n
    W = family.model.W
    total = np.zeros(family.rep.N, dtype=complex)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        f = [W(np.linalg.norm(p)) ** ((n - 1) / 2) * witten_spinor(family, i, p) for p in (x + e, x - e)]
        total += family.rep.gammas[k] @ (f[0] - f[1]) / (2 * h)
    return np.linalg.norm(total)


def test_flat_model_spinors_are_constant():
    one = lambda r: (np.ones_like(r), np.zeros_like(r), np.zeros_like(r))  # noqa: E731
    flat = ModelManifold(n=3, rho=1.0, W=RadialProfile(one), label="flat")
    fam = make_family(flat, REP3)
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(10, 3)):
        assert np.allclose(fam.matrix(x), np.eye(2))
        assert np.allclose(spinor_operator(fam, x), np.eye(2))


def test_schwarzschild_value_at_one():
    exact = build_model_manifold(3, 1.0, "exact")
    fam = make_family(exact, REP3)
    psi = witten_spinor(fam, 0, [1.0, 0, 0])
    assert np.allclose(psi, np.array([1.0, 0]) / 4, atol=1e-15)
    assert np.allclose(spinor_operator(fam, [0, 1.0, 0]), np.eye(2) / 16, atol=1e-15)


def test_index_and_shape_errors(capped3):
    fam = make_family(capped3, REP3)
    with pytest.raises(IndexError):
        witten_spinor(fam, 2, [1.0, 0, 0])
    with pytest.raises(IndexError):
        witten_spinor(fam, -1, [1.0, 0, 0])
    with pytest.raises(ShapeError):
        fam.matrix([1.0, 0])
    with pytest.raises(ValueError):
        make_family(capped3, REP3, basis=np.array([[1, 0], [0, 2]], dtype=complex))
    with pytest.raises(ShapeError):
        make_family(capped3, build_clifford_rep(4))


@pytest.mark.parametrize("modes", [(), ("l1",), ("l1", "l2")])
def test_harmonicity(capped3, modes):
    table = {"l1": l1_mode(REP3), "l2": l2_mode(REP3)}
    fam = make_family(capped3, REP3, [table[m] for m in modes])
    for x in ([0.8, 0.5, -0.3], [1.0, 1.0, 0.0], [2.0, -0.5, 1.5]):
        for i in range(2):
            assert flat_dirac_residual(fam, i, np.array(x)) <= 1e-6


def test_l1_mode_field_formula():
    c = np.array([[0.3, 0.1], [0.0, -0.2j]])
    m = Mode(1, c)
    x = np.array([[0.5, -1.0, 2.0]])
    r = np.linalg.norm(x)
    ref = sum(x[0, i] * REP3.gammas[i] for i in range(3)) @ c / r**3
    assert np.allclose(m.field(REP3, x)[0], ref, atol=1e-15)


def test_mode_from_json():
    m = Mode.from_json({"l": 1, "coeffs": [[[0.1, 0.2], [0, 0]], [[0, 0], [1, 0]]]}, REP3)
    assert m.coeffs[0, 0] == 0.1 + 0.2j
    m2 = Mode.from_json({"l": 2, "coeffs": [[1, 0], [0, 1]]}, REP3)
    assert m2.direction == (1.0, 0.0, 0.0)
    with pytest.raises(ShapeError):
        Mode.from_json({"l": 1, "coeffs": [[1, 0, 0]]}, REP3)
    with pytest.raises(ShapeError):
        Mode.from_json({"l": 2, "coeffs": [[1, 0], [0, 1]], "direction": [1, 0]}, REP3)


def test_mode_free_operator_is_scalar(capped3):
    fam = make_family(capped3, REP3)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 3)) * 2
    P = spinor_operator(fam, x)
    W = capped3.W(np.linalg.norm(x, axis=1))
    assert np.allclose(P, W[:, None, None] ** -2 * np.eye(2), rtol=1e-14)


def test_operator_matches_direct_sum(capped3):
    fam = make_family(capped3, REP3, [l1_mode(REP3)])
    x = np.array([1.3, -0.4, 0.8])
    direct = sum(np.outer(witten_spinor(fam, i, x), witten_spinor(fam, i, x).conj()) for i in range(2))
    assert np.allclose(spinor_operator(fam, x), direct, atol=1e-15)
    dev = fam.matrix(x) - capped3.end_factor(np.linalg.norm(x))[0] ** -1 * np.eye(2)
    assert np.allclose(deviation_operator(fam, x), dev @ dev.conj().T, atol=1e-15)


def test_deviation_zero_without_modes(capped3):
    fam = make_family(capped3, REP3)
    rng = np.random.default_rng(5)
    d = rng.normal(size=(40, 3))
    x = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1.0, 30.0, size=(40, 1))
    assert np.max(np.abs(deviation_operator(fam, x))) <= 1e-15
    with pytest.raises(DomainError):
        deviation_operator(fam, [0.5, 0, 0])


@pytest.mark.parametrize("n", [3, 4])
def test_psd_and_norm_bounds(n):
    rep = build_clifford_rep(n)
    model = build_model_manifold(n, 1.0, {"kind": "capped", "core": 0.5})
    fam = make_family(model, rep, [l1_mode(rep, 7), l2_mode(rep, 8)])
    rng = np.random.default_rng(n)
    d = rng.normal(size=(500, n))
    x = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(0.05, 20.0, size=(500, 1))
    P = spinor_operator(fam, x)
    ev = np.linalg.eigvalsh(P)
    assert ev.min() >= -1e-12
    trace = np.real(np.trace(P, axis1=1, axis2=2))
    assert np.all(ev.max(axis=1) <= trace * (1 + 1e-14))
    psi = fam.matrix(x)
    assert np.all(np.sum(np.abs(psi[:, :, 0]) ** 2, axis=1) <= ev.max(axis=1) * (1 + 1e-12))
    end = np.linalg.norm(x, axis=1) >= model.rho
    dP = deviation_operator(fam, x[end])
    dev = np.linalg.eigvalsh(dP)
    assert dev.min() >= -1e-12
    dpsi = psi[end] - model.end_factor(np.linalg.norm(x[end], axis=1))[0][:, None, None] ** (-(n - 1) / 2) * fam.basis
    assert np.all(np.sum(np.abs(dpsi[:, :, 1]) ** 2, axis=1) <= dev.max(axis=1) * (1 + 1e-12) + 1e-30)


def test_operator_decay(capped3):
    fam = make_family(capped3, REP3, [l1_mode(REP3)])
    r = np.geomspace(100, 1000, 5)
    x = np.stack([r, 0 * r, 0 * r], axis=1)
    dist = np.linalg.norm(spinor_operator(fam, x) - np.eye(2), axis=(1, 2), ord=2)
    C = dist / r ** (2 - 3)
    assert np.max(C) / np.min(C) <= 1.05


def test_weight(capped3):
    assert weight(capped3, 0.5) == 0.0
    assert weight(capped3, 2.0) == pytest.approx((1 + 1 / 2.0) ** -4, rel=1e-14)


@pytest.mark.parametrize("n", [3, 4])
def test_partial_wave_identity(n):
    rep = build_clifford_rep(n)
    model = build_model_manifold(n, 1.0, {"kind": "capped", "core": 0.6})
    free = make_family(model, rep)
    a, b = partial_wave_check(free, 2.0)
    assert abs(a) <= 1e-13 and abs(b) <= 1e-13
    for modes in ([l1_mode(rep)], [l1_mode(rep), l2_mode(rep)]):
        fam = make_family(model, rep, modes)
        for r in (1.1, 1.5, 2.0, 4.0, 10.0):
            a, b = partial_wave_check(fam, r)
            assert abs(b) > 1e-8
            assert abs(a - b) <= 1e-10
    with pytest.raises(DomainError):
        partial_wave_check(free, 0.5)


def test_basis_rotation_leaves_operator(capped3):
    U = unitary_group.rvs(2, random_state=3)
    modes = [l1_mode(REP3)]
    a = make_family(capped3, REP3, [Mode(1, modes[0].coeffs @ U)], basis=U)
    b = make_family(capped3, REP3, modes)
    x = np.array([[0.4, 1.2, -0.3], [3.0, 0.1, 0.2]])
    assert np.allclose(spinor_operator(a, x), spinor_operator(b, x), atol=1e-14)


def test_modes_singular_at_origin(capped3):
    fam = make_family(capped3, REP3, [l1_mode(REP3)])
    with pytest.raises(DomainError):
        fam.matrix([0.0, 0.0, 0.0])
