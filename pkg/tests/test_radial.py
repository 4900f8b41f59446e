import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wittenkit.errors import (DomainError, GluingError, InfeasibleTransitionError, InvalidDimensionError,
                              InvalidInteriorError, MollifierError)
from wittenkit.radial import (build_compactification, build_model_manifold, chart_from_south,
                              compactification_radii, curvature_grid, scalar_curvature_radial,
                              schwarzschild_factor, sphere_factor)

SQUARE = (3, 1.0, 0.6)


@pytest.fixture(scope="module")
def comp3():
    m = build_model_manifold(3, 1.0, {"kind": "capped", "core": 0.6})
    return m, build_compactification(m, 3.0)


def test_schwarzschild_values():
    assert schwarzschild_factor(3, 1.0)[0] == 4.0
    assert schwarzschild_factor(4, 1.0)[0] == 2.0
    assert abs(schwarzschild_factor(3, 1e9)[0] - 1) < 1e-8
    with pytest.raises(DomainError):
        schwarzschild_factor(3, 0.0)
    with pytest.raises(InvalidDimensionError):
        schwarzschild_factor(2, 1.0)


def test_schwarzschild_is_scalar_flat():
    r = np.linspace(0.1, 20, 300)
    for n in (3, 4, 5, 6):
        curv = scalar_curvature_radial(lambda x: schwarzschild_factor(n, x), n, r)
        assert np.max(np.abs(curv)) < 1e-9


def test_round_sphere_curvature():
    assert scalar_curvature_radial(lambda x: sphere_factor(1.0, x), 3, 0.7) == pytest.approx(6.0, rel=1e-12)
    r = np.linspace(0.05, 30, 500)
    for n, sig in ((3, 2.0), (5, 0.7)):
        curv = scalar_curvature_radial(lambda x: sphere_factor(sig, x), n, r)
        assert np.std(curv) / np.mean(curv) <= 1e-8
        assert np.mean(curv) == pytest.approx(n * (n - 1) / sig**2, rel=1e-10)


def test_compactification_example(comp3):
    m, c = comp3
    assert c.r_star == 4.0
    assert c.sigma == pytest.approx(4 / np.sqrt(0.28), rel=1e-14)
    assert c.sigma == pytest.approx(7.5593, abs=1e-4)
    assert c.R == pytest.approx(8.5593, abs=1e-4)
    assert c.delta == pytest.approx(10.938, abs=1e-3)
    assert c.delta == pytest.approx(2 * c.sigma * np.arctan(c.sigma / c.R), rel=1e-15)
    assert c.R_prime == pytest.approx((16 / 0.28) / (4 / np.sqrt(0.28) + 1), rel=1e-14)
    assert c.R_prime == pytest.approx(6.67612, abs=1e-5)
    assert m.rho <= c.sigma <= c.R
    r = np.linspace(1e-6, m.rho, 200)
    assert np.all(c.lam(r) == 1.0)


def test_compactification_invariants(comp3):
    m, c = comp3
    r = np.concatenate([np.linspace(c.R, 10 * c.R, 500), np.geomspace(10 * c.R, 1e6, 100)])
    lam_expected = sphere_factor(c.sigma, r)[0] / schwarzschild_factor(3, r)[0]
    np.testing.assert_allclose(c.lam(r), lam_expected, rtol=1e-12)
    np.testing.assert_allclose(c.total(r), sphere_factor(c.sigma, r)[0], rtol=1e-12)
    rr, curv = curvature_grid(c, m, 1000)
    assert len(rr) >= 1000
    assert np.min(curv) >= -1e-10
    assert c.derivative_jump < 0
    for k in c.mu_conf.knots:
        lo, hi = k * (1 - 1e-13), k * (1 + 1e-13)
        assert abs(c.mu_conf(lo) - c.mu_conf(hi)) <= 1e-10
        assert abs(c.mu_conf.deriv1(lo) - c.mu_conf.deriv1(hi)) <= 1e-10


def test_model_manifold_end_is_exact():
    m = build_model_manifold(3, 1.0)
    assert m.W(1.0) == pytest.approx(4.0, rel=1e-14)
    r = np.linspace(1.0, 50, 400)
    np.testing.assert_allclose(m.W(r), schwarzschild_factor(3, r)[0], rtol=1e-12)
    ex = build_model_manifold(3, 1.0, "exact")
    assert not ex.regular_at_origin
    with pytest.raises(DomainError):
        ex.W(0.0)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("core", [0.2, 0.6, 1.0])
def test_capped_interior_curvature(n, core):
    m = build_model_manifold(n, 2.0, {"kind": "capped", "core": core})
    r = np.linspace(1e-6, 4.0, 1000)
    assert np.min(scalar_curvature_radial(m.W, n, r)) >= -1e-10
    assert np.all(np.diff(m.W(r)) <= 1e-15)
    assert m.interior["cap_level"] == pytest.approx(m.W(0.0) ** ((n - 2) / 2))


def test_polynomial_interior():
    coeffs = [2.875, -1.25, 0.375]
    m = build_model_manifold(3, 1.0, {"kind": "polynomial", "coeffs": coeffs})
    assert m.W(0.0) == pytest.approx(2.875**2)
    with pytest.raises(GluingError):
        build_model_manifold(3, 1.0, {"kind": "polynomial", "coeffs": [3.0, -1.0]})
    # adding k (x-1)^3 keeps the matching but makes the interior subharmonic near 0
    bad = np.array(coeffs + [0.0]) + 2.0 * np.array([-1.0, 3.0, -3.0, 1.0])
    with pytest.raises(InvalidInteriorError):
        build_model_manifold(3, 1.0, {"kind": "polynomial", "coeffs": bad})
    with pytest.raises(InvalidInteriorError):
        build_model_manifold(3, 1.0, {"kind": "nonsense"})


def test_chart_from_south():
    assert chart_from_south(1.0, 1.0) == 1.0
    assert chart_from_south(7.5593, 8.5593) == pytest.approx(6.67613, abs=1e-5)
    with pytest.raises(DomainError):
        chart_from_south(1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(sigma=st.floats(0.1, 10), r=st.floats(1e-3, 1e3))
def test_chart_involution(sigma, r):
    assert chart_from_south(sigma, chart_from_south(sigma, r)) == pytest.approx(r, rel=1e-13)


def test_compactification_errors():
    m = build_model_manifold(3, 1.0)
    with pytest.raises(InfeasibleTransitionError):
        build_compactification(m, 1.0)
    with pytest.raises(InfeasibleTransitionError):
        compactification_radii(3, 1.0, 1.0)
    with pytest.raises(InfeasibleTransitionError):
        build_compactification(build_model_manifold(3, 0.5), 3.0)
    with pytest.raises(MollifierError):
        build_compactification(m, 3.0, mollifier_width=3.5)


def test_rescaling():
    base = build_compactification(build_model_manifold(3, 1.0))
    for s in (2.0, 4.0):
        c = build_compactification(build_model_manifold(3, s, scale=s))
        assert c.sigma == pytest.approx(s * base.sigma, rel=1e-13)
        assert c.R == pytest.approx(s * base.R, rel=1e-13)
        r = np.linspace(base.r_star, 3 * base.R, 100)
        # the sphere branch is a function of r/s up to the overall factor
        np.testing.assert_allclose(c.mu_conf(s * r), base.mu_conf(r), rtol=1e-12)
        np.testing.assert_allclose(c.lam(s * r), base.lam(r), rtol=1e-12)


@pytest.mark.parametrize("n,rho", [(3, 1.0), (3, 2.0), (3, 5.0), (4, 0.5), (4, 1.0), (5, 0.5), (5, 5.0)])
def test_compactification_sweep(n, rho):
    m = build_model_manifold(n, rho)
    c = build_compactification(m)
    assert rho <= c.sigma <= c.R
    assert c.min_curvature >= -1e-10
    r = np.linspace(c.R, 20 * c.R, 200)
    np.testing.assert_allclose(c.lam(r) * schwarzschild_factor(n, r)[0], sphere_factor(c.sigma, r)[0], rtol=1e-12)
