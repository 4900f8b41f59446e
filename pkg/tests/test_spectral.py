import time

import numpy as np
import pytest

from wittenkit.errors import DomainError, InvalidSpectrumError, ToleranceError
from wittenkit.identity import CompactifiedModel, compactify
from wittenkit.radial import build_model_manifold
from wittenkit.spectral import cap_bump, h_norm_profile, radial_dirac_spectrum, rayleigh_upper_bound

ONE = lambda r: np.ones_like(np.asarray(r, dtype=float))  # noqa: E731


@pytest.fixture(scope="module")
def ref3():
    model = build_model_manifold(3, 1.0, {"kind": "capped", "core": 0.6})
    return compactify(model)


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_round_sphere_lowest(sigma):
    t = time.perf_counter()
    res = radial_dirac_spectrum(ONE, sigma, 3)
    assert time.perf_counter() - t < 10
    assert min(abs(v) for v in res.eigenvalues) == pytest.approx(1.5 / sigma, abs=1e-4)
    assert res.inf_spec_sq == pytest.approx(2.25 / sigma**2, abs=1e-4)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_round_sector_complete(n):
    res = radial_dirac_spectrum(ONE, 1.0, n, mesh=200, k_max=3, count=2, tol=None)
    for v in res.eigenvalues:
        k = abs(v) - n / 2
        assert abs(k - round(k)) <= 1e-6 and round(k) >= 0
    for k, mu in res.sectors.items():
        assert mu == pytest.approx(n / 2 + k, abs=1e-6)
    # symmetric under mu -> -mu
    ev = np.array(res.eigenvalues)
    assert np.allclose(np.sort(ev), np.sort(-ev), atol=1e-9)


def test_homogeneity_in_omega(ref3):
    a = radial_dirac_spectrum(ref3.Omega, ref3.sigma, 3, tol=None)
    b = radial_dirac_spectrum(lambda r: 2 * ref3.Omega(r), ref3.sigma, 3, tol=None)
    assert np.allclose(np.array(b.eigenvalues), np.array(a.eigenvalues) / 2, rtol=1e-10)


def test_reference_spectrum_converges(ref3):
    res = radial_dirac_spectrum(ref3.Omega, ref3.sigma, 3)
    assert res.inf_spec_sq > 0
    assert res.convergence_estimate <= 1e-6
    coarse = radial_dirac_spectrum(ref3.Omega, ref3.sigma, 3, mesh=400, tol=None)
    assert abs(np.sqrt(coarse.inf_spec_sq) - np.sqrt(res.inf_spec_sq)) <= coarse.convergence_estimate
    js = res.to_json()
    assert js["inf_spec_sq"] == res.inf_spec_sq and len(js["eigenvalues"]) == 12


def test_adaptive_refinement():
    model = build_model_manifold(3, 1.0, {"kind": "capped", "core": 0.2})
    cm = compactify(model)
    with pytest.raises(ToleranceError) as exc:
        radial_dirac_spectrum(cm.Omega, cm.sigma, 3, mesh=200)
    assert exc.value.achieved > 1e-6
    res = radial_dirac_spectrum(cm.Omega, cm.sigma, 3, mesh=800, max_mesh=25600)
    assert res.convergence_estimate <= 1e-6 and res.mesh["levels"][0] > 800


def test_spectrum_errors():
    with pytest.raises(ValueError):
        radial_dirac_spectrum(ONE, 1.0, 3, mesh=10)
    with pytest.raises(ValueError):
        radial_dirac_spectrum(ONE, 1.0, 3, k_max=1)
    with pytest.raises(DomainError):
        radial_dirac_spectrum(ONE, 0.0, 3)
    with pytest.raises(InvalidSpectrumError):
        radial_dirac_spectrum(lambda r: -ONE(r), 1.0, 3)


def test_rayleigh_round():
    cm = CompactifiedModel.round(3, 1.0, 0.2)
    assert rayleigh_upper_bound(cm) >= 2.25


def test_rayleigh_scaling():
    vals = [rayleigh_upper_bound(CompactifiedModel.round(3, s, 0.5 * s)) * s**2 for s in (1.0, 2.0, 4.0)]
    assert max(vals) / min(vals) - 1 <= 0.01


def test_rayleigh_above_spectrum(ref3):
    bound = rayleigh_upper_bound(ref3)
    res = radial_dirac_spectrum(ref3.Omega, ref3.sigma, 3)
    assert np.isfinite(bound) and bound >= res.inf_spec_sq + 1e-8
    with pytest.raises(DomainError):
        rayleigh_upper_bound(ref3, support=2 * ref3.comp.delta)


def test_cap_bump():
    assert cap_bump(0.0) == 1.0
    assert cap_bump(1.0) == 0.0 and cap_bump(1.5) == 0.0


def test_h_norms(ref3):
    norms = h_norm_profile(ref3.comp, 2)
    assert len(norms) == 3 and all(np.isfinite(norms)) and all(v > 0 for v in norms)


def test_h_norm_scaling():
    a = compactify(build_model_manifold(3, 1.0, {"kind": "capped", "core": 0.6}))
    b = compactify(build_model_manifold(3, 2.0, {"kind": "capped", "core": 0.6}, scale=2.0))
    na, nb = h_norm_profile(a.comp, 2), h_norm_profile(b.comp, 2)
    for l in range(3):
        fa = na[l] * a.sigma ** (1.5 + l)
        fb = nb[l] * b.sigma ** (1.5 + l)
        assert abs(fa / fb - 1) <= 0.01


def test_h_norm_errors(ref3):
    with pytest.raises(ValueError):
        h_norm_profile(ref3.comp, 3)
