"""Dirac Green's functions on R^n and round spheres, and the cap counter terms.

Sphere points are given in a stereographic chart.  The round sphere of radius
``sigma`` has metric ``F(x)^2 g_0`` with ``F(x) = 2 sigma^2 / (sigma^2 + |x|^2)``
in either chart; the counter terms live in the south chart, where the north
pole sits at the origin and the cap is the ball ``|x| < R' = sigma^2 / R``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.stats import qmc

from .clifford import CliffordRep, clifford_mul, sphere_area
from .errors import DomainError, PoleError, ShapeError, ToleranceError
from .quadrature import gauss_panels, sphere_quadrature

POLE_GUARD = 1e-8
QUAD_RTOL = 1e-12


class OutsideCapWarning(UserWarning):
    """``g_delta`` evaluated beyond the cap radius; the value is a signed integral."""


def _point(rep: CliffordRep, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (rep.n,):
        raise ShapeError(f"expected a point in R^{rep.n}, got shape {x.shape}")
    return x


def euclidean_green(rep: CliffordRep, x, y) -> np.ndarray:
    """``S(x, y) = -(1/omega) (x - y) / |x - y|^n`` as an N x N matrix."""
    d = _point(rep, x) - _point(rep, y)
    dist = np.linalg.norm(d)
    if dist < POLE_GUARD:
        raise PoleError("Green's function evaluated on the diagonal")
    return -clifford_mul(rep, d / dist**rep.n, rep.identity) / rep.omega


def conformal_transform_kernel(kernel, lambda_x: float, lambda_y: float, n: int) -> np.ndarray:
    """Green's function of ``lambda^2 g`` from that of ``g``."""
    if not (lambda_x > 0 and lambda_y > 0):
        raise DomainError("conformal factors must be positive")
    return (lambda_x * lambda_y) ** ((1 - n) / 2) * np.asarray(kernel)


def sphere_conformal_factor(sigma: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 2 * sigma**2 / (sigma**2 + np.sum(x * x, axis=-1))


def sphere_green_dirac(rep: CliffordRep, sigma: float, x, y) -> np.ndarray:
    """Dirac Green's function of the round sphere of radius ``sigma`` in a stereographic chart."""
    S = euclidean_green(rep, x, y)
    return conformal_transform_kernel(S, sphere_conformal_factor(sigma, x), sphere_conformal_factor(sigma, y), rep.n)


# -- closed forms -----------------------------------------------------------

def tau_integral(n: int, sigma: float, a: float, b: float) -> float:
    """``int_a^b 2 sigma^2/(sigma^2 + tau^2) tau^(1-n) dtau`` for ``0 < a``, ``b`` possibly infinite.

    Evaluated in ``t = 1/tau``, where the integrand ``2 sigma^2 t^(n-1)/(1 + sigma^2 t^2)``
    is smooth and the infinite end becomes ``t = 0``.
    """
    if a <= 0 or b <= 0:
        raise PoleError("tau integral needs positive limits")
    lo, hi = 1.0 / b, 1.0 / a
    f = lambda t: 2 * sigma**2 * t ** (n - 1) / (1 + sigma**2 * t * t)  # noqa: E731
    val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return val


def tau_integral_n3(sigma: float, a: float, b: float) -> float:
    """Antiderivative oracle for ``n = 3``: ``2 (-1/tau - arctan(tau/sigma)/sigma)``."""
    F = lambda t: 2 * (-1.0 / t - np.arctan(t / sigma) / sigma) if np.isfinite(t) else -np.pi / sigma  # noqa: E731
    return F(b) - F(a)


@dataclass(frozen=True)
class KernelClosedForms:
    sigma: float
    R_prime: float
    n: int
    N: int
    omega: float

    def _prefactor(self, r):
        return (4 * self.sigma**2 / (self.sigma**2 + r * r)) ** ((1 - self.n) / 2) / self.omega

    def _radii(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise PoleError("counter terms are singular at the north pole")
        return r

    def s_product_trace(self, r):
        """Trace of ``S(n, x) S(x, n)`` for ``x`` at south-chart radius ``r``."""
        r = self._radii(r)
        F = 2 * self.sigma**2 / (self.sigma**2 + r * r)
        return self.N * (2 * r * r) ** (1 - self.n) * F ** (1 - self.n) / self.omega**2

    def g_delta(self, r):
        r = self._radii(r)
        if np.any(r > self.R_prime):
            warnings.warn("g_delta evaluated outside the cap; returning the signed integral", OutsideCapWarning,
                          stacklevel=2)
        vals = [tau_integral(self.n, self.sigma, x, self.R_prime) if x <= self.R_prime
                else -tau_integral(self.n, self.sigma, self.R_prime, x) for x in np.ravel(r)]
        return self._prefactor(r) * np.reshape(vals, r.shape)

    def h_delta(self, r=0.0):
        """``H_delta(n, y)``; ``r = 0`` gives the value at the pole itself."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("radius must be non-negative")
        return self._prefactor(r) * tau_integral(self.n, self.sigma, self.R_prime, np.inf)

    def g_sphere_sq(self, r):
        r = self._radii(r)
        integral = np.reshape([tau_integral(self.n, self.sigma, x, np.inf) for x in np.ravel(r)], r.shape)
        return self._prefactor(r) * integral

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "R_prime": self.R_prime, "n": self.n, "N": self.N, "omega": self.omega,
                "h_delta_pole": float(self.h_delta(0.0))}


def counter_terms(rep: CliffordRep, sigma: float, R: float) -> KernelClosedForms:
    if not (R > 0 and sigma > 0):
        raise DomainError("sigma and R must be positive")
    return KernelClosedForms(sigma=float(sigma), R_prime=sigma**2 / R, n=rep.n, N=rep.N, omega=rep.omega)


# -- brute-force oracles ----------------------------------------------------

def s_product_direct(rep: CliffordRep, sigma: float, r: float) -> float:
    """``Tr S(n, x) S(x, n)`` from the kernel itself, with ``x = (r, 0, ...)`` in the south chart."""
    x = np.zeros(rep.n)
    x[0] = r
    pole = np.zeros(rep.n)
    prod = sphere_green_dirac(rep, sigma, pole, x) @ sphere_green_dirac(rep, sigma, x, pole)
    return float(np.real(np.trace(prod)))


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray      # N x N matrix
    error: float           # estimated absolute error of the scalar part
    method: str
    samples: int

    @property
    def scalar(self) -> float:
        return float(np.real(np.trace(self.value)) / self.value.shape[0])


def _product_prefactor(rep, sigma, y):
    Fy = sphere_conformal_factor(sigma, y)
    return (2.0 * Fy) ** ((1 - rep.n) / 2) / rep.omega**2


def _moment_matrix(rep, A):
    # sum_ij A_ij gamma_i gamma_j
    return np.einsum("ij,iab,jbc->ac", A, rep.gammas, rep.gammas)


def _radial_uniform(u, n, center, radius):
    """Points ``center + r e`` with ``r`` uniform in ``(0, radius)`` and ``e`` uniform on the sphere."""
    r = radius * u[:, 0]
    g = special.ndtri(np.clip(u[:, 1:], 1e-15, 1 - 1e-15))
    e = g / np.linalg.norm(g, axis=1, keepdims=True)
    return center + r[:, None] * e


def brute_force_g_delta(rep: CliffordRep, sigma: float, R: float, y, method: str = "mc",
                        samples: int = 10_000_000, seed: int = 0, tol: float | None = None,
                        replicates: int = 8) -> QuadratureResult:
    """``G_delta(n, y) = int_cap S_delta(n, x) S_delta(x, y) dvol(x)`` by direct quadrature.

    ``y`` is a south-chart point inside the cap.  ``method="mc"`` uses scrambled
    Sobol points drawn from a mixture of samplers with density ``~ |x - c|^(1-n)``
    around both singular points (bounded importance weights); the error is the
    spread over independent scramblings.  ``method="product"`` is the slow
    axisymmetric 2-D product rule.
    """
    y = _point(rep, y)
    Rp = sigma**2 / R
    ry = float(np.linalg.norm(y))
    if not 0 < ry < Rp:
        raise DomainError("y must lie in the open cap and away from the pole")
    if method == "product":
        return _g_delta_product(rep, sigma, Rp, ry, tol if tol is not None else 1e-8)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    n = rep.n
    by = min(ry, Rp - ry)
    pref = _product_prefactor(rep, sigma, y)
    per = max(2, samples // (2 * replicates))
    m = int(math.ceil(math.log2(per)))
    chunk = 1 << min(m, 17)
    estimates = []
    for rep_idx in range(replicates):
        sobol = qmc.Sobol(d=n + 1, scramble=True, seed=np.random.default_rng([seed, rep_idx]))
        A = np.zeros((n, n))
        count = 0
        for _ in range(max(1, (1 << m) // chunk)):
            u = sobol.random(chunk)
            for x in (_radial_uniform(u, n, 0.0, Rp), _radial_uniform(u, n, y, by)):
                rx = np.linalg.norm(x, axis=1)
                d = x - y
                rd = np.linalg.norm(d, axis=1)
                q = 0.5 / (Rp * rep.omega * rx ** (n - 1)) + 0.5 * (rd < by) / (by * rep.omega * rd ** (n - 1))
                F = 2 * sigma**2 / (sigma**2 + rx * rx)
                k = np.where(rx < Rp, F / (rx**n * rd**n), 0.0) / q
                A += np.einsum("s,si,sj->ij", k, -x, d)
                count += len(x)
        estimates.append(pref * A / count)
    estimates = np.array(estimates)
    A = estimates.mean(axis=0)
    scal = -np.trace(estimates, axis1=1, axis2=2)
    err = float(np.std(scal, ddof=1) / math.sqrt(replicates))
    value = _moment_matrix(rep, A)
    if tol is not None and err > tol * abs(np.mean(scal)):
        raise ToleranceError(f"Monte Carlo error {err:.2e} above tolerance", achieved=err)
    return QuadratureResult(value=value, error=err, method="mc", samples=int(count * replicates))


def _smooth_step(t):
    """C^infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return a / (a + b)


def _g_delta_product(rep, sigma, Rp, ry, tol):
    n = rep.n
    eps = 0.5 * min(ry, Rp - ry)
    area = sphere_area(n - 2)

    def scalar_integrand(z, s):
        # Tr/N of S(n,x) S(x,y) dvol at x = (z, s e_perp), y = (ry, 0)
        rx2 = z * z + s * s
        rd2 = (z - ry) ** 2 + s * s
        F = 2 * sigma**2 / (sigma**2 + rx2)
        return (rx2 - z * ry) * F / (rx2 ** (n / 2) * rd2 ** (n / 2))

    def cut(z, s):
        return _smooth_step(2.0 - np.sqrt((z - ry) ** 2 + s * s) / eps)  # 1 within eps, 0 beyond 2 eps

    def total(panels, order):
        # origin-centred polar coordinates, weight (1 - cut)
        r, wr = gauss_panels(0.0, Rp, panels, order)
        t, wt = gauss_panels(0.0, np.pi, panels, order)
        rr, tt = np.meshgrid(r, t, indexing="ij")
        z, s = rr * np.cos(tt), rr * np.sin(tt)
        jac = rr ** (n - 1) * np.sin(tt) ** (n - 2)
        outer = np.einsum("i,j,ij->", wr, wt, (1 - cut(z, s)) * scalar_integrand(z, s) * jac)
        # y-centred polar coordinates, weight cut, supported in the ball of radius 2 eps
        r, wr = gauss_panels(0.0, 2 * eps, panels, order)
        rr, tt = np.meshgrid(r, t, indexing="ij")
        z, s = ry + rr * np.cos(tt), rr * np.sin(tt)
        jac = rr ** (n - 1) * np.sin(tt) ** (n - 2)
        inner = np.einsum("i,j,ij->", wr, wt, cut(z, s) * scalar_integrand(z, s) * jac)
        return area * (outer + inner)

    pref = (2.0 * 2 * sigma**2 / (sigma**2 + ry * ry)) ** ((1 - n) / 2) / rep.omega**2
    panels, order = 8, 16
    prev = total(panels, order)
    for _ in range(6):
        panels *= 2
        cur = total(panels, order)
        err = abs(cur - prev)
        if err <= tol * abs(cur):
            return QuadratureResult(value=pref * cur * rep.identity, error=float(pref * err),
                                    method="product", samples=int((panels * order) ** 2 * 2))
        prev = cur
    raise ToleranceError(f"product rule did not reach relative tolerance {tol:g}", achieved=float(pref * err))


# -- delta calibration ------------------------------------------------------

@dataclass(frozen=True)
class GaussianSpinor:
    """``psi(x) = amplitude exp(-|x - center|^2 / (2 width^2)) chi`` with a constant spinor ``chi``."""

    center: np.ndarray
    width: float
    chi: np.ndarray
    amplitude: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        g = self.amplitude * np.exp(-np.sum((x - self.center) ** 2, axis=-1) / (2 * self.width**2))
        return g[..., None] * self.chi

    def dirac(self, rep: CliffordRep, x):
        """``D psi = -((x - center)/width^2) . psi``."""
        x = np.asarray(x, dtype=float)
        v = -(x - self.center) / self.width**2
        return np.einsum("...i,iab,...b->...a", v, rep.gammas, self(x))


def delta_calibration(rep: CliffordRep, test_spinor: GaussianSpinor, y, tol: float = 1e-10,
                      angular_order: int | None = None) -> float:
    """``|| int S(y, x) (D psi)(x) dx - psi(y) ||`` for a Gaussian test spinor.

    With ``D_x S(x, y) = delta`` the reproducing formula pairs the kernel as
    ``S(y, x)``; swapping the arguments flips the sign of the integral.  The
    integral is taken in polar coordinates about ``y``, where the Jacobian
    cancels the pole: adaptive quadrature in ``s`` and a Gauss product rule
    on the sphere of directions.
    """
    n = rep.n
    y = _point(rep, y)
    if test_spinor.amplitude == 0 or not np.any(test_spinor.chi):
        return 0.0
    dirs, wdir = sphere_quadrature(n, angular_order or (24 if n == 3 else 12))
    s_max = np.linalg.norm(test_spinor.center - y) + 12 * test_spinor.width

    def radial(s):
        # integrand over directions at distance s from y, with the s^(n-1) Jacobian
        x = y + s * dirs
        Dpsi = test_spinor.dirac(rep, x)
        # S(y, x) s^(n-1) = (1/omega) e . , e = (x - y)/s
        Se = np.einsum("ki,iab,kb->ka", dirs, rep.gammas, Dpsi) / rep.omega
        return np.einsum("k,ka->a", wdir, Se)

    def stacked(s):
        v = radial(s)
        return np.concatenate([v.real, v.imag])

    val, _ = integrate.quad_vec(stacked, 0.0, s_max, epsabs=tol * 1e-2, epsrel=tol, limit=400)
    out = val[: rep.N] + 1j * val[rep.N:]
    return float(np.linalg.norm(out - test_spinor(y)))
