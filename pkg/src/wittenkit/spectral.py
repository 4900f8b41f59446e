"""Radial spectrum of the Dirac operator on conformally round compactifications.

A metric ``Omega^2 g_round`` on the sphere of radius ``sigma`` has Dirac
eigenproblem ``D_round phi = mu Omega phi``.  For radial ``Omega`` it splits
into 2x2 first-order systems in the colatitude ``theta`` (measured from the
north pole), one per angular sector with constant ``kappa = (n-1)/2 + k``:

    (d/dtheta + kappa/sin theta) u1 = mu sigma Omega u2
    (-d/dtheta + kappa/sin theta) u2 = mu sigma Omega u1

The two components live on staggered grids, which makes the discrete
operator symmetric and square; regularity at both poles comes for free
because neither grid contains a pole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
import sympy
from scipy import integrate

from .clifford import sphere_area
from .errors import DomainError, InvalidSpectrumError, ToleranceError


@dataclass
class SpectrumResult:
    eigenvalues: list            # sorted Richardson-extrapolated mu (both signs)
    inf_spec_sq: float
    mesh: dict
    convergence_estimate: float
    sectors: dict = field(default_factory=dict)   # k -> lowest |mu| in that sector
    sigma: float = 1.0
    n: int = 3

    def to_json(self) -> dict:
        return {"eigenvalues": [float(v) for v in self.eigenvalues], "inf_spec_sq": self.inf_spec_sq,
                "mesh": dict(self.mesh), "convergence_estimate": self.convergence_estimate,
                "sectors": {str(k): float(v) for k, v in self.sectors.items()}, "sigma": self.sigma, "n": self.n}


def _omega_on_colatitude(Omega, sigma, theta):
    # north chart radius of colatitude theta; theta = 0 is the north pole (r = infinity)
    r = sigma / np.tan(theta / 2)
    val = np.asarray(Omega(r), dtype=float)
    if np.any(~np.isfinite(val)) or np.any(val <= 0):
        raise InvalidSpectrumError("Omega must be positive and finite")
    return val


def _sector_eigenvalues(M, kappa, weight1, weight2, count):
    hp = np.pi / (2 * M + 1)
    t2 = (2 * np.arange(1, M + 1) - 1) * hp
    c = kappa / np.sin(t2)
    A = sp.diags([1 / (2 * hp) + 0.5 * c, -1 / (2 * hp) + 0.5 * c[1:]], [0, -1], shape=(M, M))
    L = sp.bmat([[None, A.T], [A, None]]).tocsc()
    B = sp.diags(np.concatenate([weight1, weight2])).tocsc()
    # fixed start vector: ARPACK otherwise draws a random one and the last digits vary
    v0 = np.ones(2 * M)
    w = sla.eigsh(L, k=2 * count, M=B, sigma=0.0, which="LM", v0=v0, return_eigenvectors=False)
    return np.sort(w)


def _grids(M):
    hp = np.pi / (2 * M + 1)
    return 2 * np.arange(1, M + 1) * hp, (2 * np.arange(1, M + 1) - 1) * hp


def radial_dirac_spectrum(Omega, sigma: float, n: int, mesh: int = 800, k_max: int = 2, count: int = 2,
                          tol: float | None = 1e-6, max_mesh: int | None = None) -> SpectrumResult:
    """Eigenvalues ``mu`` of ``D phi = mu Omega phi`` in sectors ``k = 0..k_max``.

    Meshes ``mesh``, ``2 mesh`` and ``4 mesh`` are solved; the two finest are
    Richardson extrapolated (second order) and the coarser extrapolation
    gives the error estimate.  While the estimate exceeds ``tol`` and
    ``4 mesh < max_mesh`` the base mesh is doubled (sharp interior wells of
    ``Omega`` need this).  ``count`` eigenvalue pairs per sector.
    ``Omega`` is a :class:`RadialProfile` or a callable of the north-chart radius.
    """
    if mesh < 64:
        raise ValueError("mesh must be at least 64")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    levels = {}

    def solve(M):
        if M not in levels:
            t1, t2 = _grids(M)
            w1 = sigma * _omega_on_colatitude(Omega, sigma, t1)
            w2 = sigma * _omega_on_colatitude(Omega, sigma, t2)
            levels[M] = {k: _sector_eigenvalues(M, (n - 1) / 2 + k, w1, w2, count) for k in range(k_max + 1)}
        return levels[M]

    while True:
        meshes = (mesh, 2 * mesh, 4 * mesh)
        eig, sectors, est = [], {}, 0.0
        for k in range(k_max + 1):
            c, m, f = (solve(M)[k] for M in meshes)
            rich_lo, rich = (4 * m - c) / 3, (4 * f - m) / 3
            # the change between successive extrapolations bounds the error of the last one
            est = max(est, float(np.max(np.abs(rich - rich_lo))))
            eig.extend(rich.tolist())
            sectors[k] = float(np.min(np.abs(rich)))
        inf_sq = min(sectors.values()) ** 2
        converged = tol is None or est <= tol * max(1.0, math.sqrt(inf_sq))
        if converged or max_mesh is None or 8 * mesh > max_mesh:
            break
        mesh *= 2
    if not converged:
        raise ToleranceError(f"mesh refinement changed eigenvalues by {est:.2e}", achieved=est)
    if not inf_sq > 0:
        raise InvalidSpectrumError("non-positive lowest eigenvalue of the squared operator")
    return SpectrumResult(eigenvalues=sorted(eig), inf_spec_sq=float(inf_sq),
                          mesh={"levels": list(meshes), "k_max": k_max, "per_sector": count},
                          convergence_estimate=est, sectors=sectors, sigma=float(sigma), n=int(n))


# -- Rayleigh quotient ------------------------------------------------------

def cap_bump(u):
    """Trial profile ``(1 - u^2)^3`` on ``[0, 1)``."""
    u = np.asarray(u, dtype=float)
    return np.where(u < 1, (1 - u * u) ** 3, 0.0)


def rayleigh_upper_bound(cm, support: float | None = None, profile=None) -> float:
    """Rayleigh quotient of ``p(d/support) psi_0`` with ``d`` the distance from the north pole.

    The trial field lives in the spherical cap, where the metric is exactly
    round; ``support`` defaults to the cap radius ``delta``.  Computed in
    the south chart with ``dd/dr' = F``.
    """
    n, sigma = cm.n, cm.sigma
    delta = 2 * sigma * math.atan(sigma / cm.R)
    support = delta if support is None else support
    if not 0 < support <= delta * (1 + 1e-12):
        raise DomainError("trial support must lie inside the spherical cap")
    x = sympy.symbols("x", positive=True)
    p = (1 - x**2) ** 3 if profile is None else profile(x)
    p0 = sympy.lambdify(x, p, "numpy")
    p1 = sympy.lambdify(x, sympy.diff(p, x), "numpy")
    rmax = sigma * math.tan(support / (2 * sigma))

    def parts(rp):
        F = 2 * sigma**2 / (sigma**2 + rp * rp)
        F1 = -4 * sigma**2 * rp / (sigma**2 + rp * rp) ** 2
        d = 2 * sigma * math.atan(rp / sigma)
        a, a1 = p0(d / support), p1(d / support) * F / support
        k = (n - 1) / 2
        # (F^k a)' F^(-(n+1)/2)
        b = (k * F ** (k - 1) * F1 * a + F**k * a1) * F ** (-(n + 1) / 2)
        vol = F**n * rp ** (n - 1)
        return b * b * vol, a * a * vol

    num, _ = integrate.quad(lambda t: parts(t)[0], 0.0, rmax, epsabs=0.0, epsrel=1e-12, limit=200)
    den, _ = integrate.quad(lambda t: parts(t)[1], 0.0, rmax, epsabs=0.0, epsrel=1e-12, limit=200)
    return num / den


# -- the h profile ------------------------------------------------------------

@lru_cache(maxsize=8)
def _h_expressions(n: int, l_max: int):
    """Symbolic coefficients of ``D^l h`` in the south chart, with ``sigma = 1`` and ``delta`` symbolic."""
    r, dl = sympy.symbols("r delta", positive=True)
    sigma = sympy.Integer(1)
    F = 2 * sigma**2 / (sigma**2 + r**2)
    k = sympy.Rational(n - 1, 2)

    class Itail(sympy.Function):
        # int_r^oo 2 sigma^2/(sigma^2 + t^2) t^(1-n) dt
        def fdiff(self, argindex=1):
            z = self.args[0]
            return -2 * sigma**2 / (sigma**2 + z**2) * z ** (1 - n)

    def D0(a):  # type-0 coefficient -> type-1
        return F ** (-(k + 1)) * sympy.diff(F**k * a, r)

    def D1(c):  # type-1 coefficient -> type-0
        return -F ** (-(k + 1)) * r ** (1 - n) * sympy.diff(r ** (n - 1) * F**k * c, r)

    t = sympy.symbols("t")
    step = sympy.exp(-1 / t)
    smooth = step / (step + step.subs(t, 1 - t))
    d = 2 * sigma * sympy.atan(r / sigma)
    u = 2 * d / dl - 1          # 0 at d = delta/2, 1 at d = delta
    eta = sympy.Piecewise((1, u <= 0), (1 - smooth.subs(t, u), u < 1), (0, True))
    g = (2 * F) ** ((1 - n) / sympy.Integer(2)) * Itail(r)
    h = D1(D0(eta * g)) - eta * D1(D0(g))
    # keep only the transition branch: outside it h vanishes identically
    eta_mid = 1 - smooth.subs(t, u)
    h_mid = D1(D0(eta_mid * g)) - eta_mid * D1(D0(g))
    exprs = [h_mid]
    cur = h_mid
    for l in range(1, l_max + 1):
        cur = D0(cur) if l % 2 == 1 else D1(cur)
        exprs.append(cur)
    return r, dl, Itail, h, exprs


def h_norm_profile(comp, l_max: int = 2, support_check_points: int = 200) -> list:
    """``[||h||, ||D h||, ..., ||D^l_max h||]`` on the round cap.

    ``h = D^2(eta G) - eta D^2 G`` with ``G`` the sphere Green's function of
    ``D^2`` at the north pole and ``eta`` the cutoff equal to 1 for
    ``d < delta/2`` and 0 for ``d > delta``.  Norms include the spinor trace
    (sum over the ``N`` columns of the matrix).  Computed at ``sigma = 1`` and
    rescaled: ``||D^l h||`` scales like ``sigma^(-n/2 - l)`` at fixed ``delta/sigma``.
    """
    if l_max > 2 or l_max < 0:
        raise ValueError("l_max must be 0, 1 or 2")
    n, sigma = comp.n, comp.sigma
    delta1 = comp.delta / sigma
    N = 2 ** (n // 2)
    om = sphere_area(n - 1)
    r, dl, Itail, h_full, exprs = _h_expressions(n, l_max)

    def tail(x):
        return integrate.quad(lambda s: 2 / (1 + s * s) * s ** (n - 1), 0.0, 1 / x, epsabs=0.0, epsrel=1e-13)[0]

    mods = [{"Itail": tail}, "math"]
    lo, hi = math.tan(delta1 / 4), math.tan(delta1 / 2)
    norms = []
    for l, e in enumerate(exprs):
        f = sympy.lambdify(r, e.subs(dl, delta1) / om, modules=mods)
        integrand = lambda x: float(f(x) ** 2 * (2 / (1 + x * x)) ** n * x ** (n - 1))  # noqa: E731
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
        norms.append(math.sqrt(N * om * val) * sigma ** (-n / 2 - l))
    # the full piecewise h must vanish outside delta/2 <= d <= delta
    f_full = sympy.lambdify(r, h_full.subs(dl, delta1) / om, modules=mods)
    inside = np.linspace(1e-3 * lo, lo * (1 - 1e-9), support_check_points)
    leak = max(abs(float(f_full(x))) for x in inside)
    scale = max(abs(float(f_full(x))) for x in np.linspace(lo, hi, 50)[1:-1])
    if leak > 1e-9 * scale:
        raise ToleranceError(f"h leaks outside the cutoff transition ({leak:.2e})", achieved=leak)
    return norms
