"""Radial conformal factors, model manifolds and their conformal compactification.

All metrics here are radial and conformally flat, ``g = W(r)^2 g_0`` on R^n.
Profiles carry explicit first and second derivatives ("jets") so that scalar
curvature can be evaluated without numerical differentiation.

Lengths are expressed in model units.  A model with ``scale = s`` is the
mass-normalized model (ADM mass 2) with every radius multiplied by ``s``;
its Schwarzschild end has mass ``2 s^(n-2)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .errors import (
    DomainError,
    GluingError,
    InfeasibleTransitionError,
    InvalidDimensionError,
    InvalidInteriorError,
    MollifierError,
)

Jet = tuple  # (value, first derivative, second derivative), each an ndarray

CURVATURE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial function with two derivatives, evaluated through ``jet_fn``."""

    jet_fn: Callable[[np.ndarray], Jet]
    domain: tuple = (0.0, np.inf)
    knots: tuple = ()
    spec: dict = field(default_factory=dict)

    def jet(self, r) -> Jet:
        r = np.asarray(r, dtype=float)
        lo, hi = self.domain
        if np.any(r < lo) or np.any(r > hi) or (lo == 0.0 and self.spec.get("open_at_zero") and np.any(r <= 0)):
            raise DomainError(f"radius outside profile domain {self.domain}")
        return self.jet_fn(r)

    def __call__(self, r):
        return self.jet(r)[0]

    eval = __call__

    def deriv1(self, r):
        return self.jet(r)[1]

    def deriv2(self, r):
        return self.jet(r)[2]

    def to_json(self) -> dict:
        return {"knots": [float(k) for k in self.knots], "domain": [float(d) for d in self.domain], **self.spec}


# -- jet arithmetic ---------------------------------------------------------

def jet_pow(j: Jet, p: float) -> Jet:
    f, f1, f2 = j
    return (f**p, p * f ** (p - 1) * f1, p * (p - 1) * f ** (p - 2) * f1**2 + p * f ** (p - 1) * f2)


def jet_mul(a: Jet, b: Jet) -> Jet:
    return (a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + 2 * a[1] * b[1] + a[0] * b[2])


def jet_div(a: Jet, b: Jet) -> Jet:
    return jet_mul(a, jet_pow(b, -1.0))


def _rescaled(jet_fn, s: float):
    if s == 1.0:
        return jet_fn

    def scaled(r):
        f, f1, f2 = jet_fn(r / s)
        return f, f1 / s, f2 / s**2

    return scaled


def _check_dim(n):
    if int(n) != n or n < 3:
        raise InvalidDimensionError(f"dimension must be an integer >= 3, got {n!r}")


# -- elementary profiles ----------------------------------------------------

def _harmonic_potential(n: int, r) -> Jet:
    # 1 + r^(2-n), the Euclidean-harmonic potential of the Schwarzschild end
    return (1.0 + r ** (2 - n), (2 - n) * r ** (1 - n), (2 - n) * (1 - n) * r ** (-n))


def schwarzschild_factor(n: int, r, scale: float = 1.0) -> Jet:
    """``W_s = (1 + (s/r)^(n-2))^(2/(n-2))`` with its first two derivatives."""
    _check_dim(n)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("Schwarzschild factor needs r > 0")
    return _rescaled(lambda x: jet_pow(_harmonic_potential(n, x), 2.0 / (n - 2)), scale)(r)


def sphere_factor(sigma: float, r) -> Jet:
    """Round metric factor ``2 sigma^2 / (sigma^2 + r^2)`` of the north-pole chart."""
    r = np.asarray(r, dtype=float)
    s2 = sigma * sigma
    q = s2 + r * r
    return (2 * s2 / q, -4 * s2 * r / q**2, 4 * s2 * (3 * r * r - s2) / q**3)


def chart_from_south(sigma: float, r):
    """Radius in the opposite stereographic chart, ``sigma^2 / r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("chart change needs r > 0")
    return sigma * sigma / r


def scalar_curvature_radial(profile, n: int, r):
    """Scalar curvature of ``mu(r)^2 g_0`` for a radial profile ``mu``.

    ``profile`` is a :class:`RadialProfile` or a callable returning a jet.
    """
    _check_dim(n)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("scalar curvature is evaluated at r > 0")
    j = profile.jet(r) if isinstance(profile, RadialProfile) else profile(r)
    v, v1, v2 = jet_pow(j, (n - 2) / 2.0)
    lap = -(v2 + (n - 1) / r * v1)
    return 4.0 * (n - 1) / (n - 2) * j[0] ** (-(n + 2) / 2.0) * lap


# -- model manifolds --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelManifold:
    n: int
    rho: float
    W: RadialProfile
    label: str
    scale: float = 1.0
    interior: dict = field(default_factory=dict)
    _u_poly: object = field(default=None, repr=False)
    _u_radius: float = 0.0

    @property
    def mass(self) -> float:
        return 2.0 * self.scale ** (self.n - 2)

    @property
    def regular_at_origin(self) -> bool:
        return self.interior.get("kind") != "exact"

    def end_factor(self, r) -> Jet:
        return schwarzschild_factor(self.n, r, self.scale)

    def to_json(self) -> dict:
        return {"label": self.label, "n": self.n, "rho": self.rho, "scale": self.scale,
                "interior": dict(self.interior), "W": self.W.to_json()}


def _capped_potential(n: int, core: float):
    """Smooth superharmonic ``u`` equal to ``1 + r^(2-n)`` for ``r >= core``.

    ``u`` is the Newtonian potential of the unit mass density
    ``(1 - r^2/core^2)^4`` on the ball of radius ``core``, so ``-Laplace u``
    is non-negative and ``u`` is a polynomial in ``r^2`` inside the core.
    """
    x = Polynomial([0, 1])
    density = (1 - (x / core) ** 2) ** 4 * x ** (n - 1)
    enclosed = density.integ(lbnd=0.0)
    enclosed = enclosed / enclosed(core)
    # enclosed(r) = r^n Q(r); u'(r) = -(n-2) enclosed(r) r^(1-n) = -(n-2) r Q(r)
    Q = Polynomial(enclosed.coef[n:])
    du = -(n - 2) * x * Q
    prim = du.integ()
    u = Polynomial([1.0 + core ** (2 - n) - prim(core)]) + prim
    d2u = du.deriv()

    def jet(r):
        r = np.asarray(r, dtype=float)
        inner = r < core
        rr = np.where(inner, core, r)
        outside = _harmonic_potential(n, rr)
        return tuple(np.where(inner, p(r), o) for p, o in zip((u, du, d2u), outside))

    return jet, float(u(0.0)), u


def _polynomial_potential(n: int, rho: float, coeffs):
    c = Polynomial(np.asarray(coeffs, dtype=float))
    # coefficients act on (r/rho)^2
    u = c(Polynomial([0, 0, 1.0 / rho**2]))
    du, d2u = u.deriv(), u.deriv(2)

    def jet(r):
        r = np.asarray(r, dtype=float)
        inner = r < rho
        rr = np.where(inner, rho, r)
        outside = _harmonic_potential(n, rr)
        return tuple(np.where(inner, p(r), o) for p, o in zip((u, du, d2u), outside))

    return jet, float(u(0.0)), (u, du, d2u)


def interior_potential(model: "ModelManifold"):
    """``(u, a)``: polynomial potential ``u`` used on ``r < a`` (normalized radius), or ``(None, 0)``."""
    return model._u_poly, model._u_radius


def build_model_manifold(n: int, rho: float, interior="capped", label: str | None = None,
                         scale: float = 1.0, grid_points: int = 1000) -> ModelManifold:
    """Build a conformally flat model with an exactly Schwarzschild end for ``r >= rho``.

    ``interior`` is a kind string or a dict with ``kind`` in
    ``{"exact", "capped", "polynomial"}``:

    * ``exact``: ``W = W_s`` on all of ``r > 0`` (singular origin, kernel tests only);
    * ``capped``: smoothed Newtonian potential, parameter ``core`` in (0, 1]
      (fraction of ``rho`` carrying the mass; smaller core gives a higher cap);
    * ``polynomial``: ``u = sum c_k (r/rho)^(2k)`` inside ``rho``, parameter ``coeffs``,
      glued to ``1 + r^(2-n)`` with matching value and two derivatives.

    Everywhere ``W = u^(2/(n-2))``; the scalar curvature is checked on a grid.
    """
    _check_dim(n)
    if not rho > 0:
        raise DomainError("end radius rho must be positive")
    if not scale > 0:
        raise DomainError("scale must be positive")
    spec = {"kind": interior} if isinstance(interior, str) else dict(interior)
    kind = spec.get("kind", "capped")
    rho_hat = rho / scale
    knots: tuple = ()
    u_poly, u_radius = None, 0.0
    if kind == "exact":
        u_jet = lambda r: _harmonic_potential(n, r)  # noqa: E731
    elif kind == "capped":
        core = float(spec.setdefault("core", 0.6))
        if not 0 < core <= 1:
            raise InvalidInteriorError("core fraction must lie in (0, 1]")
        u_jet, u0, u_poly = _capped_potential(n, core * rho_hat)
        u_radius = core * rho_hat
        spec["cap_level"] = u0
        knots = (core * rho,)
    elif kind == "polynomial":
        u_jet, u0, polys = _polynomial_potential(n, rho_hat, spec["coeffs"])
        target = _harmonic_potential(n, np.array(rho_hat))
        for k, (p, t) in enumerate(zip(polys, target)):
            if abs(p(rho_hat) - t) > 1e-8 * max(1.0, abs(t)):
                raise GluingError(f"derivative {k} of the interior does not match the end at rho")
        spec["cap_level"] = u0
        u_poly, u_radius = polys[0], rho_hat
        knots = (rho,)
    else:
        raise InvalidInteriorError(f"unknown interior kind {kind!r}")

    w_jet = _rescaled(lambda r: jet_pow(u_jet(r), 2.0 / (n - 2)), scale)
    W = RadialProfile(w_jet, domain=(0.0, np.inf), knots=knots,
                      spec={"profile": "model-factor", "interior": spec, "scale": scale,
                            "open_at_zero": kind == "exact"})
    model = ModelManifold(n=n, rho=float(rho), W=W, scale=float(scale), interior=spec,
                          label=label or f"{kind}-n{n}-rho{rho:g}", _u_poly=u_poly, _u_radius=u_radius)
    lo = 1e-3 * rho if kind == "exact" else 1e-6 * rho
    r = np.concatenate([np.linspace(lo, rho, grid_points), np.linspace(rho, 4 * rho, grid_points // 4)])
    curv = scalar_curvature_radial(W, n, r)
    if np.min(curv) < -CURVATURE_TOL:
        raise InvalidInteriorError(f"interior has negative scalar curvature {np.min(curv):.3e}")
    return model


# -- compactification -------------------------------------------------------

def _smooth_abs(eps: float, order: int = 4):
    """Convex C^(2 order - 1) replacement of |t|, exact for |t| >= eps with |m'| <= 1."""
    x = Polynomial([0, 1])
    bump = (1 - x**2) ** order
    bump = bump * (2.0 / (bump.integ(lbnd=-1)(1.0)))
    M1 = bump.integ(lbnd=-1) - 1
    M0 = M1.integ(lbnd=-1) + 1
    M2 = bump

    def jet(t):
        z = t / eps
        inside = np.abs(z) < 1
        zc = np.clip(z, -1, 1)
        m = np.where(inside, eps * M0(zc), np.abs(t))
        m1 = np.where(inside, M1(zc), np.sign(t))
        m2 = np.where(inside, M2(zc) / eps, 0.0)
        return m, m1, m2

    return jet


@dataclass(frozen=True, eq=False)
class Compactification:
    n: int
    rho: float
    scale: float
    C_n: float
    sigma: float
    r_star: float
    R: float
    delta: float
    mollifier_width: float
    smoothing: float          # half-width of the blend in the potential variable
    derivative_jump: float    # unmollified mu_conf'(R*+) - mu_conf'(R*-)
    lam: RadialProfile
    mu_conf: RadialProfile
    total: RadialProfile      # lambda * W, the metric factor of the compactified metric
    min_curvature: float = float("nan")

    @property
    def R_prime(self) -> float:
        return self.sigma**2 / self.R

    @property
    def blend_end(self) -> float:
        """Radius beyond which the compactified metric is exactly round."""
        return self.r_star + self.mollifier_width

    def with_cap_radius(self, R: float) -> "Compactification":
        """Same lambda, with the spherical cap starting at ``R`` (>= blend end)."""
        if R < self.blend_end:
            raise DomainError("cap radius must lie beyond the mollifier window")
        return dataclasses.replace(self, R=float(R), delta=2 * self.sigma * np.arctan(self.sigma / R))

    def to_json(self) -> dict:
        return {
            "n": self.n, "rho": self.rho, "scale": self.scale, "C_n": self.C_n,
            "sigma": self.sigma, "r_star": self.r_star, "R": self.R, "R_prime": self.R_prime,
            "delta": self.delta, "mollifier_width": self.mollifier_width,
            "smoothing": self.smoothing, "derivative_jump": self.derivative_jump,
            "min_curvature": self.min_curvature, "curvature_tolerance": CURVATURE_TOL,
            "lambda": self.lam.to_json(), "mu_conf": self.mu_conf.to_json(),
        }


def compactification_radii(n: int, rho: float, C_n: float = 3.0, scale: float = 1.0):
    """Return ``(R*, sigma, R, delta)`` of the compactification in model units."""
    _check_dim(n)
    r_star = rho / scale + C_n
    Ws = schwarzschild_factor(n, r_star)[0]
    bracket = 2.0 / Ws - 1.0
    if not bracket > 0:
        raise InfeasibleTransitionError(f"transition bracket {bracket:.3e} <= 0; increase C_n")
    sigma = r_star / np.sqrt(bracket)
    R = sigma + 1.0
    delta = 2 * sigma * np.arctan(sigma / R)
    return r_star * scale, sigma * scale, R * scale, delta * scale


def _lower_crossing(gap, r_star: float) -> float:
    """Largest root of ``gap`` below ``r_star`` (0 if there is none)."""
    r = np.linspace(1e-3 * r_star, r_star * (1 - 1e-9), 4001)
    g = gap(r)
    neg = g < 0
    if not neg[-1]:
        raise MollifierError("inner branch is not below the outer one just inside R*")
    idx = np.nonzero(~neg)[0]
    if idx.size == 0:
        return 0.0
    i = idx[-1]
    return float(brentq(gap, r[i], r[i + 1], xtol=1e-14))


def build_compactification(model: ModelManifold, C_n: float = 3.0, mollifier_width: float | None = None,
                           grid_points: int = 1000) -> Compactification:
    """Conformal factor ``lambda`` turning the end into a round spherical cap.

    In the potential variable ``v = mu^((n-2)/2)`` the inner (Schwarzschild)
    branch is harmonic and the outer (sphere) branch superharmonic; near the
    transition radius ``R*`` the glued function is their minimum.  The kink
    is removed with a concave smooth minimum confined to
    ``[R* - w, R* + w]``, which keeps ``v`` superharmonic, hence the scalar
    curvature non-negative, and leaves both branches exact outside the window.
    """
    n, s = model.n, model.scale
    if not C_n > 0:
        raise InfeasibleTransitionError("C_n must be positive")
    r_star, sigma, R, delta = (x / s for x in compactification_radii(n, model.rho, C_n, s))
    rho = model.rho / s
    p = (n - 2) / 2.0
    v_in = lambda r: _harmonic_potential(n, r)  # noqa: E731
    v_out = lambda r: jet_pow(sphere_factor(sigma, r), p)  # noqa: E731
    gap = lambda r: v_in(r)[0] - v_out(r)[0]  # noqa: E731
    slope = v_in(np.array(r_star))[1] - v_out(np.array(r_star))[1]
    if not slope > 0:
        raise InfeasibleTransitionError(
            f"the glued factor would make a positive derivative jump at R* ({slope:.3e}); increase C_n")
    if mollifier_width is None:
        # the glued profile is a local minimum of the branches only above their
        # second crossing r0 < R*, so the window must stay clear of it
        r0 = _lower_crossing(gap, r_star)
        w = min(0.1 * r_star, 0.5 * (r_star - r0))
    else:
        w = mollifier_width / s
    if not (rho < r_star - w and r_star + w < R):
        raise MollifierError("mollifier window must lie strictly between rho and R")
    g_lo, g_hi = gap(np.array(r_star - w)), gap(np.array(r_star + w))
    if not (g_lo < 0 < g_hi):
        raise MollifierError("branches do not cross inside the mollifier window")
    eps = 0.25 * min(-g_lo, g_hi)  # blend where |v_in - v_out| < 2 eps
    far = np.geomspace(r_star + w, 1e6 * R, 4000)
    if np.min(gap(far)) < 2 * eps:
        raise MollifierError("outer branch does not stay below the inner branch")
    abs_jet = _smooth_abs(eps)

    def v_conf(r):
        a, b = v_in(r), v_out(r)
        t = (a[0] - b[0]) / 2
        m, m1, m2 = abs_jet(t)
        t1, t2 = (a[1] - b[1]) / 2, (a[2] - b[2]) / 2
        blend = ((a[0] + b[0]) / 2 - m, (a[1] + b[1]) / 2 - m1 * t1, (a[2] + b[2]) / 2 - m2 * t1**2 - m1 * t2)
        lo, hi = t <= -eps, t >= eps
        return tuple(np.where(lo, x, np.where(hi, y, z)) for x, y, z in zip(a, b, blend))

    def mu_jet(r):
        r = np.asarray(r, dtype=float)
        inner = r < r_star - w
        rr = np.where(inner, r_star - w, r)
        conf = jet_pow(v_conf(rr), 1.0 / p)
        ws = jet_pow(v_in(np.where(inner, r, 1.0)), 1.0 / p)
        return tuple(np.where(inner, x, y) for x, y in zip(ws, conf))

    W_hat = _rescaled(model.W.jet_fn, 1.0 / s)  # model factor in normalized radius

    def lam_jet(r):
        r = np.asarray(r, dtype=float)
        inner = r < r_star - w
        rr = np.where(inner, r_star - w, r)
        ratio = jet_div(jet_pow(v_conf(rr), 1.0 / p), jet_pow(v_in(rr), 1.0 / p))
        one = (np.ones_like(r), np.zeros_like(r), np.zeros_like(r))
        return tuple(np.where(inner, x, y) for x, y in zip(one, ratio))

    def total_jet(r):
        r = np.asarray(r, dtype=float)
        inner = r < r_star - w
        rr = np.where(inner, r_star - w, r)
        conf = jet_pow(v_conf(rr), 1.0 / p)
        ww = W_hat(np.where(inner, r, rho))
        return tuple(np.where(inner, x, y) for x, y in zip(ww, conf))

    knots = tuple(k * s for k in (r_star - w, r_star, r_star + w))
    common = {"n": n, "sigma": sigma * s, "r_star": r_star * s, "mollifier_width": w * s,
              "smoothing": eps, "scale": s}
    lam = RadialProfile(_rescaled(lam_jet, s), knots=knots, spec={"profile": "lambda", **common})
    mu_conf = RadialProfile(_rescaled(mu_jet, s), knots=knots, spec={"profile": "mu_conf", **common,
                                                                     "open_at_zero": True})
    total = RadialProfile(_rescaled(total_jet, s), knots=model.W.knots + knots,
                          spec={"profile": "compactified-factor", **common,
                                "open_at_zero": not model.regular_at_origin})

    jump = (sphere_factor(sigma, r_star)[1] - schwarzschild_factor(n, r_star)[1]) / s
    comp = Compactification(
        n=n, rho=model.rho, scale=s, C_n=float(C_n), sigma=sigma * s, r_star=r_star * s, R=R * s,
        delta=delta * s, mollifier_width=w * s, smoothing=eps, derivative_jump=float(jump),
        lam=lam, mu_conf=mu_conf, total=total)
    min_curv = float(np.min(curvature_grid(comp, model, grid_points)[1]))
    if min_curv < -CURVATURE_TOL:
        raise MollifierError(f"compactified scalar curvature {min_curv:.3e} below tolerance")
    return dataclasses.replace(comp, min_curvature=min_curv)


def curvature_grid(comp: Compactification, model: ModelManifold, points: int = 1000):
    """Scalar curvature of ``lambda^2 g`` on a verification grid.

    The grid covers ``(0, 2R]`` uniformly and resolves the mollifier window.
    Returns ``(r, curvature)``.
    """
    lo = (1e-3 if not model.regular_at_origin else 1e-6) * comp.rho
    r = np.linspace(lo, 2 * comp.R, points)
    win = np.linspace(comp.r_star - comp.mollifier_width, comp.r_star + comp.mollifier_width, points // 2)
    r = np.unique(np.concatenate([r, win]))
    return r, scalar_curvature_radial(comp.total, comp.n, r)
