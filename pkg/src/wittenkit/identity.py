"""Weighted Witten-spinor identity on conformally flat models.

The compactified manifold is ``Omega^2`` times the round sphere of radius
``sigma``, with ``Omega = lambda W (sigma^2 + r^2) / (2 sigma^2)`` in the
north chart.  Its Dirac Green's function is the conformal transform of the
sphere kernel, which turns the counter-term-subtracted integral into a 1-D
radial quadrature in the south chart.  The identity

    lhs_K + lhs_end = omega^2 (2 sigma^2)^(n-1) gamma_limit + N alpha

is then checked with every term computed independently.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .clifford import build_clifford_rep, sphere_area
from .errors import DomainError, InvalidSpectrumError, ToleranceError, VerificationError
from .kernels import counter_terms
from .quadrature import sphere_quadrature
from .radial import (Compactification, ModelManifold, RadialProfile, build_compactification,
                     interior_potential, sphere_factor)
from .witten import WittenFamily, deviation_operator, spinor_operator

QUAD_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CompactifiedModel:
    n: int
    sigma: float
    R: float
    Omega: RadialProfile
    model: ModelManifold | None = None
    comp: Compactification | None = None
    knots: tuple = ()

    @property
    def N(self) -> int:
        return 2 ** (self.n // 2)

    @property
    def R_prime(self) -> float:
        return self.sigma**2 / self.R

    @classmethod
    def round(cls, n: int, sigma: float, R: float) -> "CompactifiedModel":
        """The round sphere itself, ``Omega = 1``."""
        one = lambda r: (np.ones_like(r), np.zeros_like(r), np.zeros_like(r))  # noqa: E731
        return cls(n=n, sigma=float(sigma), R=float(R), Omega=RadialProfile(one, spec={"profile": "round"}))

    def with_cap_radius(self, R: float) -> "CompactifiedModel":
        if self.comp is None:
            return CompactifiedModel.round(self.n, self.sigma, R)
        return compactify(self.model, comp=self.comp.with_cap_radius(R))

    def to_json(self) -> dict:
        return {"n": self.n, "sigma": self.sigma, "R": self.R, "R_prime": self.R_prime,
                "model": self.model.to_json() if self.model else None,
                "compactification": self.comp.to_json() if self.comp else None}


def compactify(model: ModelManifold, C_n: float = 3.0, mollifier_width: float | None = None,
               comp: Compactification | None = None) -> CompactifiedModel:
    if comp is None:
        comp = build_compactification(model, C_n, mollifier_width)
    sigma = comp.sigma
    total = comp.total

    def omega_jet(r):
        r = np.asarray(r, dtype=float)
        t = total.jet(r)
        q = (sigma**2 + r * r) / (2 * sigma**2)
        q1, q2 = r / sigma**2, np.full_like(r, 1 / sigma**2)
        return t[0] * q, t[1] * q + t[0] * q1, t[2] * q + 2 * t[1] * q1 + t[0] * q2

    knots = tuple(sorted(set(total.knots) | {model.rho}))
    Omega = RadialProfile(omega_jet, knots=knots, spec={"profile": "Omega", "sigma": sigma})
    return CompactifiedModel(n=model.n, sigma=sigma, R=comp.R, Omega=Omega, model=model, comp=comp, knots=knots)


def _quad_pieces(f, breaks, tail: bool = False):
    """Sum of adaptive quadratures over consecutive breakpoints; ``tail`` adds ``[breaks[-1], inf)``."""
    total, err = 0.0, 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            v, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
            total, err = total + v, err + e
    if tail:
        v, e = integrate.quad(f, breaks[-1], np.inf, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
        total, err = total + v, err + e
    return total, err


# -- left-hand side ---------------------------------------------------------

def _angular_trace(op, family, r, order):
    dirs, w = sphere_quadrature(family.rep.n, order)
    P = op(family, r * np.asarray(dirs))
    return float(w @ np.real(np.trace(P, axis1=1, axis2=2)))


def lhs_weighted_integral(cm: CompactifiedModel, family: WittenFamily, angular_order: int = 8):
    """``(lhs_K, lhs_end, error)`` with ``lhs_K = int_K Tr Pi dvol`` and
    ``lhs_end = int_{r > rho} Tr(delta Pi) lambda dvol``."""
    model, n = cm.model, cm.n
    rho = model.rho
    W = model.W
    if not family.mode_free:
        # modes are singular at the origin, so K only makes sense for mode-free families
        raise DomainError("lhs_K needs a mode-free family (partial-wave modes are singular at the origin)")
    kb = [0.0] + [k for k in W.knots if 0 < k < rho] + [rho]
    fK = lambda r: _angular_trace(spinor_operator, family, max(r, 1e-300), angular_order) * W(r) ** n * r ** (n - 1)  # noqa: E731
    lhs_K, eK = _quad_pieces(fK, kb)
    # delta Pi vanishes identically on the end of a mode-free family
    return lhs_K, 0.0, eK


def end_deviation_integral(cm: CompactifiedModel, family: WittenFamily, angular_order: int = 16):
    """``int_{r > rho} Tr(delta Pi) lambda dvol`` for any family (modes allowed)."""
    model, n = cm.model, cm.n
    W, lam = model.W, cm.comp.lam
    fE = lambda r: _angular_trace(deviation_operator, family, r, angular_order) * lam(r) * W(r) ** n * r ** (n - 1)  # noqa: E731
    eb = [model.rho] + [k for k in cm.knots if k > model.rho] + [2 * cm.R]
    return _quad_pieces(fE, eb, tail=True)


def ball_integral_closed_form(model: ModelManifold) -> float:
    """``int_{B_rho} W d^n x`` from the polynomial interior (``n`` in {3, 4}).

    For ``n = 3`` and ``n = 4``, ``W`` is a polynomial in ``r`` inside the
    interior radius and ``r^(n-1) W_s`` is a polynomial on the rest of the ball.
    """
    n, s = model.n, model.scale
    if n not in (3, 4):
        raise NotImplementedError("closed form only for n = 3, 4")
    u, a = interior_potential(model)
    rho = model.rho / s
    x = Polynomial([0, 1])
    total = 0.0
    if u is not None:
        Wp = u**2 if n == 3 else u
        total += (Wp * x ** (n - 1)).integ(lbnd=0)(a)
    # r^(n-1) W_s = r^2 (1 + 1/r)^2 = r^2 + 2r + 1 (n=3); r^3 (1 + r^-2) = r^3 + r (n=4)
    end = Polynomial([1, 2, 1]) if n == 3 else Polynomial([0, 1, 0, 1])
    total += end.integ()(rho) - end.integ()(a)
    return float(sphere_area(n - 1) * total * s**n)


# -- right-hand side --------------------------------------------------------

def alpha_integral(cm: CompactifiedModel):
    """``(alpha_1, alpha_2, error)`` with ``alpha = alpha_1 - alpha_2``.

    ``alpha_1 = int_{B_R} 2 sigma^2/(sigma^2 + |x|^2)`` and
    ``alpha_2 = int_{B_R minus B_rho} W_s lambda``.
    """
    n, sigma, R = cm.n, cm.sigma, cm.R
    om = sphere_area(n - 1)
    f1 = lambda r: sphere_factor(sigma, r)[0] * r ** (n - 1)  # noqa: E731
    a1, e1 = integrate.quad(f1, 0.0, R, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    if cm.model is None:
        return om * a1, 0.0, om * e1
    rho = cm.model.rho
    total = cm.comp.total
    f2 = lambda r: total(r) * r ** (n - 1)  # noqa: E731
    breaks = [rho] + [k for k in cm.knots if rho < k < R] + [R]
    a2, e2 = _quad_pieces(f2, breaks)
    return om * a1, om * a2, om * (e1 + e2)


def theorem1_integral(cm: CompactifiedModel):
    """``int Tr[S~(n,x) S~(x,n) - S_d(n,x) S_d(x,n)] dvol~`` and its error estimate.

    With ``S~`` the ``Omega``-transform of the sphere kernel the integrand is
    ``(Omega - chi_cap) * s_product_trace`` against the round volume, which
    vanishes on the cap.  The quadrature runs over the south-chart radius
    ``r' in [R', inf)`` with ``Omega`` evaluated at ``r = sigma^2 / r'``.
    """
    n, sigma = cm.n, cm.sigma
    rep = build_clifford_rep(n)
    ct = counter_terms(rep, sigma, cm.R)
    om = rep.omega

    def f(rp):
        r = sigma**2 / rp
        F = 2 * sigma**2 / (sigma**2 + rp * rp)
        return om * cm.Omega(r) * ct.s_product_trace(rp) * F**n * rp ** (n - 1)

    inner = sorted(sigma**2 / k for k in cm.knots if 0 < k < cm.R)
    breaks = [cm.R_prime] + inner
    return _quad_pieces(f, breaks, tail=True)


def gamma_limit(cm: CompactifiedModel, theorem1: float | None = None) -> float:
    """``lim_{y -> n} Tr gamma(y) = theorem1_integral - Tr H_delta(n)``."""
    if theorem1 is None:
        theorem1 = theorem1_integral(cm)[0]
    rep = build_clifford_rep(cm.n)
    return theorem1 - rep.N * float(counter_terms(rep, cm.sigma, cm.R).h_delta(0.0))


def identity_prefactor(n: int, sigma: float) -> float:
    return sphere_area(n - 1) ** 2 * (2 * sigma**2) ** (n - 1)


@dataclass
class IdentityReport:
    lhs_K: float
    lhs_end: float
    alpha: float
    theorem1_integral: float
    h_delta_at_pole: float
    gamma_limit: float
    prefactor: float
    rhs: float
    residual_abs: float
    residual_rel: float
    quadrature_error_estimate: float
    within_quadrature_error: bool = True
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    label: str = ""
    n: int = 0
    rho: float = 0.0
    sigma: float = 0.0
    passed: bool = True

    @property
    def lhs(self) -> float:
        return self.lhs_K + self.lhs_end

    def to_json(self) -> dict:
        return asdict(self)


def verify_identity(cm: CompactifiedModel, family: WittenFamily, rtol: float = 1e-6, seed: int = 0,
                    raise_on_failure: bool = True) -> IdentityReport:
    if not family.mode_free:
        raise DomainError("the weighted identity is stated for the mode-free canonical family")
    rep = family.rep
    lhs_K, lhs_end, e_lhs = lhs_weighted_integral(cm, family)
    a1, a2, e_alpha = alpha_integral(cm)
    t1, e_t1 = theorem1_integral(cm)
    h_pole = rep.N * float(counter_terms(rep, cm.sigma, cm.R).h_delta(0.0))
    gam = t1 - h_pole
    P = identity_prefactor(cm.n, cm.sigma)
    alpha = a1 - a2
    rhs = P * gam + rep.N * alpha
    lhs = lhs_K + lhs_end
    err = e_lhs + P * e_t1 + rep.N * e_alpha
    res = abs(lhs - rhs)
    rel = res / abs(lhs) if lhs != 0 else res
    passed = bool(rel <= rtol)
    report = IdentityReport(
        lhs_K=lhs_K, lhs_end=lhs_end, alpha=alpha, theorem1_integral=t1, h_delta_at_pole=h_pole,
        gamma_limit=gam, prefactor=P, rhs=rhs, residual_abs=res, residual_rel=rel,
        quadrature_error_estimate=err, within_quadrature_error=bool(res <= 10 * err), seeds={"seed": seed},
        tolerances={"residual_rel": rtol, "quad_rtol": QUAD_RTOL},
        label=cm.model.label if cm.model else "round", n=cm.n,
        rho=cm.model.rho if cm.model else 0.0, sigma=cm.sigma, passed=passed)
    if not passed and raise_on_failure:
        raise VerificationError(f"identity residual {rel:.3e} above tolerance {rtol:g}", report=report)
    return report


@dataclass(frozen=True)
class BoundRatios:
    ratio1: float
    ratio2: float
    inf_spec_sq: float


def bound_report(cm: CompactifiedModel, report: IdentityReport, infspec: float) -> BoundRatios:
    """Scale-free ratios ``lhs sigma^2 infspec / (rho + 1)^n`` and ``gamma_limit sigma^n infspec``."""
    if not (infspec > 0 and math.isfinite(infspec)):
        raise InvalidSpectrumError("infspec must be positive and finite")
    n, sigma = cm.n, cm.sigma
    rho = cm.model.rho
    r1 = report.lhs * sigma**2 * infspec / (rho + 1) ** n
    r2 = report.gamma_limit * sigma**n * infspec
    if not (math.isfinite(r1) and math.isfinite(r2)):
        raise ToleranceError("non-finite bound ratio")
    return BoundRatios(ratio1=float(r1), ratio2=float(r2), inf_spec_sq=float(infspec))
