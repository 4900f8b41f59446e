"""Exact Witten spinors on conformally flat models and the spinor operator.

On ``g = W^2 g_0`` a spinor solves the Dirac equation iff ``W^((n-1)/2) psi``
is flat-harmonic.  Constant spinors, the dipole fields ``(x . c)/|x|^n`` and
their directional derivatives are flat-harmonic away from the origin, so the
families here are exact.  The spinor bundle is trivialised by the flat
frame; all conformal factors are carried explicitly.

Family members are indexed from 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordRep
from .errors import DomainError, ShapeError
from .quadrature import sphere_quadrature
from .radial import ModelManifold


@dataclass(frozen=True)
class Mode:
    """A harmonic partial wave added to the family.

    ``coeffs`` is an ``N x N`` complex matrix whose column ``i`` is the
    coefficient spinor used for member ``i``.  ``l = 1`` is the dipole
    ``(x . c)/|x|^n``; ``l = 2`` is its derivative along ``direction``.
    """

    l: int
    coeffs: np.ndarray
    direction: tuple = ()

    def field(self, rep: CliffordRep, x: np.ndarray) -> np.ndarray:
        """Flat-harmonic matrix field at points ``x`` of shape ``(K, n)``; returns ``(K, N, N)``."""
        r2 = np.sum(x * x, axis=1)
        n = rep.n
        if self.l == 1:
            vec = x / r2[:, None] ** (n / 2)
        elif self.l == 2:
            v = np.asarray(self.direction, dtype=float)
            vec = v[None, :] / r2[:, None] ** (n / 2) - n * (x @ v)[:, None] * x / r2[:, None] ** (n / 2 + 1)
        else:
            raise ValueError(f"unsupported mode order l={self.l}")
        return np.einsum("ki,iab,bc->kac", vec, rep.gammas, self.coeffs)

    @classmethod
    def from_json(cls, spec: dict, rep: CliffordRep) -> "Mode":
        c = np.asarray(spec["coeffs"], dtype=float)
        coeffs = c[..., 0] + 1j * c[..., 1] if c.ndim == 3 else c.astype(complex)
        if coeffs.shape != (rep.N, rep.N):
            raise ShapeError(f"mode coefficients must be {rep.N}x{rep.N}")
        l = int(spec["l"])
        direction = tuple(spec.get("direction", [1.0] + [0.0] * (rep.n - 1))) if l == 2 else ()
        if l == 2 and len(direction) != rep.n:
            raise ShapeError("mode direction has the wrong length")
        return cls(l=l, coeffs=coeffs, direction=direction)


@dataclass(frozen=True, eq=False)
class WittenFamily:
    model: ModelManifold
    rep: CliffordRep
    basis: np.ndarray                 # N x N unitary, column i is psi_{0,i}
    modes: tuple = field(default=())

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.shape != (self.rep.N, self.rep.N):
            raise ShapeError("basis must be N x N")
        if np.max(np.abs(b.conj().T @ b - np.eye(self.rep.N))) > 1e-14:
            raise ValueError("basis spinors are not orthonormal")
        object.__setattr__(self, "basis", b)

    @property
    def mode_free(self) -> bool:
        return len(self.modes) == 0

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.rep.n:
            raise ShapeError(f"points must have {self.rep.n} coordinates")
        return x, single

    def flat_field(self, x) -> np.ndarray:
        """``W^((n-1)/2) Psi``: the flat-harmonic part, shape ``(K, N, N)``."""
        x, _ = self._points(x)
        out = np.broadcast_to(self.basis, (len(x),) + self.basis.shape).copy()
        for m in self.modes:
            out += m.field(self.rep, x)
        return out

    def matrix(self, x) -> np.ndarray:
        """``Psi(x)``: columns are the Witten spinors ``psi_i(x)``."""
        x, single = self._points(x)
        r = np.linalg.norm(x, axis=1)
        if not self.mode_free and np.any(r == 0):
            raise DomainError("partial-wave modes are singular at the origin")
        W = self.model.W(r)
        out = W[:, None, None] ** (-(self.rep.n - 1) / 2) * self.flat_field(x)
        return out[0] if single else out


def make_family(model: ModelManifold, rep: CliffordRep, modes=(), basis=None) -> WittenFamily:
    if rep.n != model.n:
        raise ShapeError("Clifford representation and model dimensions differ")
    basis = np.eye(rep.N, dtype=complex) if basis is None else basis
    return WittenFamily(model=model, rep=rep, basis=basis, modes=tuple(modes))


def witten_spinor(family: WittenFamily, i: int, x) -> np.ndarray:
    if not 0 <= i < family.rep.N:
        raise IndexError(f"spinor index {i} outside 0..{family.rep.N - 1}")
    return family.matrix(x)[..., i]


def spinor_operator(family: WittenFamily, x) -> np.ndarray:
    """``Pi(x) = sum_i |psi_i><psi_i|``."""
    P = family.matrix(x)
    return P @ np.conj(np.swapaxes(P, -1, -2))


def weight(model: ModelManifold, r):
    """``w_Pi``: the Schwarzschild value of ``Pi / Identity`` on the end, 0 on ``K``."""
    r = np.asarray(r, dtype=float)
    end = r >= model.rho
    Ws = model.end_factor(np.where(end, r, model.rho))[0]
    return np.where(end, Ws ** (1 - model.n), 0.0)


def deviation_matrix(family: WittenFamily, x) -> np.ndarray:
    x, single = family._points(x)
    r = np.linalg.norm(x, axis=1)
    if np.any(r < family.model.rho):
        raise DomainError("the Witten deviation is defined on the asymptotic end only")
    Ws = family.model.end_factor(r)[0]
    ref = Ws[:, None, None] ** (-(family.rep.n - 1) / 2) * family.basis
    out = family.matrix(x) - ref
    return out[0] if single else out


def deviation_operator(family: WittenFamily, x) -> np.ndarray:
    """``delta Pi = sum_i |delta psi_i><delta psi_i|`` on ``|x| >= rho``."""
    D = deviation_matrix(family, x)
    return D @ np.conj(np.swapaxes(D, -1, -2))


def partial_wave_check(family: WittenFamily, r: float, order: int = 24):
    """Angular integrals of ``Tr(Pi - w_Pi)`` and ``Tr(delta Pi)`` over the sphere of radius ``r``.

    The two agree because the cross terms between different partial waves
    integrate to zero.
    """
    if r <= family.model.rho:
        raise DomainError("partial waves are compared on the end, r > rho")
    dirs, w = sphere_quadrature(family.rep.n, order)
    x = r * np.asarray(dirs)
    P = spinor_operator(family, x)
    trP = np.real(np.trace(P, axis1=1, axis2=2)) - family.rep.N * weight(family.model, r)
    trD = np.real(np.trace(deviation_operator(family, x), axis1=1, axis2=2))
    return float(w @ trP), float(w @ trD)
