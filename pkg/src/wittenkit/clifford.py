"""Clifford algebra representations in arbitrary dimension.

Sign convention: ``v . w + w . v = -2 <v, w>`` with anti-Hermitian
generators, so that Clifford multiplication by a unit vector is unitary
and squares to ``-1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma, pi

import numpy as np

from .errors import InvalidDimensionError, ShapeError

_S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_S3 = np.array([[1, 0], [0, -1]], dtype=complex)


def sphere_area(k: int) -> float:
    """Surface volume of the unit k-sphere in R^{k+1}."""
    return 2.0 * pi ** ((k + 1) / 2) / gamma((k + 1) / 2)


@lru_cache(maxsize=None)
def _hermitian_gammas(n: int) -> tuple:
    # Hermitian generators with {G_i, G_j} = 2 delta_ij, built two dimensions at a time.
    gam = [_S1, _S2]
    d = 2
    while d + 2 <= n:
        m = gam[0].shape[0]
        eye = np.eye(m, dtype=complex)
        gam = [np.kron(g, _S1) for g in gam] + [np.kron(eye, _S2), np.kron(eye, _S3)]
        d += 2
    if d < n:
        # odd n: the normalized chirality element squares to one and anticommutes with the rest
        gam = gam + [(1j) ** (-(d // 2)) * np.linalg.multi_dot(gam)]
    return tuple(gam)


@dataclass(frozen=True, eq=False)
class CliffordRep:
    n: int
    N: int
    gammas: np.ndarray  # shape (n, N, N), read-only
    omega: float

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.N, dtype=complex)

    def vec(self, v) -> np.ndarray:
        """Matrix of Clifford multiplication by ``v``; broadcasts over leading axes."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n:
            raise ShapeError(f"vector has length {v.shape[-1]}, expected {self.n}")
        return np.tensordot(v, self.gammas, axes=([-1], [0]))


def build_clifford_rep(n: int) -> CliffordRep:
    if int(n) != n or n < 3:
        raise InvalidDimensionError(f"dimension must be an integer >= 3, got {n!r}")
    n = int(n)
    gammas = 1j * np.array(_hermitian_gammas(n))
    gammas.setflags(write=False)
    return CliffordRep(n=n, N=2 ** (n // 2), gammas=gammas, omega=sphere_area(n - 1))


def clifford_mul(rep: CliffordRep, v, m) -> np.ndarray:
    """Return ``(sum_i v_i gamma_i) @ m``."""
    m = np.asarray(m)
    if m.shape[-2:] != (rep.N, rep.N) and m.shape[-1:] != (rep.N,):
        raise ShapeError(f"spinor matrix must be {rep.N}x{rep.N}, got {m.shape}")
    vm = rep.vec(v)
    if m.ndim >= 2 and m.shape[-2:] == (rep.N, rep.N):
        return vm @ m
    return np.einsum("...ij,...j->...i", vm, m)


def trace(m) -> complex:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ShapeError(f"not a square matrix: {m.shape}")
    return np.trace(m, axis1=-2, axis2=-1)


def clifford_residual(rep: CliffordRep) -> float:
    """Max entrywise deviation from the Clifford relation."""
    g = rep.gammas
    eye = rep.identity
    worst = 0.0
    for i in range(rep.n):
        for j in range(rep.n):
            target = -2.0 * eye if i == j else 0.0 * eye
            worst = max(worst, float(np.max(np.abs(g[i] @ g[j] + g[j] @ g[i] - target))))
    return worst
