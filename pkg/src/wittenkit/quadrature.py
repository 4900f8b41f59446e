"""Small quadrature helpers shared by the kernel, model and identity modules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special


def gauss_panels(a: float, b: float, panels: int, order: int):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid, half = (edges[1:] + edges[:-1]) / 2, (edges[1:] - edges[:-1]) / 2
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


@lru_cache(maxsize=32)
def _sphere_rule(n: int, order: int):
    phi = 2 * np.pi * np.arange(2 * order) / (2 * order)
    pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    wts = np.full(2 * order, np.pi / order)
    for k in range(1, n - 1):
        # next polar angle, measure sin^k(theta) dtheta = (1 - c^2)^((k-1)/2) dc
        if k % 2 == 1:
            c, w = np.polynomial.legendre.leggauss(order)
            w = w * (1 - c * c) ** ((k - 1) / 2)
        else:
            c, w = special.roots_jacobi(order, (k - 1) / 2, (k - 1) / 2)
        sn = np.sqrt(1 - c * c)
        pts = np.concatenate([np.repeat(c[:, None], len(pts), 0),
                              (sn[:, None, None] * pts[None]).reshape(-1, pts.shape[1])], axis=1)
        wts = (w[:, None] * wts[None]).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def sphere_quadrature(n: int, order: int):
    """Product Gauss rule on ``S^(n-1)``: ``(points (K, n), weights (K,))``.

    Hyperspherical angles, Gauss-Legendre (or Gauss-Jacobi for half-integer
    weights) in the cosine of each polar angle and the trapezoid rule in the
    azimuth.  Exact for polynomials of degree below ``order`` in each angle.
    """
    return _sphere_rule(int(n), int(order))
