"""Quadrature rules on the reference tetrahedron.

Reference element: vertices (0,0,0), (1,0,0), (0,1,0), (0,0,1), volume 1/6.
Rules are exact for polynomials up to the requested total degree.  Low
degrees use the classic symmetric rules; higher degrees fall back to a
collapsed (Duffy) Gauss-Legendre product, which is exact by construction
for any degree.
"""

from functools import lru_cache

import numpy as np

# degree-2 rule: 4 symmetric points
_D2_A = 0.5854101966249685  # (5 + 3*sqrt(5)) / 20
_D2_B = 0.1381966011250105  # (5 - sqrt(5)) / 20


@lru_cache(maxsize=None)
def tet_rule(degree):
    """Points (n,3) and weights (n,) on the reference tet; weights sum to 1/6."""
    if degree <= 1:
        pts = np.array([[0.25, 0.25, 0.25]])
        wts = np.array([1.0 / 6.0])
    elif degree == 2:
        a, b = _D2_A, _D2_B
        pts = np.array(
            [[a, b, b], [b, a, b], [b, b, a], [b, b, b]]
        )
        wts = np.full(4, 1.0 / 24.0)
    else:
        pts, wts = _collapsed_gauss(degree)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def _collapsed_gauss(degree):
    # Duffy map x=u, y=v(1-u), z=w(1-u)(1-v) lifts a monomial of total
    # degree d to per-axis degrees at most d+2, d+1, d.
    m = (degree + 3 + 1) // 2
    x, w = np.polynomial.legendre.leggauss(m)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V, W = np.meshgrid(u, u, u, indexing="ij")
    WU, WV, WW = np.meshgrid(wu, wu, wu, indexing="ij")
    jac = (1.0 - U) ** 2 * (1.0 - V)
    pts = np.column_stack(
        [U.ravel(), (V * (1.0 - U)).ravel(), (W * (1.0 - U) * (1.0 - V)).ravel()]
    )
    wts = (WU * WV * WW * jac).ravel()
    return pts, wts


def barycentric(points):
    """Barycentric coordinates (n,4) of reference-tet points (n,3)."""
    lam0 = 1.0 - points.sum(axis=1)
    return np.column_stack([lam0, points])
