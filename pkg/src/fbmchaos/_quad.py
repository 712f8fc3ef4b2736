"""Gauss rules and graded composite quadrature for endpoint-singular integrands."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class QuadratureError(RuntimeError):
    """Raised when a quadrature error estimate exceeds the requested tolerance."""


@lru_cache(maxsize=64)
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi01(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] for the weight y**beta (beta > -1)."""
    if beta <= -1.0:
        raise ValueError(f"Jacobi exponent must exceed -1, got {beta}")
    x, w = roots_jacobi(n, 0.0, beta)
    y = 0.5 * (x + 1.0)
    w = w * 2.0 ** (-beta - 1.0)
    y.setflags(write=False)
    w.setflags(write=False)
    return y, w


def graded_integral(func, a: float, b: float, *, left_exponent: float = 0.0,
                    right_exponent: float = 0.0, levels: int = 48,
                    order: int = 20) -> float:
    """Integrate ``func`` over [a, b] with geometric grading toward both ends.

    ``func`` must be vectorized. The innermost panel at each end uses a
    Gauss-Jacobi rule for the weight ``|x - end|**exponent``; pass the known
    singular exponent of the integrand there (0 for a bounded integrand).
    """
    if b <= a:
        return 0.0
    xg, wg = gauss_legendre01(order)
    half = 0.5 * (b - a)
    total = 0.0
    # geometric panels [end + half*2^-(k+1), end + half*2^-k] on each side
    k = np.arange(levels)
    lo = half * 2.0 ** -(k + 1.0)
    hi = half * 2.0 ** -k
    widths = hi - lo
    offs = lo[:, None] + widths[:, None] * xg[None, :]
    wts = (widths[:, None] * wg[None, :]).ravel()
    total += np.dot(wts, func((a + offs).ravel()))
    total += np.dot(wts, func((b - offs).ravel()))
    tiny = half * 2.0 ** -levels
    for end, sign, expo in ((a, 1.0, left_exponent), (b, -1.0, right_exponent)):
        yj, wj = gauss_jacobi01(order, float(expo))
        pts = end + sign * tiny * yj
        # func(x) / |x-end|^expo is treated as smooth on the last panel
        vals = func(pts) / (tiny * yj) ** expo
        total += tiny ** (expo + 1.0) * np.dot(wj, vals)
    if not np.isfinite(total):
        raise QuadratureError("non-finite value in graded quadrature")
    return float(total)


def graded_integral_pieces(func, points, *, exponents=None, **kwargs) -> float:
    """Sum of :func:`graded_integral` over consecutive pieces of ``points``.

    ``exponents`` maps a breakpoint to the singular exponent used on both
    sides of it.
    """
    pts = sorted(set(float(p) for p in points))
    exponents = exponents or {}
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += graded_integral(func, lo, hi,
                                 left_exponent=exponents.get(lo, 0.0),
                                 right_exponent=exponents.get(hi, 0.0), **kwargs)
    return total
