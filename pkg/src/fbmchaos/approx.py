"""Approximating functionals built from a noise path.

All multi-dimensional integrals reduce to per-cell integrals
``c_i = int_{cell i} w theta`` on a uniform grid of width ``delta``, which are
exact (see :func:`cell_integrals`). Only the indicator of ``|x_i - x_j| < eps``
is approximated, by its value at cell centres. Pairs of cells whose centre
distance is within ``delta`` of ``eps`` can be misclassified;
:func:`exclusion_error_bound` bounds their total contribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .kernel import (DEFAULT_QUADRATURE, GammaWeight, HurstLike, QuadratureSpec, as_hurst,
                     kernel_table)
from .noise import PiecewiseConstantPath, abs_cell_integrals, cell_integrals, integrate_against
from .simple import Box, SimpleFunction

__all__ = [
    "ExclusionSpec", "GridSpec", "GridResolutionError", "MAX_APPROX_ARITY",
    "band_matrix", "eta_eps", "y_eps_product", "band_functional", "i_n_eps", "f_eps",
    "exclusion_error_bound",
]

MAX_APPROX_ARITY = 3


class GridResolutionError(ValueError):
    """Grid too coarse to resolve the exclusion band (``delta > eps / 4``)."""


@dataclass(frozen=True)
class ExclusionSpec:
    """Band half-width of the diagonal exclusion ``1{|x_i - x_j| > eps}``."""

    eps: float

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError("exclusion eps must be positive and finite")


@dataclass(frozen=True)
class GridSpec:
    """Uniform cells of width ``delta``, by default ``eps / ratio``.

    The cell count is ``ceil(1 / delta)``, so the realized width never exceeds
    the requested one.
    """

    ratio: float = 8.0
    delta: float | None = None

    def __post_init__(self):
        if self.delta is None and self.ratio < 4.0:
            raise GridResolutionError("grid ratio must be at least 4")
        if self.delta is not None and not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")

    def cells(self, eps: float) -> int:
        d = self.delta if self.delta is not None else min(eps, 1.0) / self.ratio
        M = math.ceil(1.0 / d - 1e-9)
        if 1.0 / M > eps / 4.0 * (1 + 1e-12):
            raise GridResolutionError(f"delta = {1.0 / M:.6g} exceeds eps/4 = {eps / 4:.6g}")
        return M

    def edges(self, eps: float) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.cells(eps) + 1)

    def refine(self) -> "GridSpec":
        if self.delta is not None:
            return GridSpec(self.ratio, self.delta / 2)
        return GridSpec(self.ratio * 2)


def _offset_weights(M: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Band weight and ambiguity flag by cell offset ``k``.

    A pair at centre distance exactly ``eps`` straddles the band edge
    symmetrically and gets weight 1/2.
    """
    k = np.arange(M, dtype=float)
    x = k - eps * M
    tie = np.abs(x) <= 1e-9 * max(1.0, eps * M)
    near = np.where(tie, 0.5, (x < 0).astype(float))
    ambiguous = np.abs(x) < 1.0 - 1e-12
    return near, ambiguous.astype(float)


@lru_cache(maxsize=32)
def band_matrix(M: int, eps: float) -> np.ndarray:
    """Cell-pair weight of ``1{|x - y| < eps}`` evaluated at cell centres."""
    B = toeplitz(_offset_weights(M, eps)[0])
    B.setflags(write=False)
    return B


@lru_cache(maxsize=32)
def _ambiguity_matrix(M: int, eps: float) -> np.ndarray:
    A = toeplitz(_offset_weights(M, eps)[1])
    A.setflags(write=False)
    return A


def eta_eps(H: HurstLike, path: PiecewiseConstantPath, t: float,
            q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``int_0^t K_H(t, s) theta(s) ds``."""
    if t == 0.0:
        return 0.0
    return integrate_against(path, kernel_table(H, t, q), 0.0, t)


def _weights(H, box: Box, t: float, q) -> list[GammaWeight] | None:
    ws = [GammaWeight(H, iv, t, q) for iv in box.intervals]
    if any(w.hi <= w.lo for w in ws):
        return None
    return ws


def y_eps_product(H: HurstLike, f: SimpleFunction, path: PiecewiseConstantPath, t: float,
                  q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``sum_k alpha_k prod_i (eta(b_k^i ^ t) - eta(a_k^i ^ t))``."""
    Hp = as_hurst(H).require_chaos()
    total = 0.0
    for c, box in f.terms:
        ws = _weights(Hp, box, t, q)
        if ws is None:
            continue
        prod = c
        for w in ws:
            prod *= integrate_against(path, w, 0.0, w.hi)
        total += prod
    return total


def band_functional(w1, w2, path: PiecewiseConstantPath, eps: float,
                    grid: GridSpec = GridSpec()) -> float:
    """``int int w1(x) w2(y) theta(x) theta(y) 1{|x - y| < eps} dx dy``."""
    edges = grid.edges(eps)
    c1 = cell_integrals(path, w1, edges)
    c2 = cell_integrals(path, w2, edges)
    return float(c1 @ band_matrix(len(c1), eps) @ c2)


def _check_arity(n: int):
    if not (1 <= n <= MAX_APPROX_ARITY):
        raise ValueError(f"arity {n} not supported (1..{MAX_APPROX_ARITY})")


def i_n_eps(H: HurstLike, f: SimpleFunction, path: PiecewiseConstantPath, t: float,
            excl: ExclusionSpec, grid: GridSpec = GridSpec(),
            q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Diagonal-excluded functional ``I_{n,eps}(f)_t`` for arity ``n <= 3``."""
    Hp = as_hurst(H).require_chaos()
    n = f.arity
    _check_arity(n)
    edges = grid.edges(excl.eps)
    M = len(edges) - 1
    G = 1.0 - band_matrix(M, excl.eps)
    total = 0.0
    for coef, box in f.terms:
        ws = _weights(Hp, box, t, q)
        if ws is None:
            continue
        c = [cell_integrals(path, w, edges) for w in ws]
        if n == 1:
            val = c[0].sum()
        elif n == 2:
            val = c[0] @ G @ c[1]
        else:
            S = (G * c[2]) @ G
            val = c[0] @ (G * S) @ c[1]
        total += coef * float(val)
    return total


def f_eps(w1, w2, w3, path: PiecewiseConstantPath, eps: float,
          grid: GridSpec = GridSpec(), h=None) -> float:
    """``int w1 w2 w3 1{|x1-x2|<eps} 1{|x1-x3|<eps} theta theta theta h``.

    ``h(x1, x2, x3)`` is evaluated at cell centres and must satisfy ``|h| <= 1``;
    it defaults to 1.
    """
    edges = grid.edges(eps)
    M = len(edges) - 1
    B = band_matrix(M, eps)
    c1, c2, c3 = (cell_integrals(path, w, edges) for w in (w1, w2, w3))
    if h is None:
        return float(np.sum(c1 * (B @ c2) * (B @ c3)))
    mid = 0.5 * (edges[:-1] + edges[1:])
    hv = np.asarray(h(mid[:, None, None], mid[None, :, None], mid[None, None, :]), dtype=float)
    hv = np.broadcast_to(hv, (M, M, M))
    if np.any(np.abs(hv) > 1.0 + 1e-12):
        raise ValueError("h must be bounded by 1 in absolute value")
    T = hv * B[:, :, None] * B[:, None, :]
    return float(np.einsum("ijk,i,j,k->", T, c1, c2, c3))


def exclusion_error_bound(H: HurstLike, f: SimpleFunction, path: PiecewiseConstantPath,
                          t: float, excl: ExclusionSpec, grid: GridSpec = GridSpec(),
                          q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Upper bound on ``|i_n_eps - exact diagonal-excluded integral|``.

    Sums ``|alpha| prod_i int_{cell} |w_i theta|`` over cell tuples in which
    at least one pair is ambiguous (centre distance within ``delta`` of eps).
    """
    Hp = as_hurst(H).require_chaos()
    n = f.arity
    _check_arity(n)
    edges = grid.edges(excl.eps)
    A = _ambiguity_matrix(len(edges) - 1, excl.eps)
    total = 0.0
    for coef, box in f.terms:
        ws = _weights(Hp, box, t, q)
        if ws is None or n == 1:
            continue
        a = [abs_cell_integrals(path, w, edges) for w in ws]
        s = [x.sum() for x in a]
        if n == 2:
            val = a[0] @ A @ a[1]
        else:
            val = (a[0] @ A @ a[1]) * s[2] + (a[0] @ A @ a[2]) * s[1] + (a[1] @ A @ a[2]) * s[0]
        total += abs(coef) * float(val)
    return total
