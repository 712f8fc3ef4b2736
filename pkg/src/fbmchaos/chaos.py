"""Exact-in-law multiple fractional Wiener-Ito integrals of simple functions.

fBm is sampled on a finite grid by Cholesky factorization of its covariance.
For a pure tensor ``1_{I_1} (x) ... (x) 1_{I_n}`` the multiple integral is the
Wick product of the increments ``dB_i``: a sum over partial matchings of
``{1..n}``, each matched pair contributing ``-<1_{I_i}, 1_{I_j}>_H`` and each
unmatched index its increment.

Paths may carry a batch axis: ``values`` of shape ``(G,)`` or ``(N, G)``.
Every function here then returns one value per batch row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernel import HurstLike, Interval, as_hurst, covariance_R, indicator_inner_product
from .noise import SeedLike, as_generator
from .simple import SimpleFunction, clip, inner_product_Hn, symmetrize

__all__ = [
    "FbmPath", "BmPath", "OffGridError", "CovarianceFactorizationError",
    "MAX_CHAOS_ORDER", "experiment_grid", "sample_fbm", "sample_bm", "increment",
    "partial_matchings", "exact_multiple_integral", "analytic_variance",
    "analytic_covariance", "wiener_multiple_integral",
]

MAX_CHAOS_ORDER = 4
GRID_TOL = 1e-12
MAX_JITTER = 1e-12


class OffGridError(ValueError):
    """An increment was requested at a time that is not a grid node."""


class CovarianceFactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class FbmPath:
    """fBm sampled at ``grid`` (``grid[0] == 0``); ``values[..., 0] == 0``."""

    grid: np.ndarray
    values: np.ndarray
    H: float = 0.5

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing and start at 0")
        if v.shape[-1] != len(g):
            raise ValueError("one value per grid time required")
        if np.any(v[..., 0] != 0.0):
            raise ValueError("path must start at 0")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    def index_of(self, x: float) -> int:
        j = int(np.searchsorted(self.grid, x - GRID_TOL))
        if j >= len(self.grid) or abs(self.grid[j] - x) > GRID_TOL:
            raise OffGridError(f"time {x!r} is not on the path grid")
        return j

    def at(self, x: float):
        return self.values[..., self.index_of(x)]


class BmPath(FbmPath):
    """Standard Brownian motion, the ``H = 1/2`` case."""

    def __init__(self, grid, values):
        super().__init__(grid, values, 0.5)


def experiment_grid(f: SimpleFunction, probes=(1.0,), extra=()) -> np.ndarray:
    """All endpoints of ``clip(f, t)`` for every probe ``t``, with 0 prepended."""
    pts = {0.0}
    for t in probes:
        pts.add(float(t))
        pts.update(min(x, float(t)) for x in f.endpoints())
    pts.update(float(x) for x in extra)
    return np.array(sorted(pts))


@lru_cache(maxsize=64)
def _cholesky(H: float, grid: tuple[float, ...]) -> np.ndarray:
    t = np.asarray(grid)
    C = covariance_R(H, t[:, None], t[None, :])
    ridge = 0.0
    while True:
        try:
            L = np.linalg.cholesky(C + ridge * np.eye(len(t)))
            break
        except np.linalg.LinAlgError:
            ridge = 1e-16 if ridge == 0.0 else ridge * 10.0
            if ridge > MAX_JITTER * (1 + 1e-9):
                raise CovarianceFactorizationError(
                    f"covariance not factorizable with ridge <= {MAX_JITTER}") from None
    L.setflags(write=False)
    return L


def sample_fbm(H: HurstLike, grid, seed: SeedLike, size: int | None = None) -> FbmPath:
    """Gaussian vector with covariance ``R(t_i, t_j)`` on ``grid``.

    ``grid`` lists times in (0, 1]; 0 is prepended when missing. With
    ``size`` a batch of ``size`` independent paths is drawn from one stream.
    """
    Hf = as_hurst(H).H
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) == 0:
        raise ValueError("grid must be a nonempty 1-D sequence")
    if g[0] == 0.0:
        g = g[1:]
    if len(g) == 0 or g[0] <= 0.0 or g[-1] > 1.0 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing in (0, 1]")
    L = _cholesky(Hf, tuple(g.tolist()))
    rng = as_generator(seed)
    shape = (len(g),) if size is None else (size, len(g))
    z = rng.standard_normal(shape)
    x = z @ L.T
    zeros = np.zeros(shape[:-1] + (1,))
    full = np.concatenate([[0.0], g])
    if Hf == 0.5:
        return BmPath(full, np.concatenate([zeros, x], axis=-1))
    return FbmPath(full, np.concatenate([zeros, x], axis=-1), Hf)


def sample_bm(grid, seed: SeedLike, size: int | None = None) -> BmPath:
    return sample_fbm(0.5, grid, seed, size)


def increment(path: FbmPath, I: Interval, t: float = 1.0):
    """``B(b ^ t) - B(a ^ t)`` read off the grid (no interpolation)."""
    lo, hi = min(I.a, t), min(I.b, t)
    if hi <= lo:
        return np.zeros(path.batch_shape) if path.batch_shape else 0.0
    return path.at(hi) - path.at(lo)


@lru_cache(maxsize=None)
def partial_matchings(n: int) -> tuple[tuple[tuple[tuple[int, int], ...], tuple[int, ...]], ...]:
    """Every set of disjoint pairs in ``range(n)``, each listed once.

    Returns ``(pairs, unmatched)`` tuples, the empty matching first.
    """
    out = []

    def rec(free: tuple[int, ...], pairs: tuple, single: tuple):
        if not free:
            out.append((pairs, single))
            return
        i, rest = free[0], free[1:]
        rec(rest, pairs, single + (i,))
        for k, j in enumerate(rest):
            rec(rest[:k] + rest[k + 1:], pairs + ((i, j),), single)

    rec(tuple(range(n)), (), ())
    out.sort(key=lambda m: len(m[0]))
    return tuple(out)


def _check_order(n: int, max_order: int):
    if n > max_order:
        raise ValueError(f"chaos order {n} exceeds the configured bound {max_order}")


def exact_multiple_integral(H: HurstLike, f: SimpleFunction, t: float, path: FbmPath,
                            max_order: int = MAX_CHAOS_ORDER):
    """``I_n^H(f 1_[0,t]^n)`` on the given path(s)."""
    Hp = as_hurst(H).require_chaos()
    n = f.arity
    _check_order(n, max_order)
    total = np.zeros(path.batch_shape) if path.batch_shape else 0.0
    matchings = partial_matchings(n)
    for c, box in f.terms:
        ivs = [iv.clip(t) for iv in box.intervals]
        if any(iv.is_empty for iv in ivs):
            continue
        dB = [increment(path, iv) for iv in ivs]
        gram = {(i, j): indicator_inner_product(Hp, ivs[i], ivs[j])
                for i in range(n) for j in range(i + 1, n)}
        acc = 0.0
        for pairs, single in matchings:
            coef = (-1.0) ** len(pairs)
            for p in pairs:
                coef *= gram[p]
            if coef == 0.0:
                continue
            prod = coef
            for i in single:
                prod = prod * dB[i]
            acc = acc + prod
        total = total + c * acc
    return total


def analytic_covariance(H: HurstLike, f: SimpleFunction, t: float, s: float) -> float:
    """``E[I_n^H(f 1_[0,t]) I_n^H(f 1_[0,s])] = n! <(f 1_t)~, (f 1_s)~>``."""
    Hp = as_hurst(H).require_chaos()
    ft = symmetrize(clip(f, t))
    fs = ft if s == t else symmetrize(clip(f, s))
    return math.factorial(f.arity) * inner_product_Hn(Hp, ft, fs)


def analytic_variance(H: HurstLike, f: SimpleFunction, t: float) -> float:
    return analytic_covariance(H, f, t, t)


def wiener_multiple_integral(f: SimpleFunction, path: BmPath):
    """``sum_k alpha_k prod_i W(A_k^i)`` for elementary ``f`` on a Brownian path."""
    if not isinstance(path, BmPath):
        raise TypeError("wiener_multiple_integral needs a Brownian path")
    for _, box in f.terms:
        if not box.is_elementary:
            raise ValueError("Wiener integral formula needs elementary boxes")
    total = np.zeros(path.batch_shape) if path.batch_shape else 0.0
    for c, box in f.terms:
        prod = c
        for iv in box.intervals:
            prod = prod * increment(path, iv)
        total = total + prod
    return total

