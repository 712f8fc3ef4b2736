"""Kac-Stroock and Donsker noise paths and exact integration against them.

A noise path ``theta_eps`` is piecewise constant on [0, 1]. Any weight that
can integrate itself over a panel (``integral(lo, hi)``, vectorized) is
integrated against it exactly, piece by piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np

from ._quad import gauss_legendre01

__all__ = [
    "SeedSpec", "NoiseKind", "PiecewiseConstantPath", "Weight",
    "ConstantWeight", "PolynomialWeight", "CallableWeight",
    "sample_kac_stroock", "sample_donsker", "sample_noise",
    "integrate_against", "cell_integrals", "abs_cell_integrals",
    "second_moment_kernel", "as_generator",
]


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible stream: ``(master, *namespace, stream)`` seeds a Philox generator.

    Streams for distinct keys are independent by construction of
    :class:`numpy.random.SeedSequence`.
    """

    master: int
    stream: int = 0
    namespace: tuple[int, ...] = ()

    def __post_init__(self):
        if self.master < 0 or self.master >= 2 ** 64:
            raise ValueError("master seed must be a 64-bit unsigned value")
        if self.stream < 0:
            raise ValueError("stream index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master, spawn_key=(*self.namespace, self.stream))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *key: int) -> "SeedSpec":
        return SeedSpec(self.master, key[-1], (*self.namespace, self.stream, *key[:-1]))


SeedLike = Union[SeedSpec, np.random.Generator]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return seed.generator()


_INNOVATIONS = ("rademacher", "gaussian", "uniform")


@dataclass(frozen=True)
class NoiseKind:
    """``kac-stroock``, or ``donsker`` with a standardized innovation law."""

    kind: str = "kac-stroock"
    innovation: str = "rademacher"

    def __post_init__(self):
        if self.kind not in ("kac-stroock", "donsker"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.innovation not in _INNOVATIONS:
            raise ValueError(f"unknown innovation law {self.innovation!r}")

    @classmethod
    def parse(cls, text: str) -> "NoiseKind":
        """``"kac-stroock"``, ``"donsker"`` or ``"donsker:gaussian"``."""
        kind, _, innov = text.strip().lower().partition(":")
        return cls(kind, innov or "rademacher")

    @property
    def is_donsker(self) -> bool:
        return self.kind == "donsker"

    def fourth_moment(self) -> float:
        return {"rademacher": 1.0, "gaussian": 3.0, "uniform": 1.8}[self.innovation]

    def __str__(self) -> str:
        if self.is_donsker and self.innovation != "rademacher":
            return f"donsker:{self.innovation}"
        return self.kind


@dataclass(frozen=True, eq=False)
class PiecewiseConstantPath:
    """Right-continuous step function: ``values[k]`` on ``[breakpoints[k], breakpoints[k+1])``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        if b.ndim != 1 or v.ndim != 1 or len(b) != len(v) + 1:
            raise ValueError("need one value per piece (len(values) == len(breakpoints) - 1)")
        if len(v) == 0:
            raise ValueError("path needs at least one piece")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("piece values must be finite")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def n_pieces(self) -> int:
        return len(self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, self.n_pieces - 1)
        return self.values[k]

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def square_integral(self) -> float:
        return float(np.dot(self.values ** 2, np.diff(self.breakpoints)))


def sample_kac_stroock(eps: float, seed: SeedLike) -> PiecewiseConstantPath:
    """``theta(x) = (1/eps) (-1)^N(x/eps^2)`` with ``N`` a unit-rate Poisson process.

    Jump times are ``eps^2`` times cumulative exponential spacings, kept while
    below 1.
    """
    _check_eps(eps)
    rng = as_generator(seed)
    scale = eps * eps
    rate = 1.0 / scale
    chunk = int(rate + 6.0 * math.sqrt(rate) + 16)
    arrivals = np.cumsum(rng.standard_exponential(chunk)) * scale
    while arrivals[-1] < 1.0:
        more = np.cumsum(rng.standard_exponential(chunk)) * scale + arrivals[-1]
        arrivals = np.concatenate([arrivals, more])
    jumps = arrivals[: np.searchsorted(arrivals, 1.0, side="left")]
    jumps = jumps[jumps > 0.0]
    bps = np.concatenate([[0.0], jumps, [1.0]])
    signs = np.where(np.arange(len(bps) - 1) % 2 == 0, 1.0, -1.0)
    return PiecewiseConstantPath(bps, signs / eps)


def _innovations(rng: np.random.Generator, kind: NoiseKind, n: int) -> np.ndarray:
    if kind.innovation == "rademacher":
        return np.where(rng.random(n) < 0.5, -1.0, 1.0)
    if kind.innovation == "gaussian":
        return rng.standard_normal(n)
    return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), n)


def donsker_breakpoints(eps: float) -> np.ndarray:
    """Block edges ``k eps^2`` clipped to [0, 1]."""
    step = eps * eps
    K = math.ceil(1.0 / step - 1e-9)
    b = np.arange(K + 1) * step
    b[-1] = 1.0
    return b


def sample_donsker(eps: float, kind: NoiseKind, seed: SeedLike) -> PiecewiseConstantPath:
    """``theta(x) = (1/eps) sum_k xi_k 1_[k-1,k)(x/eps^2)`` with i.i.d. standardized ``xi``."""
    _check_eps(eps)
    if not kind.is_donsker:
        raise ValueError("sample_donsker needs a Donsker noise kind")
    rng = as_generator(seed)
    b = donsker_breakpoints(eps)
    xi = _innovations(rng, kind, len(b) - 1)
    return PiecewiseConstantPath(b, xi / eps)


def sample_noise(eps: float, kind: NoiseKind, seed: SeedLike) -> PiecewiseConstantPath:
    if kind.is_donsker:
        return sample_donsker(eps, kind, seed)
    return sample_kac_stroock(eps, seed)


def _check_eps(eps: float):
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")


def second_moment_kernel(kind: NoiseKind, eps: float, x, y):
    """``E[theta(x) theta(y)]`` for the given noise kind."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind.is_donsker:
        step = eps * eps
        same = np.floor(x / step) == np.floor(y / step)
        r = np.where(same, 1.0 / step, 0.0)
    else:
        r = np.exp(-2.0 * np.abs(x - y) / (eps * eps)) / (eps * eps)
    return float(r) if r.ndim == 0 else r


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------

class Weight(Protocol):
    def integral(self, lo, hi): ...


class ConstantWeight:
    nonnegative = True

    def __init__(self, c: float = 1.0):
        self.c = float(c)
        self.nonnegative = self.c >= 0

    def integral(self, lo, hi):
        return self.c * (np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float))

    def __call__(self, x):
        return np.full(np.shape(x), self.c)


class PolynomialWeight:
    """``sum_k coeffs[k] x^k``, integrated exactly."""

    def __init__(self, coeffs, nonnegative: bool = False):
        self.poly = np.polynomial.Polynomial(coeffs)
        self._prim = self.poly.integ()
        self.nonnegative = nonnegative

    def integral(self, lo, hi):
        return self._prim(np.asarray(hi, dtype=float)) - self._prim(np.asarray(lo, dtype=float))

    def __call__(self, x):
        return self.poly(np.asarray(x, dtype=float))


class CallableWeight:
    """Arbitrary vectorized ``w``, integrated by Gauss-Legendre on each panel."""

    def __init__(self, fn, order: int = 8, nonnegative: bool = False):
        self.fn = fn
        self.order = order
        self.nonnegative = nonnegative

    def integral(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        x, w = gauss_legendre01(self.order)
        width = hi - lo
        pts = lo[..., None] + width[..., None] * x
        return width * (np.asarray(self.fn(pts), dtype=float) @ w)

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


def integrate_against(path: PiecewiseConstantPath, w, lo: float = 0.0, hi: float = 1.0) -> float:
    """``int_lo^hi w(x) theta(x) dx``, summed exactly over the pieces of ``path``."""
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValueError("integration range must satisfy 0 <= lo <= hi <= 1")
    if hi == lo:
        return 0.0
    b = path.breakpoints
    k0 = max(np.searchsorted(b, lo, side="right") - 1, 0)
    k1 = min(np.searchsorted(b, hi, side="left"), path.n_pieces)
    a = np.maximum(b[k0:k1], lo)
    c = np.minimum(b[k0 + 1:k1 + 1], hi)
    return float(np.dot(path.values[k0:k1], w.integral(a, c)))


def _merged(path: PiecewiseConstantPath, edges: np.ndarray):
    pts = np.union1d(path.breakpoints, edges)
    mid = 0.5 * (pts[:-1] + pts[1:])
    vals = path(mid)
    idx = np.searchsorted(pts, edges)
    return pts, vals, idx


def cell_integrals(path: PiecewiseConstantPath, w, edges: np.ndarray) -> np.ndarray:
    """``int_{cell} w theta`` for every cell between consecutive ``edges``."""
    pts, vals, idx = _merged(path, edges)
    contrib = vals * w.integral(pts[:-1], pts[1:])
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    return np.diff(cum[idx])


def abs_cell_integrals(path: PiecewiseConstantPath, w, edges: np.ndarray) -> np.ndarray:
    """``int_{cell} |w| |theta|`` for a weight flagged nonnegative."""
    if not getattr(w, "nonnegative", False):
        raise ValueError("absolute cell integrals need a nonnegative weight")
    pts, vals, idx = _merged(path, edges)
    contrib = np.abs(vals) * np.abs(w.integral(pts[:-1], pts[1:]))
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    return np.diff(cum[idx])
