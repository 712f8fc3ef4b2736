"""Volterra kernel of fractional Brownian motion and related closed forms.

The kernel is evaluated from its integral representation

    K_H(t, s) = c_H (t-s)^(H-1/2)
                + c_H (1/2-H) * int_s^t (u-s)^(H-3/2) (1 - (s/u)^(1/2-H)) du

on ``0 < s < t``, with the convention ``K_H(t, s) = 0`` for ``s >= t``.
The integral term is computed on a Gauss-Jacobi head panel that absorbs the
``(u-s)^(H-1/2)`` endpoint behaviour, followed by Gauss-Legendre panels of
geometrically growing width.

For Monte Carlo work the primitive ``s -> int_0^s K_H(t, r) dr`` is tabulated
once per ``(H, t)`` (:class:`KernelTable`) and queried by cubic Hermite
interpolation in a graded coordinate.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._quad import (QuadratureError, gauss_jacobi01, gauss_legendre01,
                    graded_integral, graded_integral_pieces)

__all__ = [
    "HurstParam", "Interval", "QuadratureSpec", "QuadratureError",
    "as_hurst", "normalizing_constant", "kernel_K", "kernel_K_array",
    "covariance_R", "psi", "indicator_inner_product", "fractional_integral",
    "gamma1_indicator", "KernelTable", "kernel_table", "GammaWeight",
    "kernel_l2_norm_sq", "psi_double_integral", "gamma1_l2_inner",
]


@dataclass(frozen=True)
class HurstParam:
    """Hurst index ``H`` in (0, 1).

    Chaos-level operations (the inner product of the space |H|^n) need
    ``H >= 1/2``; call :meth:`require_chaos` before using them.
    """

    H: float

    def __post_init__(self):
        H = float(self.H)
        if not (0.0 < H < 1.0) or not math.isfinite(H):
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.H}")
        object.__setattr__(self, "H", H)

    @property
    def is_brownian(self) -> bool:
        return self.H == 0.5

    @property
    def chaos_capable(self) -> bool:
        return self.H >= 0.5

    def require_chaos(self) -> "HurstParam":
        if not self.chaos_capable:
            raise ValueError(f"operation requires H >= 1/2, got H={self.H}")
        return self

    def __float__(self) -> float:
        return self.H


HurstLike = Union[HurstParam, float]


def as_hurst(H: HurstLike) -> HurstParam:
    return H if isinstance(H, HurstParam) else HurstParam(H)


@dataclass(frozen=True)
class Interval:
    """Half-open interval ``(a, b]`` inside [0, 1]; ``a == b`` is the empty set."""

    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"interval ({self.a}, {self.b}] must satisfy 0 <= a <= b <= 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def is_empty(self) -> bool:
        return self.a == self.b

    def clip(self, t: float) -> "Interval":
        return Interval(min(self.a, t), min(self.b, t))

    def disjoint(self, other: "Interval") -> bool:
        if self.is_empty or other.is_empty:
            return True
        return self.b <= other.a or other.b <= self.a

    def overlap(self, other: "Interval") -> float:
        return max(0.0, min(self.b, other.b) - max(self.a, other.a))

    def __str__(self) -> str:
        return f"({self.a:g}, {self.b:g}]"


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings shared by the kernel routines.

    ``nodes`` is the Gauss order per panel; ``tol`` the relative tolerance
    checked against a half-order estimate; ``table_cells`` the number of cells
    of a :class:`KernelTable`.
    """

    scheme: str = "jacobi-head+geometric-legendre"
    nodes: int = 16
    tol: float = 1e-6
    table_cells: int = 1024

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("quadrature needs at least 2 nodes per panel")
        if not self.tol > 0:
            raise ValueError("quadrature tolerance must be positive")
        if self.table_cells < 8:
            raise ValueError("kernel tables need at least 8 cells")


DEFAULT_QUADRATURE = QuadratureSpec()


def normalizing_constant(H: HurstLike) -> float:
    """c_H = (2H Gamma(3/2-H) / (Gamma(H+1/2) Gamma(2-2H)))^(1/2)."""
    H = as_hurst(H).H
    return math.sqrt(2.0 * H * math.gamma(1.5 - H)
                     / (math.gamma(H + 0.5) * math.gamma(2.0 - 2.0 * H)))


def _check_time(x: float, name: str) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"{name}={x} outside [0, 1]")
    return x


def _kernel_eq3(H: float, t: float, s: np.ndarray, q: QuadratureSpec):
    """Vectorized integral-form evaluation for ``0 < s < t``.

    Returns kernel values and an absolute error estimate per point.
    """
    s = np.asarray(s, dtype=float)
    L = t - s
    c = normalizing_constant(H)
    first = c * L ** (H - 0.5)
    if H == 0.5:
        return first, np.zeros_like(s), np.abs(first)
    gam = H - 0.5
    n = q.nodes
    n2 = max(1, n // 2)

    def tail_integrand(v, sv):
        # v^(H-3/2) * (1 - (1 + v/s)^(H-1/2))
        return v ** (H - 1.5) * -np.expm1(gam * np.log1p(v / sv))

    def head_factor(v, sv):
        # (1 - (1 + v/s)^(H-1/2)) / v, smooth for |v| < s
        return -np.expm1(gam * np.log1p(v / sv)) / v

    h0 = np.minimum(L, 0.5 * s)
    sv = s[:, None]

    def head(order):
        y, w = gauss_jacobi01(order, H - 0.5)
        v = h0[:, None] * y[None, :]
        return h0 ** (H + 0.5) * (head_factor(v, sv) @ w)

    head_n, head_m = head(n), head(n2)

    ratio = np.where(L > h0, L / np.where(h0 > 0, h0, 1.0), 1.0)
    n_pan = np.ceil(np.log2(ratio)).astype(int)
    P = int(n_pan.max()) if n_pan.size else 0
    tail_n = np.zeros_like(s)
    tail_m = np.zeros_like(s)
    tail_abs = np.zeros_like(s)
    if P > 0:
        k = np.arange(P)
        lo = np.minimum(h0[:, None] * 2.0 ** k[None, :], L[:, None])
        hi = np.minimum(h0[:, None] * 2.0 ** (k[None, :] + 1), L[:, None])
        width = hi - lo
        for order, out in ((n, tail_n), (n2, tail_m)):
            x, w = gauss_legendre01(order)
            v = lo[..., None] + width[..., None] * x
            vals = tail_integrand(np.where(width[..., None] > 0, v, 1.0), s[:, None, None])
            vals = np.where(width[..., None] > 0, vals, 0.0)
            out += np.einsum("spn,n,sp->s", vals, w, width)
            if order == n:
                tail_abs += np.einsum("spn,n,sp->s", np.abs(vals), w, width)
    integral = head_n + tail_n
    err = np.abs(head_n - head_m) + np.abs(tail_n - tail_m)
    pref = c * (0.5 - H)
    value = first + pref * integral
    scale = np.abs(first) + abs(pref) * (np.abs(head_n) + tail_abs)
    return value, np.abs(pref) * err, scale


def kernel_K_array(H: HurstLike, t: float, s, q: QuadratureSpec = DEFAULT_QUADRATURE,
                   check: bool = True) -> np.ndarray:
    """Vectorized ``K_H(t, s)`` with the zero convention for ``s >= t``.

    Points with ``s <= 0`` and ``s < t`` are rejected since the kernel is
    only defined on ``{0 < s < t}``.
    """
    H = as_hurst(H).H
    t = _check_time(t, "t")
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    inside = s < t
    if np.any(inside & (s <= 0.0)):
        raise ValueError("kernel requires s > 0")
    if not np.any(inside):
        return out
    if H == 0.5:
        out[inside] = 1.0
        return out
    vals, err, scale = _kernel_eq3(H, t, s[inside], q)
    if check and np.any(err > q.tol * scale):
        bad = float(np.max(err / scale))
        raise QuadratureError(f"kernel quadrature missed tolerance {q.tol} (relative error {bad:.2e})")
    out[inside] = vals
    return out


def kernel_K(H: HurstLike, t: float, s: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``K_H(t, s)`` for ``0 < s < t <= 1``."""
    t = _check_time(t, "t")
    s = float(s)
    if not (0.0 < s < t):
        raise ValueError(f"kernel_K needs 0 < s < t, got s={s}, t={t}")
    return float(kernel_K_array(H, t, np.array([s]), q)[0])


def covariance_R(H: HurstLike, t, s):
    """Covariance of fBm, ``(t^2H + s^2H - |t-s|^2H) / 2``. Broadcasts."""
    H = as_hurst(H).H
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any((t < 0) | (t > 1) | (s < 0) | (s > 1)):
        raise ValueError("covariance_R times must lie in [0, 1]")
    r = 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(r) if r.ndim == 0 else r


def psi(H: HurstLike, s, t):
    """Weight ``H(2H-1)|s-t|^(2H-2)`` of the |H| inner product (H > 1/2)."""
    H = as_hurst(H).H
    if H <= 0.5:
        raise ValueError("psi requires H > 1/2")
    d = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))
    if np.any(d == 0):
        raise ValueError("psi is not defined on the diagonal s == t")
    r = H * (2 * H - 1) * d ** (2 * H - 2)
    return float(r) if r.ndim == 0 else r


def indicator_inner_product(H: HurstLike, I1: Interval, I2: Interval) -> float:
    """<1_(a,b], 1_(c,d]> in the Hilbert space of fBm.

    For H > 1/2 this is the double integral of psi over the rectangle, in
    closed form. For H = 1/2 it is the overlap length.
    """
    Hp = as_hurst(H).require_chaos()
    if I1.is_empty or I2.is_empty:
        return 0.0
    if Hp.is_brownian:
        return I1.overlap(I2)
    h2 = 2.0 * Hp.H
    a, b, c, d = I1.a, I1.b, I2.a, I2.b
    return 0.5 * (abs(b - c) ** h2 + abs(a - d) ** h2 - abs(a - c) ** h2 - abs(b - d) ** h2)


def _singular_head_integral(g, x: float, L: float, beta: float, scale: float, order: int):
    """int_0^L v^beta g(v) dv where g is analytic on |v| < scale."""
    h0 = L if scale <= 0 else min(L, 0.5 * scale)
    y, w = gauss_jacobi01(order, beta)
    total = h0 ** (beta + 1.0) * np.dot(w, g(h0 * y))
    xg, wg = gauss_legendre01(order)
    lo = h0
    while lo < L:
        hi = min(2.0 * lo, L)
        v = lo + (hi - lo) * xg
        total += (hi - lo) * np.dot(wg, v ** beta * g(v))
        lo = hi
    return float(total)


def fractional_integral(alpha: float, f, t: float, x: float,
                        q: QuadratureSpec = DEFAULT_QUADRATURE, breakpoints=()) -> float:
    """Right-sided Riemann-Liouville integral ``(I_{t-}^alpha f)(x)``.

    Computes ``(1/Gamma(alpha)) int_x^t f(u) (u-x)^(alpha-1) du``. ``f`` is a
    vectorized callable. ``breakpoints`` lists points in ``(x, t)`` where ``f``
    may jump; the integral is split there.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    t = _check_time(t, "t")
    x = float(x)
    if not (0.0 <= x < t):
        raise ValueError(f"fractional_integral needs 0 <= x < t, got x={x}, t={t}")
    cuts = sorted(b for b in set(float(b) for b in breakpoints) if x < b < t)
    first_end = cuts[0] if cuts else t
    beta = alpha - 1.0

    def run(order):
        g = lambda v: np.asarray(f(x + v), dtype=float)
        # f is assumed smooth on a neighbourhood of size x around x
        total = _singular_head_integral(g, x, first_end - x, beta, x, order)
        edges = [first_end, *cuts[1:], t]
        xg, wg = gauss_legendre01(order)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi <= lo:
                continue
            for k in range(4):
                a = lo + (hi - lo) * k / 4
                b = lo + (hi - lo) * (k + 1) / 4
                u = a + (b - a) * xg
                total += (b - a) * np.dot(wg, np.asarray(f(u), dtype=float) * (u - x) ** beta)
        return total

    full = run(q.nodes)
    half = run(max(1, q.nodes // 2))
    if abs(full - half) > q.tol * max(abs(full), 1e-300) and abs(full - half) > 1e-14:
        raise QuadratureError(f"fractional integral missed tolerance (estimate {abs(full-half):.2e})")
    return full / math.gamma(alpha)


def gamma1_indicator(H: HurstLike, I: Interval, t: float, s: float,
                     q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Transfer-operator image ``K_H(b^t, s) - K_H(a^t, s)`` of ``1_(a,b] 1_[0,t]``."""
    t = _check_time(t, "t")
    s = float(s)
    if not (0.0 < s < 1.0):
        raise ValueError("gamma1_indicator needs s in (0, 1)")
    lo, hi = min(I.a, t), min(I.b, t)
    val = 0.0
    if s < hi:
        val += kernel_K(H, hi, s, q)
    if s < lo:
        val -= kernel_K(H, lo, s, q)
    return val


# --------------------------------------------------------------------------
# tabulated primitives
# --------------------------------------------------------------------------

_GRADING = 4.0


def _grade(u):
    up = u ** _GRADING
    dn = (1.0 - u) ** _GRADING
    return up / (up + dn)


def _grade_deriv(u):
    p = _GRADING
    up = u ** p
    dn = (1.0 - u) ** p
    return p * u ** (p - 1) * (1 - u) ** (p - 1) / (up + dn) ** 2


def _grade_inverse(r):
    r = np.clip(r, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (r / (1.0 - r)) ** (1.0 / _GRADING)
        u = np.where(r >= 1.0, 1.0, q / (1.0 + q))
    return u


class KernelTable:
    """Primitive ``F(x) = int_0^x K_H(t, s) ds`` tabulated on a graded grid.

    Nodes sit at ``s = t * g(u)`` with ``u`` uniform and ``g`` a sigmoidal
    grading that clusters nodes at both ends, where the kernel is singular
    (near 0) or has a fractional power (near ``t``). Between nodes, ``F`` is
    a cubic Hermite interpolant in ``u`` using the exact derivative
    ``K_H(t, t g(u)) t g'(u)``.
    """

    def __init__(self, H: HurstLike, t: float, q: QuadratureSpec = DEFAULT_QUADRATURE):
        Hp = as_hurst(H).require_chaos()
        self.H = Hp.H
        self.t = _check_time(t, "t")
        self.q = q
        M = q.table_cells
        self.M = M
        if self.t == 0.0:
            self.F = np.zeros(M + 1)
            self.D = np.zeros(M + 1)
            return
        u = np.linspace(0.0, 1.0, M + 1)
        D = np.zeros(M + 1)
        D[1:-1] = self._density(u[1:-1])
        xg, wg = gauss_legendre01(8)
        h = 1.0 / M
        uc = (u[:-1, None] + h * xg[None, :]).ravel()
        cell = (self._density(uc).reshape(M, -1) @ wg) * h
        F = np.concatenate([[0.0], np.cumsum(cell)])
        self.F = F
        self.D = D

    def _density(self, u):
        s = self.t * _grade(u)
        return kernel_K_array(self.H, self.t, s, self.q) * self.t * _grade_deriv(u)

    @property
    def total(self) -> float:
        """``int_0^t K_H(t, s) ds``."""
        return float(self.F[-1])

    def primitive(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.t == 0.0:
            return np.zeros(x.shape)
        u = _grade_inverse(x / self.t)
        M = self.M
        pos = u * M
        j = np.minimum(pos.astype(int), M - 1)
        tau = pos - j
        h = 1.0 / M
        t2 = tau * tau
        t3 = t2 * tau
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + tau
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return (h00 * self.F[j] + h10 * h * self.D[j]
                + h01 * self.F[j + 1] + h11 * h * self.D[j + 1])

    def integral(self, lo, hi) -> np.ndarray:
        return self.primitive(hi) - self.primitive(lo)


class _BrownianTable:
    """Primitive of ``K_{1/2}(t, .) = 1_[0,t)``."""

    def __init__(self, t: float):
        self.t = t

    @property
    def total(self) -> float:
        return self.t

    def primitive(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, self.t)

    def integral(self, lo, hi):
        return self.primitive(hi) - self.primitive(lo)


_TABLE_CACHE: dict = {}
_TABLE_LOCK = threading.Lock()


def kernel_table(H: HurstLike, t: float, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """Cached primitive table for ``K_H(t, .)``; built once per ``(H, t, q)``."""
    Hp = as_hurst(H).require_chaos()
    key = (Hp.H, float(t), q)
    tab = _TABLE_CACHE.get(key)
    if tab is not None:
        return tab
    with _TABLE_LOCK:
        tab = _TABLE_CACHE.get(key)
        if tab is None:
            tab = _BrownianTable(float(t)) if Hp.is_brownian else KernelTable(Hp, t, q)
            _TABLE_CACHE[key] = tab
    return tab


class GammaWeight:
    """Weight ``s -> K_H(b^t, s) - K_H(a^t, s)``, the image of ``1_(a,b] 1_[0,t]``.

    Exposes ``integral(lo, hi)`` (vectorized) for exact integration against
    piecewise-constant noise paths. The weight is nonnegative for H >= 1/2.
    """

    nonnegative = True

    def __init__(self, H: HurstLike, interval: Interval, t: float = 1.0,
                 q: QuadratureSpec = DEFAULT_QUADRATURE):
        self.H = as_hurst(H).require_chaos()
        self.interval = interval
        self.t = float(t)
        self.lo = min(interval.a, self.t)
        self.hi = min(interval.b, self.t)
        self._hi = kernel_table(self.H, self.hi, q) if self.hi > self.lo else None
        self._lo = kernel_table(self.H, self.lo, q) if self.hi > self.lo and self.lo > 0 else None

    @property
    def support_end(self) -> float:
        return self.hi

    def primitive(self, x):
        x = np.asarray(x, dtype=float)
        if self._hi is None:
            return np.zeros(x.shape)
        out = self._hi.primitive(x)
        if self._lo is not None:
            out = out - self._lo.primitive(x)
        return out

    def integral(self, lo, hi):
        return self.primitive(hi) - self.primitive(lo)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        if self._hi is None:
            return out
        out += kernel_K_array(self.H, self.hi, s)
        if self._lo is not None:
            out -= kernel_K_array(self.H, self.lo, s)
        return out


# --------------------------------------------------------------------------
# brute-force quadrature routes, used as independent checks
# --------------------------------------------------------------------------

def kernel_l2_norm_sq(H: HurstLike, t: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``int_0^t K_H(t, s)^2 ds`` by graded quadrature of pointwise kernel values."""
    H = as_hurst(H).H
    t = _check_time(t, "t")
    f = lambda s: kernel_K_array(H, t, s, q) ** 2
    return graded_integral(f, 0.0, t, left_exponent=1.0 - 2.0 * H,
                           right_exponent=2.0 * H - 1.0)


def gamma1_l2_inner(H: HurstLike, I1: Interval, I2: Interval, t: float = 1.0,
                    q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``int_0^1 Gamma(1_I1 1_t)(s) Gamma(1_I2 1_t)(s) ds`` by graded quadrature."""
    H = as_hurst(H).H
    w1 = GammaWeight(H, I1, t, q)
    w2 = GammaWeight(H, I2, t, q)
    end = max(w1.hi, w2.hi)
    if end == 0.0:
        return 0.0
    pts = {0.0, end, w1.lo, w1.hi, w2.lo, w2.hi}
    pts = [p for p in pts if p <= end]
    expo = {0.0: 1.0 - 2.0 * H}
    return graded_integral_pieces(lambda s: w1(s) * w2(s), pts, exponents=expo, levels=40)


def psi_double_integral(H: HurstLike, I1: Interval, I2: Interval, order: int = 20) -> float:
    """``int_I1 int_I2 psi(u, v) dv du`` by nested graded quadrature.

    The inner integral runs over the distance ``|u - v|`` on each side of
    ``u``, with a Gauss-Jacobi end panel for the ``|u-v|^(2H-2)``
    singularity. The outer integral is graded toward the endpoints of ``I2``
    inside ``I1``.
    """
    H = as_hurst(H).H
    if H <= 0.5:
        raise ValueError("psi_double_integral requires H > 1/2")
    if I1.is_empty or I2.is_empty:
        return 0.0
    e = 2.0 * H - 2.0
    cst = H * (2.0 * H - 1.0)

    def inner(us):
        # integrate over the distance r = |u - v| on each side of u
        out = np.zeros(len(us))
        for i, u in enumerate(us):
            for lo, hi in ((u - min(I2.b, u), u - I2.a), (max(I2.a, u) - u, I2.b - u)):
                if hi > lo:
                    out[i] += graded_integral(lambda r: cst * r ** e, lo, hi,
                                              left_exponent=e if lo == 0.0 else 0.0,
                                              levels=30, order=order)
        return out

    pts = [I1.a, I1.b] + [p for p in (I2.a, I2.b) if I1.a < p < I1.b]
    return graded_integral_pieces(inner, pts, levels=30, order=order)
