"""Simple integrands: finite sums of coefficient-weighted boxes.

A :class:`SimpleFunction` of arity ``n`` is ``sum_k alpha_k 1_{Delta_k}``
where each box ``Delta_k`` is a product of ``n`` half-open intervals. Boxes
are *elementary* when their ``n`` coordinate intervals are pairwise disjoint;
that is enforced for user-built functions (``strict=True``) and relaxed for
derived objects such as tensor products and contractions.

Text format, one term per line::

    alpha; a1,b1; a2,b2; ...

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import HurstLike, Interval, as_hurst, indicator_inner_product

__all__ = [
    "Box", "SimpleFunction", "clip", "symmetrize", "tensor", "inner_product_Hn",
    "inner_product_L2", "contract_tensor", "contract", "parse_simple_function",
    "format_simple_function", "IntegrandFormatError",
]


class IntegrandFormatError(ValueError):
    """Malformed integrand text; carries the offending line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Box:
    intervals: tuple[Interval, ...]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))

    @property
    def arity(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return any(iv.is_empty for iv in self.intervals)

    @property
    def is_elementary(self) -> bool:
        ivs = self.intervals
        return all(ivs[i].disjoint(ivs[j])
                   for i in range(len(ivs)) for j in range(i + 1, len(ivs)))

    def clip(self, t: float) -> "Box":
        return Box(tuple(iv.clip(t) for iv in self.intervals))

    def permute(self, perm) -> "Box":
        return Box(tuple(self.intervals[p] for p in perm))

    def indicator(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        out = np.ones(points.shape[0], dtype=bool)
        for j, iv in enumerate(self.intervals):
            x = points[:, j]
            out &= (x > iv.a) & (x <= iv.b)
        return out


@dataclass(frozen=True)
class SimpleFunction:
    """``sum_k coeff_k 1_{box_k}`` on ``[0, 1]^arity``."""

    arity: int
    terms: tuple[tuple[float, Box], ...] = ()
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError("arity must be nonnegative")
        terms = tuple((float(c), b if isinstance(b, Box) else Box(tuple(b)))
                      for c, b in self.terms)
        for c, b in terms:
            if b.arity != self.arity:
                raise ValueError(f"box of arity {b.arity} in a function of arity {self.arity}")
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
            if self.strict and not b.is_elementary:
                raise ValueError(f"box {tuple(str(i) for i in b.intervals)} has overlapping "
                                 "coordinate intervals")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def indicator(cls, *intervals, coeff: float = 1.0, strict: bool = True) -> "SimpleFunction":
        ivs = tuple(iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals)
        return cls(len(ivs), ((coeff, Box(ivs)),), strict=strict)

    @classmethod
    def zero(cls, arity: int) -> "SimpleFunction":
        return cls(arity, ())

    @property
    def is_tensor(self) -> bool:
        return len(self.terms) == 1

    def __call__(self, points) -> np.ndarray:
        """Pointwise values at ``points`` of shape ``(P, arity)``."""
        points = np.asarray(points, dtype=float)
        if self.arity == 0:
            return np.full(points.shape[0] if points.ndim else 1, self.scalar())
        points = np.atleast_2d(points)
        out = np.zeros(points.shape[0])
        for c, b in self.terms:
            out += c * b.indicator(points)
        return out

    def scalar(self) -> float:
        if self.arity != 0:
            raise ValueError("only 0-arity functions are scalars")
        return float(sum(c for c, _ in self.terms))

    def scale(self, a: float) -> "SimpleFunction":
        return SimpleFunction(self.arity, tuple((a * c, b) for c, b in self.terms), strict=self.strict)

    def __add__(self, other: "SimpleFunction") -> "SimpleFunction":
        if other.arity != self.arity:
            raise ValueError("cannot add functions of different arity")
        return SimpleFunction(self.arity, self.terms + other.terms,
                              strict=self.strict and other.strict)

    def endpoints(self) -> set[float]:
        return {x for _, b in self.terms for iv in b.intervals for x in (iv.a, iv.b)}


def clip(f: SimpleFunction, t: float) -> SimpleFunction:
    """Restrict ``f`` to ``[0, t]^n``; boxes that become empty are dropped."""
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise ValueError("clip time must lie in [0, 1]")
    terms = []
    for c, b in f.terms:
        cb = b.clip(t)
        if not cb.is_empty:
            terms.append((c, cb))
    return SimpleFunction(f.arity, tuple(terms), strict=f.strict)


def symmetrize(f: SimpleFunction) -> SimpleFunction:
    """Average of ``f`` over all coordinate permutations (terms are not merged)."""
    n = f.arity
    if n <= 1:
        return f
    perms = list(itertools.permutations(range(n)))
    w = 1.0 / len(perms)
    terms = tuple((c * w, b.permute(p)) for c, b in f.terms for p in perms)
    return SimpleFunction(n, terms, strict=f.strict)


def tensor(f: SimpleFunction, g: SimpleFunction) -> SimpleFunction:
    """``f (x) g``: products of coefficients, concatenated boxes."""
    terms = tuple((cf * cg, Box(bf.intervals + bg.intervals))
                  for cf, bf in f.terms for cg, bg in g.terms)
    strict = all(b.is_elementary for _, b in terms)
    return SimpleFunction(f.arity + g.arity, terms, strict=strict)


def inner_product_Hn(H: HurstLike, f: SimpleFunction, g: SimpleFunction) -> float:
    """``<f, g>`` in the n-fold tensor power of the fBm Hilbert space (closed form)."""
    Hp = as_hurst(H).require_chaos()
    if f.arity != g.arity:
        raise ValueError("inner product needs equal arities")
    total = 0.0
    for cf, bf in f.terms:
        for cg, bg in g.terms:
            prod = cf * cg
            for I, J in zip(bf.intervals, bg.intervals):
                if prod == 0.0:
                    break
                prod *= indicator_inner_product(Hp, I, J)
            total += prod
    return total


def inner_product_L2(f: SimpleFunction, g: SimpleFunction) -> float:
    """``<f, g>`` in L^2([0,1]^n) from box-overlap volumes."""
    if f.arity != g.arity:
        raise ValueError("inner product needs equal arities")
    total = 0.0
    for cf, bf in f.terms:
        for cg, bg in g.terms:
            vol = 1.0
            for I, J in zip(bf.intervals, bg.intervals):
                vol *= I.overlap(J)
            total += cf * cg * vol
    return total


def _contract_boxes(H, bf: Box, bg: Box, l: int) -> tuple[float, Box]:
    n, m = bf.arity, bg.arity
    w = 1.0
    for j in range(l):
        w *= indicator_inner_product(H, bf.intervals[n - l + j], bg.intervals[m - l + j])
    return w, Box(bf.intervals[: n - l] + bg.intervals[: m - l])


def contract_tensor(H: HurstLike, f: SimpleFunction, g: SimpleFunction, l: int) -> SimpleFunction:
    """Contraction ``f (x)_l g`` of two pure tensors in the fBm Hilbert space.

    The last ``l`` coordinates of ``f`` are paired with the last ``l`` of
    ``g``; ``l = 0`` is the tensor product. The result may have arity 0.
    """
    if not (f.is_tensor and g.is_tensor):
        raise ValueError("contract_tensor needs single-term (pure tensor) inputs")
    return contract(H, f, g, l)


def contract(H: HurstLike, f: SimpleFunction, g: SimpleFunction, l: int) -> SimpleFunction:
    """Bilinear extension of :func:`contract_tensor` to sums of tensors."""
    Hp = as_hurst(H).require_chaos()
    if not (0 <= l <= min(f.arity, g.arity)):
        raise ValueError(f"contraction order {l} out of range")
    terms = []
    for cf, bf in f.terms:
        for cg, bg in g.terms:
            w, box = _contract_boxes(Hp, bf, bg, l)
            terms.append((cf * cg * w, box))
    strict = all(b.is_elementary for _, b in terms)
    return SimpleFunction(f.arity + g.arity - 2 * l, tuple(terms), strict=strict)


def parse_simple_function(text: str, strict: bool = True) -> SimpleFunction:
    """Parse the ``alpha; a1,b1; a2,b2; ...`` line format."""
    terms = []
    arity = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(";")]
        try:
            coeff = float(parts[0])
        except ValueError:
            raise IntegrandFormatError(lineno, f"bad coefficient {parts[0]!r}") from None
        ivs = []
        for p in parts[1:]:
            ab = [x.strip() for x in p.split(",")]
            if len(ab) != 2:
                raise IntegrandFormatError(lineno, f"interval {p!r} must be 'a,b'")
            try:
                ivs.append(Interval(float(ab[0]), float(ab[1])))
            except ValueError as exc:
                raise IntegrandFormatError(lineno, str(exc)) from None
        if not ivs:
            raise IntegrandFormatError(lineno, "term has no intervals")
        if arity is None:
            arity = len(ivs)
        elif len(ivs) != arity:
            raise IntegrandFormatError(lineno, f"expected {arity} intervals, got {len(ivs)}")
        box = Box(tuple(ivs))
        if strict and not box.is_elementary:
            raise IntegrandFormatError(lineno, "coordinate intervals of a box must be disjoint")
        terms.append((coeff, box))
    if arity is None:
        raise IntegrandFormatError(0, "no terms")
    return SimpleFunction(arity, tuple(terms), strict=strict)


def format_simple_function(f: SimpleFunction) -> str:
    lines = []
    for c, b in f.terms:
        ivs = "; ".join(f"{iv.a!r},{iv.b!r}" for iv in b.intervals)
        lines.append(f"{c!r}; {ivs}" if ivs else f"{c!r}")
    return "\n".join(lines)
