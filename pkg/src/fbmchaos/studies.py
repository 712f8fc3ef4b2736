"""Named experiment suites: kernel identities and the eps-convergence studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .approx import (ExclusionSpec, GridSpec, band_functional, exclusion_error_bound, eta_eps,
                     f_eps, i_n_eps, y_eps_product)
from .harness import _csv, covariance_se, run_replications, trend_verdict
from .kernel import (DEFAULT_QUADRATURE, GammaWeight, Interval, QuadratureSpec, covariance_R,
                     fractional_integral, indicator_inner_product, kernel_K, kernel_l2_norm_sq,
                     normalizing_constant, psi_double_integral)
from .noise import NoiseKind, SeedSpec, sample_noise
from .simple import SimpleFunction

__all__ = [
    "StudyResult", "kernel_check", "representation_residual", "eta_covariance_study", "band_study",
    "triple_band_study", "coincidence_check", "min_gap",
]

# stream namespaces, disjoint from the harness ones
NS_ETA = 10
NS_BAND = 11
NS_TRIPLE = 12
NS_COINCIDE = 13


@dataclass
class StudyResult:
    name: str
    header: tuple[str, ...]
    rows: list[dict]
    verdicts: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())

    def to_csv(self) -> str:
        return _csv(self.header, self.rows)

    def summary(self) -> str:
        lines = [f"{self.name} {k}: {v}" for k, v in sorted(self.verdicts.items())]
        lines.append(f"{self.name} overall: " + ("pass" if self.passed else "fail"))
        return "\n".join(lines)


def _pf(ok: bool) -> str:
    return "pass" if ok else "fail"


def representation_residual(H: float, t: float, s: float,
                            q: QuadratureSpec = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """Kernel value through the fractional-integral route, and its gap to ``kernel_K``."""
    cH = normalizing_constant(H)
    g = lambda u: u ** (H - 0.5) * (u <= t)
    frac = fractional_integral(H - 0.5, g, 1.0, s, q, breakpoints=(t,))
    via = cH * math.gamma(H + 0.5) * s ** (0.5 - H) * frac
    return via, abs(via - kernel_K(H, t, s, q))


def kernel_check(Hs, ts, n_points: int, pairs, pair_H: float, l2_tol: float, repr_tol: float,
                 ip_tol: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> StudyResult:
    """``int K^2 = t^2H``, the fractional-integral identity, and inner products vs. psi quadrature."""
    rows = []
    verdicts = {}
    for H in Hs:
        for t in ts:
            v = kernel_l2_norm_sq(H, t, q)
            ref = t ** (2 * H)
            rows.append({"check": "l2", "H": H, "label": f"t={t!r}", "value": v, "reference": ref,
                         "residual": abs(v - ref), "tolerance": l2_tol})
            s_pts = np.linspace(0.0, t, n_points + 2)[1:-1]
            worst = max((representation_residual(H, t, s, q) + (s,) for s in s_pts), key=lambda r: r[1])
            rows.append({"check": "repr", "H": H, "label": f"t={t!r}", "value": worst[0],
                         "reference": kernel_K(H, t, worst[2], q), "residual": worst[1],
                         "tolerance": repr_tol})
    for I1, I2 in pairs:
        v = indicator_inner_product(pair_H, I1, I2)
        ref = psi_double_integral(pair_H, I1, I2)
        rel = abs(v - ref) / max(abs(ref), 1e-300)
        rows.append({"check": "inner", "H": pair_H, "label": f"{I1}x{I2}", "value": v,
                     "reference": ref, "residual": rel, "tolerance": ip_tol})
    for r in rows:
        r["pass"] = _pf(r["residual"] <= r["tolerance"])
    for check in ("l2", "repr", "inner"):
        sub = [r for r in rows if r["check"] == check]
        if sub:
            verdicts[check] = _pf(all(r["pass"] == "pass" for r in sub))
    header = ("check", "H", "label", "value", "reference", "residual", "tolerance", "pass")
    return StudyResult("kernel-check", header, rows, verdicts)


class _EtaFunctional:
    def __init__(self, H, probes, eps, kind, q):
        self.args = (H, probes, eps, kind, q)

    def __call__(self, seed):
        H, probes, eps, kind, q = self.args
        path = sample_noise(eps, kind, seed)
        return [eta_eps(H, path, t, q) for t in probes]


def eta_covariance_study(H: float, probes: tuple[float, float], eps_schedule, n: int,
                         kind: NoiseKind, seed: int, workers: int = 1,
                         q: QuadratureSpec = DEFAULT_QUADRATURE) -> StudyResult:
    """Covariance of ``(eta(s), eta(t))`` against ``R(s, t)`` along the schedule."""
    s, t = probes
    ref = covariance_R(H, s, t)
    rows = []
    for eps in eps_schedule:
        X = run_replications(_EtaFunctional(H, (s, t), eps, kind, q), n, seed=seed,
                             namespace=(NS_ETA,), workers=workers)
        c = float(np.cov(X[:, 0], X[:, 1])[0, 1])
        rows.append({"kind": str(kind), "eps": eps, "n": n, "covariance": c,
                     "covariance_se": covariance_se(X[:, 0], X[:, 1]), "analytic": ref,
                     "error": abs(c - ref)})
    verdicts = {}
    if len(rows) < 2:
        verdicts["error_trend"] = "insufficient schedule"
    else:
        verdicts["error_trend"] = _pf(rows[-1]["error"] < rows[0]["error"])
    header = ("kind", "eps", "n", "covariance", "covariance_se", "analytic", "error")
    return StudyResult("eta-cov", header, rows, verdicts)


class _BandFunctional:
    def __init__(self, w1, w2, eps, kind, grid, limit):
        self.args = (w1, w2, eps, kind, grid, limit)

    def __call__(self, seed):
        w1, w2, eps, kind, grid, limit = self.args
        path = sample_noise(eps, kind, seed)
        return band_functional(w1, w2, path, eps, grid) - limit


def _msq_rows(name, kind, eps, diffs):
    sq = diffs ** 2
    return {"kind": str(kind), "eps": eps, "n": diffs.size, "mean_square": float(sq.mean()),
            "mean_square_se": float(sq.std(ddof=1) / math.sqrt(sq.size)),
            "mean": float(diffs.mean())}


def _trend_verdicts(rows, kinds) -> dict[str, str]:
    out = {}
    for kind in kinds:
        sub = [r for r in rows if r["kind"] == str(kind)]
        out[f"trend[{kind}]"] = trend_verdict([r["mean_square"] for r in sub],
                                              [r["mean_square_se"] for r in sub])
    return out


_MSQ_HEADER = ("kind", "eps", "n", "mean_square", "mean_square_se", "mean")


def band_study(H: float, I1: Interval, I2: Interval, eps_schedule, n: int, kinds, seed: int,
                 grid: GridSpec = GridSpec(), workers: int = 1,
                 q: QuadratureSpec = DEFAULT_QUADRATURE) -> StudyResult:
    """``E(Y_eps - Y)^2`` for the band functional of two transfer-operator images.

    The limit ``Y = int w1 w2`` equals ``<1_I1, 1_I2>_H`` by the isometry.
    """
    w1, w2 = GammaWeight(H, I1, 1.0, q), GammaWeight(H, I2, 1.0, q)
    limit = indicator_inner_product(H, I1, I2)
    rows = []
    for ki, kind in enumerate(kinds):
        for eps in eps_schedule:
            d = run_replications(_BandFunctional(w1, w2, eps, kind, grid, limit), n, seed=seed,
                                 namespace=(NS_BAND, ki), workers=workers)
            rows.append(_msq_rows("lemma3", kind, eps, d))
    return StudyResult("lemma3", _MSQ_HEADER, rows, _trend_verdicts(rows, kinds))


class _FFunctional:
    def __init__(self, ws, eps, kind, grid):
        self.args = (ws, eps, kind, grid)

    def __call__(self, seed):
        ws, eps, kind, grid = self.args
        path = sample_noise(eps, kind, seed)
        return f_eps(*ws, path, eps, grid)


def triple_band_study(H: float, intervals, eps_schedule, n: int, kinds, seed: int,
                 grid: GridSpec = GridSpec(), workers: int = 1,
                 q: QuadratureSpec = DEFAULT_QUADRATURE) -> StudyResult:
    """``E(F_eps^2)`` for three transfer-operator images (``h = 1``)."""
    ws = tuple(GammaWeight(H, iv, 1.0, q) for iv in intervals)
    if len(ws) != 3:
        raise ValueError("triple_band_study needs three intervals")
    rows = []
    for ki, kind in enumerate(kinds):
        for eps in eps_schedule:
            d = run_replications(_FFunctional(ws, eps, kind, grid), n, seed=seed,
                                 namespace=(NS_TRIPLE, ki), workers=workers)
            rows.append(_msq_rows("lemma7", kind, eps, d))
    return StudyResult("lemma7", _MSQ_HEADER, rows, _trend_verdicts(rows, kinds))


def min_gap(intervals) -> float:
    """Smallest distance between two of the given intervals (0 if any touch)."""
    ivs = sorted(intervals, key=lambda iv: iv.a)
    gaps = [max(b.a - a.b, 0.0) for a, b in zip(ivs, ivs[1:])]
    return min(gaps) if gaps else math.inf


class _CoincidenceFunctional:
    def __init__(self, f, eps, kind, grid, q):
        self.args = (f, eps, kind, grid, q)

    def __call__(self, seed):
        f, eps, kind, grid, q = self.args
        path = sample_noise(eps, kind, seed)
        excl = ExclusionSpec(eps)
        a = i_n_eps(0.5, f, path, 1.0, excl, grid, q)
        b = y_eps_product(0.5, f, path, 1.0, q)
        return [a, b, exclusion_error_bound(0.5, f, path, 1.0, excl, grid, q)]


def coincidence_check(intervals, eps: float, orders, n: int, kind: NoiseKind, seed: int,
                  grid: GridSpec = GridSpec(), workers: int = 1,
                  q: QuadratureSpec = DEFAULT_QUADRATURE, slack: float = 1e-12) -> StudyResult:
    """At ``H = 1/2`` with ``eps`` below every gap, ``I_{n,eps}`` equals the product form.

    Per realization, ``|I_{n,eps} - Y^eps|`` must not exceed the cell
    misclassification bound (plus rounding ``slack``).
    """
    intervals = list(intervals)
    gap = min_gap(intervals)
    if not eps < gap:
        raise ValueError(f"eps = {eps} is not below the minimum gap {gap}")
    rows = []
    verdicts = {}
    for order in orders:
        if order > len(intervals):
            raise ValueError(f"need at least {order} intervals")
        f = SimpleFunction.indicator(*intervals[:order])
        X = run_replications(_CoincidenceFunctional(f, eps, kind, grid, q), n, seed=seed,
                             namespace=(NS_COINCIDE, order), workers=workers)
        diff = np.abs(X[:, 0] - X[:, 1])
        ok = diff <= X[:, 2] + slack
        rows.append({"order": order, "eps": eps, "n": n, "max_abs_diff": float(diff.max()),
                     "max_bound": float(X[:, 2].max()), "n_within": int(ok.sum())})
        verdicts[f"coincidence[n={order}]"] = _pf(bool(ok.all()))
    header = ("order", "eps", "n", "max_abs_diff", "max_bound", "n_within")
    return StudyResult("coincidence", header, rows, verdicts)
