"""Replication engine, summary statistics and fdd convergence reports."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .approx import ExclusionSpec, GridSpec, i_n_eps
from .chaos import analytic_covariance, exact_multiple_integral, experiment_grid, sample_fbm
from .kernel import DEFAULT_QUADRATURE, QuadratureSpec, as_hurst
from .noise import NoiseKind, SeedSpec, sample_noise
from .simple import SimpleFunction

__all__ = [
    "ReplicationError", "run_replications", "ks_statistic", "ks_critical_value",
    "mean_se", "variance_se", "covariance_se", "trend_verdict", "ExperimentConfig",
    "ConvergenceReport", "build_report", "fdd_convergence_study",
    "NS_NOISE", "NS_EXACT", "REPORT_HEADER", "COVARIANCE_HEADER",
]

# stream namespaces under one master seed
NS_NOISE = 1
NS_EXACT = 2


class ReplicationError(RuntimeError):
    def __init__(self, index: int, exc: BaseException):
        super().__init__(f"replication {index} failed: {exc!r}")
        self.index = index


class _Task:
    """Picklable ``i -> functional(SeedSpec(master, i, namespace))``."""

    def __init__(self, functional, master: int, namespace: tuple[int, ...]):
        self.functional = functional
        self.master = master
        self.namespace = namespace

    def __call__(self, i: int):
        try:
            return np.asarray(self.functional(SeedSpec(self.master, i, self.namespace)), dtype=float)
        except Exception as exc:
            raise ReplicationError(i, exc) from exc


def run_replications(functional, n: int, *, seed: int, namespace: tuple[int, ...] = (),
                     workers: int = 1, processes: bool = False) -> np.ndarray:
    """Evaluate ``functional(SeedSpec(seed, i, namespace))`` for ``i < n``.

    Replication ``i`` sees only its own stream and results are assembled by
    index, so the output is bit-identical for any ``workers``. Returns an
    array of shape ``(n,)`` or ``(n, *value_shape)``.
    """
    if n < 1:
        raise ValueError("need at least one replication")
    if workers < 1:
        raise ValueError("workers must be positive")
    task = _Task(functional, seed, tuple(namespace))
    if workers == 1:
        out = [task(i) for i in range(n)]
    else:
        pool = ProcessPoolExecutor if processes else ThreadPoolExecutor
        with pool(max_workers=workers) as ex:
            out = list(ex.map(task, range(n), chunksize=max(1, n // (4 * workers))))
    return np.stack(out)


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two nonempty samples")
    x = np.concatenate([a, b])
    fa = np.searchsorted(a, x, side="right") / a.size
    fb = np.searchsorted(b, x, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical_value(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value at level ``alpha``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def mean_se(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size))


def variance_se(x) -> float:
    """Delta-method standard error of the sample variance."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    m4 = np.mean(d ** 4)
    return float(math.sqrt(max(m4 - m2 * m2, 0.0) / x.size))


def covariance_se(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = (x - x.mean()) * (y - y.mean())
    return float(p.std(ddof=1) / math.sqrt(x.size))


def trend_verdict(values, ses, strict: bool = True) -> str:
    """``"pass"`` when the statistic falls from first to last by more than
    two combined standard errors (and, if ``strict``, at every step).
    """
    values = list(values)
    if len(values) < 2:
        return "insufficient schedule"
    ok = values[-1] < values[0] - 2.0 * math.hypot(ses[0], ses[-1])
    if strict:
        ok = ok and all(b < a for a, b in zip(values, values[1:]))
    return "pass" if ok else "fail"


@dataclass(frozen=True)
class ExperimentConfig:
    H: float
    f: SimpleFunction
    probes: tuple[float, ...] = (0.5, 1.0)
    eps_schedule: tuple[float, ...] = (0.2, 0.1, 0.05)
    n_replications: int = 10_000
    noise: NoiseKind = NoiseKind()
    grid: GridSpec = GridSpec()
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE
    seed: int = 0
    z_threshold: float = 4.0

    def __post_init__(self):
        as_hurst(self.H).require_chaos()
        if self.n_replications < 100:
            raise ValueError("n_replications must be at least 100")
        if not self.probes or any(not (0 < t <= 1) for t in self.probes):
            raise ValueError("probes must lie in (0, 1]")
        if not self.eps_schedule:
            raise ValueError("eps schedule is empty")
        if any(b >= a for a, b in zip(self.eps_schedule, self.eps_schedule[1:])):
            raise ValueError("eps schedule must be strictly decreasing")
        if any(not (0 < e <= 1) for e in self.eps_schedule):
            raise ValueError("eps values must lie in (0, 1]")
        object.__setattr__(self, "probes", tuple(float(t) for t in self.probes))
        object.__setattr__(self, "eps_schedule", tuple(float(e) for e in self.eps_schedule))


class _ApproxFunctional:
    def __init__(self, cfg: ExperimentConfig, eps: float):
        self.cfg = cfg
        self.eps = eps

    def __call__(self, seed: SeedSpec):
        cfg = self.cfg
        path = sample_noise(self.eps, cfg.noise, seed)
        excl = ExclusionSpec(self.eps)
        return [i_n_eps(cfg.H, cfg.f, path, t, excl, cfg.grid, cfg.quadrature) for t in cfg.probes]


def exact_reference(cfg: ExperimentConfig) -> np.ndarray:
    """``(N, r)`` exact samples of the probe vector, from the reference namespace."""
    grid = experiment_grid(cfg.f, cfg.probes)
    path = sample_fbm(cfg.H, grid, SeedSpec(cfg.seed, 0, (NS_EXACT,)), size=cfg.n_replications)
    return np.stack([exact_multiple_integral(cfg.H, cfg.f, t, path) for t in cfg.probes], axis=-1)


REPORT_HEADER = ("eps", "probe", "n", "mean", "mean_se", "variance", "variance_se",
                 "analytic_variance", "variance_z", "ks", "ks_crit")
COVARIANCE_HEADER = ("eps", "probe_i", "probe_j", "covariance", "covariance_se",
                     "analytic_covariance", "covariance_z")


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    rows: list[dict]
    covariance_rows: list[dict]
    verdicts: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())

    def final_rows(self) -> list[dict]:
        e = self.config.eps_schedule[-1]
        return [r for r in self.rows if r["eps"] == e]

    def to_csv(self) -> str:
        return _csv(REPORT_HEADER, self.rows)

    def covariance_csv(self) -> str:
        return _csv(COVARIANCE_HEADER, self.covariance_rows)

    def summary(self) -> str:
        lines = [f"{k}: {v}" for k, v in sorted(self.verdicts.items())]
        lines.append("overall: " + ("pass" if self.passed else "fail"))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def build_report(cfg: ExperimentConfig, samples: dict[float, np.ndarray],
                 reference: np.ndarray) -> ConvergenceReport:
    """Statistics and verdicts from stored samples; a pure function of its inputs."""
    probes = cfg.probes
    z = cfg.z_threshold
    analytic = {(i, j): analytic_covariance(cfg.H, cfg.f, probes[i], probes[j])
                for i in range(len(probes)) for j in range(i, len(probes))}
    rows, crow = [], []
    for eps in cfg.eps_schedule:
        X = samples[eps]
        for i, t in enumerate(probes):
            x = X[:, i]
            var = float(x.var(ddof=1))
            vse = variance_se(x)
            av = analytic[(i, i)]
            rows.append({
                "eps": eps, "probe": t, "n": x.size, "mean": float(x.mean()), "mean_se": mean_se(x),
                "variance": var, "variance_se": vse, "analytic_variance": av,
                "variance_z": (var - av) / vse if vse > 0 else math.inf,
                "ks": ks_statistic(x, reference[:, i]),
                "ks_crit": ks_critical_value(x.size, reference.shape[0]),
            })
        for i in range(len(probes)):
            for j in range(i + 1, len(probes)):
                c = float(np.cov(X[:, i], X[:, j])[0, 1])
                se = covariance_se(X[:, i], X[:, j])
                ac = analytic[(i, j)]
                crow.append({"eps": eps, "probe_i": probes[i], "probe_j": probes[j],
                             "covariance": c, "covariance_se": se, "analytic_covariance": ac,
                             "covariance_z": (c - ac) / se if se > 0 else math.inf})
    verdicts = {}
    final = cfg.eps_schedule[-1]
    for t in probes:
        prow = [r for r in rows if r["probe"] == t]
        if len(prow) < 2:
            verdicts[f"ks_trend[t={t!r}]"] = "insufficient schedule"
        else:
            verdicts[f"ks_trend[t={t!r}]"] = "pass" if prow[-1]["ks"] < prow[0]["ks"] else "fail"
        fr = prow[-1]
        verdicts[f"mean[t={t!r}]"] = "pass" if abs(fr["mean"]) <= z * fr["mean_se"] else "fail"
        verdicts[f"variance[t={t!r}]"] = "pass" if abs(fr["variance_z"]) <= z else "fail"
    for r in crow:
        if r["eps"] == final:
            key = f"covariance[t={r['probe_i']!r},{r['probe_j']!r}]"
            verdicts[key] = "pass" if abs(r["covariance_z"]) <= z else "fail"
    return ConvergenceReport(cfg, rows, crow, verdicts)


def fdd_convergence_study(cfg: ExperimentConfig, workers: int = 1,
                          processes: bool = False) -> tuple[ConvergenceReport, dict, np.ndarray]:
    """Sample the probe vector at every eps and compare against the exact sampler.

    Replication ``i`` uses noise stream ``i`` at every eps, so the schedule
    is traversed with common random numbers.
    """
    samples = {}
    for eps in cfg.eps_schedule:
        samples[eps] = run_replications(_ApproxFunctional(cfg, eps), cfg.n_replications,
                                        seed=cfg.seed, namespace=(NS_NOISE,),
                                        workers=workers, processes=processes)
    reference = exact_reference(cfg)
    return build_report(cfg, samples, reference), samples, reference
