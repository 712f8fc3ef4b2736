"""End-to-end acceptance checks, one test per criterion.

Each test records a ``criterion N: PASS|FAIL ...`` line; the lines are
printed in the terminal summary. Run directly with
``python3 tests/test_acceptance.py`` or through pytest.
"""

import math
import sys

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fbmchaos.chaos import (analytic_variance, exact_multiple_integral, experiment_grid, increment,
                            sample_fbm)
from fbmchaos.cli import _Section, load_config, main
from fbmchaos.harness import ExperimentConfig, fdd_convergence_study, variance_se
from fbmchaos.kernel import Interval, covariance_R, indicator_inner_product as ip
from fbmchaos.noise import NoiseKind, SeedSpec
from fbmchaos.simple import SimpleFunction
from fbmchaos.studies import (eta_covariance_study, kernel_check, band_study, triple_band_study,
                              coincidence_check)

SEED = 20241017
SCHEDULE = (0.2, 0.1, 0.05)
KINDS = (NoiseKind("kac-stroock"), NoiseKind("donsker"))


def record(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def ind(*ivs, coeff=1.0, strict=True):
    return SimpleFunction.indicator(*ivs, coeff=coeff, strict=strict)


def test_criterion_01_kernel_identities():
    res = kernel_check((0.6, 0.75, 0.9), (0.3, 0.7, 1.0), 20, [], 0.75,
                       l2_tol=1e-4, repr_tol=1e-5, ip_tol=1e-5)
    l2 = max(r["residual"] for r in res.rows if r["check"] == "l2")
    rep = max(r["residual"] for r in res.rows if r["check"] == "repr")
    record(1, res.verdicts == {"l2": "pass", "repr": "pass"},
           f"max L2-identity residual {l2:.2e} (tol 1e-4), max representation residual {rep:.2e} (tol 1e-5)")


def test_criterion_02_inner_product_vs_psi():
    pairs = _Section(load_config(None), "kernel-check").pairs("pairs")
    assert len(pairs) == 10
    res = kernel_check((), (), 20, pairs, 0.75, l2_tol=1e-4, repr_tol=1e-5, ip_tol=1e-5)
    worst = max(r["residual"] for r in res.rows)
    record(2, res.verdicts == {"inner": "pass"}, f"10 pairs, max relative error {worst:.2e} (tol 1e-5)")


@pytest.mark.parametrize("H", [0.5, 0.75])
def test_criterion_03_fbm_covariance(H):
    ts = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    X = sample_fbm(H, ts, SeedSpec(SEED, 0, (3,)), size=100_000).values[:, 1:]
    worst = 0.0
    for i in range(5):
        for j in range(5):
            p = X[:, i] * X[:, j]
            se = p.std(ddof=1) / math.sqrt(p.size)
            worst = max(worst, abs(p.mean() - covariance_R(H, ts[i], ts[j])) / se)
    record(3, worst <= 3.0, f"H={H}: 25 entries, max |z| {worst:.2f} (tol 3)")


N3 = ind((0.0, 0.3), (0.4, 0.6), (0.7, 1.0)) + ind((0.5, 0.9), (0.1, 0.45), (0.0, 0.05), coeff=-0.8)
ISOMETRY_CASES = {
    1: ind((0.2, 0.7)) + ind((0.5, 1.0), coeff=-1.5),
    2: ind((0.1, 0.2), (0.4, 0.5)) + ind((0.6, 0.8), (0.85, 1.0), coeff=-0.5),
    3: N3,
}


@pytest.mark.parametrize("H", [0.5, 0.75])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_criterion_04_chaos_isometry(n, H):
    f = ISOMETRY_CASES[n]
    p = sample_fbm(H, experiment_grid(f), SeedSpec(SEED, n, (4,)), size=100_000)
    x = exact_multiple_integral(H, f, 1.0, p)
    ref = analytic_variance(H, f, 1.0)
    z = (x.var(ddof=1) - ref) / variance_se(x)
    record(4, abs(z) <= 4.0, f"n={n} H={H}: variance {x.var(ddof=1):.5f} vs {ref:.5f}, z={z:+.2f} (tol 4)")


@pytest.mark.parametrize("H", [0.5, 0.75])
def test_criterion_05_generic_vs_hand(H):
    A, B, C = Interval(0.0, 0.3), Interval(0.2, 0.6), Interval(0.5, 1.0)
    D = Interval(0.65, 0.9)
    grid = experiment_grid(ind(A, B, strict=False) + ind(C, D, strict=False))
    p = sample_fbm(H, grid, SeedSpec(SEED, 0, (5,)), size=1000)
    dA, dB, dC, dD = (increment(p, I) for I in (A, B, C, D))
    f2 = ind(A, C, strict=False) + ind(B, D, coeff=-2.0)
    hand2 = (dA * dC - ip(H, A, C)) - 2.0 * (dB * dD - ip(H, B, D))
    f3 = ind(A, B, D, strict=False)
    hand3 = dA * dB * dD - ip(H, A, B) * dD - ip(H, A, D) * dB - ip(H, B, D) * dA
    e2 = np.max(np.abs(exact_multiple_integral(H, f2, 1.0, p) - hand2))
    e3 = np.max(np.abs(exact_multiple_integral(H, f3, 1.0, p) - hand3))
    record(5, max(e2, e3) <= 1e-12, f"H={H}: 1000 realizations, max gap n=2 {e2:.1e}, n=3 {e3:.1e} (tol 1e-12)")


def _trend_detail(res):
    parts = []
    for kind in KINDS:
        ms = [r["mean_square"] for r in res.rows if r["kind"] == str(kind)]
        parts.append(f"{kind}: " + " > ".join(f"{m:.4g}" for m in ms))
    return "; ".join(parts)


def test_criterion_06_band_functional():
    sec = _Section(load_config(None), "lemma3")
    I1, I2 = sec.intervals("intervals")
    res = band_study(0.75, I1, I2, SCHEDULE, 10_000, KINDS, SEED)
    record(6, res.passed, "mean square " + _trend_detail(res))


def test_criterion_07_triple_band():
    ivs = _Section(load_config(None), "lemma7").intervals("intervals")
    res = triple_band_study(0.75, ivs, SCHEDULE, 10_000, KINDS, SEED)
    record(7, res.passed, "mean square " + _trend_detail(res))


def test_criterion_08_eta_covariance():
    res = eta_covariance_study(0.75, (0.5, 1.0), SCHEDULE, 10_000, KINDS[0], SEED)
    errs = " -> ".join(f"{r['error']:.4f}" for r in res.rows)
    record(8, res.passed, f"kac-stroock |cov - R(0.5,1)| {errs}")


def test_criterion_09_fdd_convergence():
    sec = _Section(load_config(None), "fdd-converge")
    cfg = ExperimentConfig(H=0.75, f=sec.integrand("integrand"), probes=(0.5, 1.0),
                           eps_schedule=SCHEDULE, n_replications=10_000, seed=SEED, z_threshold=4.0)
    rep, _, _ = fdd_convergence_study(cfg)
    ks = {t: [r["ks"] for r in rep.rows if r["probe"] == t] for t in cfg.probes}
    fin = {r["probe"]: r for r in rep.final_rows()}
    cz = rep.covariance_rows[-1]["covariance_z"]
    detail = "; ".join(
        f"t={t}: KS {' -> '.join(f'{k:.3f}' for k in ks[t])}, mean z {fin[t]['mean'] / fin[t]['mean_se']:+.2f}, "
        f"variance z {fin[t]['variance_z']:+.2f}" for t in cfg.probes) + f"; covariance z {cz:+.2f}"
    record(9, rep.passed, detail)


def test_criterion_10_brownian_coincidence():
    ivs = [Interval(0.05, 0.25), Interval(0.35, 0.55), Interval(0.7, 0.9)]
    res = coincidence_check(ivs, 0.09, (2, 3), 100, KINDS[0], SEED)
    detail = "; ".join(f"n={r['order']}: max |diff| {r['max_abs_diff']:.1e}, max bound {r['max_bound']:.1e}, "
                       f"{r['n_within']}/100 within" for r in res.rows)
    record(10, res.passed, detail)


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text("[fdd-converge]\neps_schedule = 0.4, 0.2\nn_replications = 200\n"
                   "[eta-cov]\nn_replications = 300\n"
                   "[lemma7]\neps_schedule = 0.4, 0.2\nn_replications = 200\n")
    same = True
    names = []
    for cmd in ("fdd-converge", "eta-cov", "lemma7"):
        outs = []
        for w in ("1", "8"):
            d = tmp_path / f"{cmd}-{w}"
            main([cmd, "--config", str(cfg), "--out", str(d), "--workers", w])
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        same &= outs[0] == outs[1] and bool(outs[0])
        names += sorted(n for n in outs[0] if n.endswith(".csv"))
    record(11, same, f"workers 1 vs 8 byte-identical: {', '.join(names)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
