"""Command-line front end.

Exit status: 0 when every verdict passes, 1 on usage or configuration
errors, 2 when a verdict fails.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .approx import GridSpec
from .harness import (NS_NOISE, ExperimentConfig, _ApproxFunctional, _fmt, exact_reference,
                      fdd_convergence_study, run_replications)
from .kernel import Interval, QuadratureSpec
from .noise import NoiseKind
from .simple import parse_simple_function
from .studies import eta_covariance_study, kernel_check, band_study, triple_band_study

COMMANDS = ("kernel-check", "eta-cov", "lemma3", "lemma7", "fdd-converge", "sample")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fbmchaos", description="Approximation of multiple fractional "
                "Wiener-Ito integrals by noise kernels: convergence experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="INI file overriding the packaged defaults")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, help="worker threads for replications")
    return p


def load_config(path: Path | None) -> configparser.ConfigParser:
    """Packaged defaults, overlaid with ``path`` when given.

    Keys in ``[common]`` apply to every section unless the section sets them.
    Unknown sections and keys in the user file are rejected.
    """
    defaults = resources.files("fbmchaos").joinpath("defaults.ini").read_text()
    cp = configparser.ConfigParser(default_section="common", interpolation=None)
    cp.read_string(defaults, "defaults.ini")
    if path is None:
        return cp
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    text = path.read_text()
    # plain parse: [common] is an ordinary section, so each section lists only its own keys
    user = configparser.ConfigParser(default_section="\0", interpolation=None)
    try:
        user.read_string(text, str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    common = set(cp.defaults())
    for name in user.sections():
        if name != "common" and name not in cp.sections():
            raise ConfigError(f"{path}: unknown section [{name}]")
        allowed = common if name == "common" else common | set(cp[name].keys())
        for key in user[name]:
            if key not in allowed:
                raise ConfigError(f"{path}: [{name}] unknown key {key!r}")
    cp.read_string(text, str(path))
    return cp


class _Section:
    """Typed accessors that turn parse failures into field diagnostics."""

    def __init__(self, cp: configparser.ConfigParser, name: str):
        self.name = name
        self.sec = cp[name]

    def _raw(self, key: str) -> str:
        if key not in self.sec:
            raise ConfigError(f"[{self.name}] missing key {key!r}")
        return self.sec[key]

    def _conv(self, key, fn, what):
        raw = self._raw(key)
        try:
            return fn(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{self.name}] {key} = {raw!r}: expected {what} ({exc})") from None

    def float(self, key):
        return self._conv(key, float, "a number")

    def int(self, key):
        return self._conv(key, int, "an integer")

    def floats(self, key):
        return self._conv(key, lambda s: tuple(float(x) for x in s.split(",") if x.strip()),
                          "comma-separated numbers")

    def kinds(self, key):
        return self._conv(key, lambda s: tuple(NoiseKind.parse(x) for x in s.split(",") if x.strip()),
                          "noise kinds")

    def kind(self, key):
        return self._conv(key, NoiseKind.parse, "a noise kind")

    def intervals(self, key):
        return self._conv(key, lambda s: tuple(_Section._split_intervals(s)),
                          "'a,b; c,d; ...' intervals")

    def pairs(self, key):
        def parse(s):
            out = []
            for line in s.strip().splitlines():
                line = line.strip()
                if line:
                    ivs = _Section._split_intervals(line)
                    if len(ivs) != 2:
                        raise ValueError(f"line {line!r} must hold two intervals")
                    out.append(tuple(ivs))
            return tuple(out)
        return self._conv(key, parse, "one 'a,b; c,d' pair per line")

    @staticmethod
    def _split_intervals(line):
        out = []
        for part in line.split(";"):
            a, b = part.split(",")
            out.append(Interval(float(a), float(b)))
        return out

    def integrand(self, key):
        raw = self._raw(key)
        try:
            return parse_simple_function(raw)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key}: {exc}") from None


def _common(sec: _Section, args):
    seed = args.seed if args.seed is not None else sec.int("seed")
    workers = args.workers if args.workers is not None else sec.int("workers")
    if not (0 <= seed < 2 ** 64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if workers < 1:
        raise ConfigError("workers must be positive")
    try:
        q = QuadratureSpec(nodes=sec.int("quad_nodes"), tol=sec.float("quad_tol"),
                           table_cells=sec.int("table_cells"))
        grid = GridSpec(ratio=sec.float("grid_ratio"))
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {exc}") from None
    return seed, workers, q, grid


def _experiment(sec: _Section, seed, q, grid) -> ExperimentConfig:
    try:
        return ExperimentConfig(H=sec.float("hurst"), f=sec.integrand("integrand"),
                                probes=sec.floats("probes"), eps_schedule=sec.floats("eps_schedule"),
                                n_replications=sec.int("n_replications"), noise=sec.kind("noise"),
                                grid=grid, quadrature=q, seed=seed,
                                z_threshold=sec.float("z_threshold") if "z_threshold" in sec.sec else 4.0)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {exc}") from None


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text, encoding="utf-8", newline="")


def run(args) -> int:
    cp = load_config(args.config)
    sec = _Section(cp, args.command)
    seed, workers, q, grid = _common(sec, args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd == "kernel-check":
        res = kernel_check(sec.floats("hurst_values"), sec.floats("times"), sec.int("points"),
                           sec.pairs("pairs"), sec.float("hurst"), sec.float("l2_tol"),
                           sec.float("repr_tol"), sec.float("inner_tol"), q)
    elif cmd == "eta-cov":
        probes = sec.floats("probes")
        if len(probes) != 2:
            raise ConfigError("[eta-cov] probes must hold exactly two times")
        res = eta_covariance_study(sec.float("hurst"), probes, sec.floats("eps_schedule"),
                                   sec.int("n_replications"), sec.kind("noise"), seed, workers, q)
    elif cmd == "lemma3":
        ivs = sec.intervals("intervals")
        if len(ivs) != 2:
            raise ConfigError("[lemma3] intervals must hold exactly two intervals")
        res = band_study(sec.float("hurst"), ivs[0], ivs[1], sec.floats("eps_schedule"),
                           sec.int("n_replications"), sec.kinds("kinds"), seed, grid, workers, q)
    elif cmd == "lemma7":
        ivs = sec.intervals("intervals")
        if len(ivs) != 3:
            raise ConfigError("[lemma7] intervals must hold exactly three intervals")
        res = triple_band_study(sec.float("hurst"), ivs, sec.floats("eps_schedule"),
                           sec.int("n_replications"), sec.kinds("kinds"), seed, grid, workers, q)
    elif cmd == "fdd-converge":
        cfg = _experiment(sec, seed, q, grid)
        rep, _, _ = fdd_convergence_study(cfg, workers=workers)
        _write(out, "fdd-converge.csv", rep.to_csv())
        _write(out, "fdd-converge_covariance.csv", rep.covariance_csv())
        summary = rep.summary()
        _write(out, "fdd-converge_summary.txt", summary + "\n")
        print(summary)
        return EXIT_OK if rep.passed else EXIT_FAIL
    else:
        cfg = _experiment(sec, seed, q, grid)
        _write(out, "sample.csv", _sample_csv(cfg, workers))
        print(f"wrote {cfg.n_replications} replications per source to {out / 'sample.csv'}")
        return EXIT_OK
    _write(out, f"{cmd}.csv", res.to_csv())
    summary = res.summary()
    _write(out, f"{cmd}_summary.txt", summary + "\n")
    print(summary)
    return EXIT_OK if res.passed else EXIT_FAIL


def _sample_csv(cfg: ExperimentConfig, workers: int) -> str:
    """Raw probe-vector samples: one row per (source, replication)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "replication", *(f"t={t!r}" for t in cfg.probes)])
    for eps in cfg.eps_schedule:
        X = run_replications(_ApproxFunctional(cfg, eps), cfg.n_replications, seed=cfg.seed,
                             namespace=(NS_NOISE,), workers=workers)
        for i, row in enumerate(X):
            w.writerow([f"eps={eps!r}", i, *(_fmt(float(v)) for v in row)])
    ref = exact_reference(cfg)
    for i, row in enumerate(np.atleast_2d(ref)):
        w.writerow(["exact", i, *(_fmt(float(v)) for v in row)])
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
