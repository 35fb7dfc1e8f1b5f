"""Command-line entry point: ``kerrloss <experiment> [options]``.

Value flags take a single number, a comma list (``0.5,1,2``) or a linspace
triple ``lo:hi:steps``. ``--grid`` overrides the main axis of the chosen
experiment (time for gain-vs-time, fidelity-map and baselines, lambda for
the rest).
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from kerrloss.experiments import (
    SweepResult,
    baselines,
    fidelity_map,
    gain_vs_time,
    optimal_gain_surface,
    qutrit_average_gain,
    quadrature_ratio_map,
    small_time_gain,
)
from kerrloss.metrology import QFI_TOL
from kerrloss.numerics import IntegrationError
from kerrloss.states import DEFAULT_DIM_CAP, ProbeSpec, TruncationError, required_dim

EXPERIMENTS = ("gain-vs-time", "optimal-gain", "small-time-gain", "quadrature-ratio", "qutrit-gain",
               "fidelity-map", "baselines")
TIME_AXIS = {"gain-vs-time", "fidelity-map", "baselines"}


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:steps`` -> linspace; ``a,b,c`` -> list; ``x`` -> [x]."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"grid '{text}' must look like lo:hi:steps")
            lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
            if steps < 1:
                raise ConfigError(f"grid '{text}' needs at least one step")
            return np.linspace(lo, hi, steps)
        values = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse '{text}' as numbers: {exc}") from None
    if values.size == 0:
        raise ConfigError("empty grid")
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"non-finite value in '{text}'")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrloss", description="Loss-rate estimation sweeps with Kerr nonlinearity.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--probe", choices=("coherent", "squeezed", "fock", "qutrit"), default="coherent")
    parser.add_argument("--alpha", help="coherent amplitude(s)")
    parser.add_argument("--nbar", help="mean photon number(s)")
    parser.add_argument("--r", help="squeezing argument (alternative to --nbar)")
    parser.add_argument("--n", type=int, help="Fock index")
    parser.add_argument("--lambda", dest="lam", help="rescaled Kerr strength(s)")
    parser.add_argument("--tau", help="rescaled time(s)")
    parser.add_argument("--gamma", type=float, default=1.0)
    parser.add_argument("--grid", help="main axis as lo:hi:steps")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="CSV path (a .json sidecar is written next to it)")
    parser.add_argument("--dim-cap", type=int, default=DEFAULT_DIM_CAP)
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--tol", type=float, default=QFI_TOL, help="ODE tolerance")
    parser.add_argument("--mode", choices=("optimal-time", "fixed-time"), default="optimal-time",
                        help="quadrature-ratio reference")
    parser.add_argument("--workers", type=int, default=1)
    return parser


def _values(text: str | None, default) -> np.ndarray:
    return parse_grid(text) if text is not None else np.atleast_1d(np.asarray(default, dtype=float))


def _probes(args) -> list[ProbeSpec]:
    if args.probe == "coherent":
        return [ProbeSpec.coherent(a) for a in _values(args.alpha, 1.0)]
    if args.probe == "squeezed":
        if args.r is not None:
            return [ProbeSpec.squeezed(r=r) for r in parse_grid(args.r)]
        return [ProbeSpec.squeezed(nbar=n) for n in _values(args.nbar, 1.0)]
    if args.probe == "fock":
        return [ProbeSpec.fock(1 if args.n is None else args.n)]
    raise ConfigError("qutrit probes are only used by the qutrit-gain experiment")


def _check_dims(probes, cap: int) -> None:
    for probe in probes:
        required_dim(probe, cap=cap)


def _single(values: np.ndarray, name: str) -> float:
    if values.size != 1:
        raise ConfigError(f"{name} takes a single value here")
    return float(values[0])


def run(args) -> SweepResult:
    exp = args.experiment
    if args.gamma <= 0:
        raise ConfigError("--gamma must be positive")
    if not 0 < args.tol <= 1e-3:
        raise ConfigError("--tol must lie in (0, 1e-3]")
    grid = parse_grid(args.grid) if args.grid else None
    taus = grid if (grid is not None and exp in TIME_AXIS) else None
    lams = grid if (grid is not None and exp not in TIME_AXIS) else None

    if exp == "gain-vs-time":
        probes = _probes(args)
        if len(probes) != 1:
            raise ConfigError("gain-vs-time takes one probe")
        _check_dims(probes, args.dim_cap)
        lam = _single(_values(args.lam, 0.5), "--lambda")
        taus = taus if taus is not None else _values(args.tau, np.linspace(0.01, 6.0, 120))
        return gain_vs_time(probes[0], lam, taus, args.gamma, tol=args.tol)
    if exp == "optimal-gain":
        alphas = _values(args.alpha, [0.25, 0.5, 1.0, 1.5, 2.0])
        _check_dims([ProbeSpec.coherent(a) for a in alphas], args.dim_cap)
        lams = lams if lams is not None else _values(args.lam, [0.1, 0.5, 1.0, 2.0, 3.0])
        return optimal_gain_surface(alphas, lams, args.gamma, workers=args.workers)
    if exp == "small-time-gain":
        probes = _probes(args)
        _check_dims(probes, args.dim_cap)
        tau = _single(_values(args.tau, 0.1), "--tau")
        if not 0 < tau < 1:
            raise ConfigError("small-time-gain needs 0 < --tau < 1")
        lams = lams if lams is not None else _values(args.lam, [0.5, 1.0, 2.0, 3.0])
        return small_time_gain(probes, tau, lams, args.gamma, tol=args.tol)
    if exp == "quadrature-ratio":
        alphas = _values(args.alpha, [0.5, 1.0, 2.0, 3.0])
        _check_dims([ProbeSpec.coherent(a) for a in alphas], args.dim_cap)
        lams = lams if lams is not None else _values(args.lam, [0.0, 0.5, 1.0, 2.0, 3.0])
        tau = None if args.mode == "optimal-time" else _single(_values(args.tau, 0.1), "--tau")
        return quadrature_ratio_map(args.mode, alphas, lams, tau, args.gamma, workers=args.workers)
    if exp == "qutrit-gain":
        nbars = _values(args.nbar, [0.5])
        if np.any(nbars <= 0) or np.any(nbars > 1):
            raise ConfigError("qutrit nbar must lie in (0, 1]")
        lams = lams if lams is not None else _values(args.lam, [0.5, 1.0, 2.0, 3.0])
        if np.any(lams <= 0) or np.any(lams > math.pi):
            raise ConfigError("qutrit lambda must lie in (0, pi]")
        return qutrit_average_gain(nbars, lams, args.samples, args.seed, args.gamma, tol=args.tol)
    if exp == "fidelity-map":
        alphas = _values(args.alpha, [0.5, 0.75, 1.0])
        _check_dims([ProbeSpec.coherent(a) for a in alphas], args.dim_cap)
        lams = _values(args.lam, [0.0, 0.1, 0.25, 0.5])
        taus = taus if taus is not None else _values(args.tau, np.linspace(0.0, 5.0, 51))
        return fidelity_map(alphas, lams, taus)
    nbar = _single(_values(args.nbar, 1.0), "--nbar")
    taus = taus if taus is not None else _values(args.tau, np.linspace(0.05, 6.0, 120))
    return baselines(taus, nbar, args.gamma)


def summarize(result: SweepResult) -> str:
    exp = result.meta.get("experiment", "?")
    parts = [f"{exp}: {len(result)} rows"]
    for col in ("gain", "mean_gain", "ratio", "fidelity", "H_fock"):
        if col in result.columns and len(result):
            values = result.column(col).astype(float)
            i = int(np.argmax(values))
            row = result.rows[i]
            where = ", ".join(f"{k}={row[k]:.6g}" for k in ("alpha", "nbar", "lambda", "tau")
                              if k in row and isinstance(row[k], (int, float)))
            parts.append(f"max {col}={values[i]:.6g} at {where}; min {col}={values.min():.6g}")
            break
    return "; ".join(parts)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = run(args)
    except (ConfigError, TruncationError) as exc:
        print(f"kerrloss: configuration error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"kerrloss: numerical failure: {exc}", file=sys.stderr)
        return 3
    result.meta["config"] = {k: v for k, v in vars(args).items() if k != "workers"}
    if args.out:
        sidecar = result.to_csv(Path(args.out))
        print(f"wrote {args.out} and {sidecar}", file=sys.stderr)
    print(summarize(result))
    return 0


if __name__ == "__main__":
    warnings.simplefilter("default")
    sys.exit(main())
