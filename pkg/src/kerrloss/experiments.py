"""Parameter sweeps behind the gain, fidelity and measurement-ratio maps.

Every sweep returns a :class:`SweepResult`, a small column-ordered table
that serializes to CSV (17 significant digits) with a JSON sidecar holding
the configuration.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from kerrloss import __version__
from kerrloss.channel import ChannelParams, evolve_coherent_exact, fidelity, pure_state_approx
from kerrloss.metrology import (
    QFI_TOL,
    optimize_quadrature_phase,
    qfi_coherent_analytic,
    qfi_curve,
    qfi_curve_many,
    qfi_fock_analytic,
    qfi_squeezed_analytic,
)
from kerrloss.numerics import maximize_scalar, maximize_scalar_many
from kerrloss.states import ProbeSpec, required_dim

__all__ = [
    "SweepResult",
    "SweepError",
    "splitmix64",
    "uniform_samples",
    "optimal_qfi",
    "gain_vs_time",
    "optimal_gain_surface",
    "small_time_gain",
    "quadrature_ratio_map",
    "qutrit_average_gain",
    "fidelity_map",
    "baselines",
]

TAU_MAX = 12.0
TAU_MIN = 1e-3
_MASK64 = (1 << 64) - 1


@dataclass
class SweepResult:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path: str | Path) -> Path:
        """Write the table and a ``.json`` sidecar next to it; returns the
        sidecar path."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_format(row[c]) for c in self.columns])
        sidecar = path.with_suffix(".json")
        meta = {"code_version": __version__, "columns": self.columns, **self.meta}
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return sidecar

    @classmethod
    def read_csv(cls, path: str | Path) -> "SweepResult":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            columns = next(reader)
            rows = [{c: _parse(v) for c, v in zip(columns, line)} for line in reader]
        sidecar = path.with_suffix(".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        return cls(columns, rows, meta)


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _parse(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, ProbeSpec):
        return obj.describe()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def splitmix64(seed: int) -> Iterator[int]:
    """SplitMix64 stream of 64-bit integers."""
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def uniform_samples(seed: int, count: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """``count`` draws from the open interval ``(lo, hi)``: the top 53 bits of
    each SplitMix64 output, offset by half a unit."""
    gen = splitmix64(seed)
    u = np.array([((next(gen) >> 11) + 0.5) * 2.0 ** -53 for _ in range(count)])
    return lo + (hi - lo) * u


class SweepError(RuntimeError):
    """A sweep point failed; ``point`` holds its parameters."""

    def __init__(self, point, cause: Exception):
        super().__init__(f"failed at {point}: {type(cause).__name__}: {cause}")
        self.point = point


def _guarded(fn: Callable, item):
    try:
        return fn(item)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        raise SweepError(item, exc) from exc


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    # pool.map keeps input order, so output order never depends on scheduling
    if workers <= 1 or len(items) <= 1:
        return [_guarded(fn, item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(partial(_guarded, fn), items))


def optimal_qfi(probe: ProbeSpec, lam: float, gamma: float = 1.0, dim: int | None = None,
                tau_max: float = TAU_MAX, tol: float = 1e-6) -> tuple[float, float]:
    """Interaction time maximizing the QFI at fixed ``lam``, and that QFI."""
    dim = required_dim(probe) if dim is None else dim
    return maximize_scalar(lambda taus: qfi_curve(probe, lam, taus, gamma, dim),
                           TAU_MIN, tau_max, tol=tol, vectorized=True)


def _gain(h_kerr: float, h_lin: float) -> float:
    # the vacuum carries no information either way; report no gain
    if h_lin == 0.0:
        return 0.0
    return h_kerr / h_lin - 1.0


def _probe_columns(probe: ProbeSpec) -> dict:
    return {"probe": probe.kind, "nbar": probe.nbar}


def gain_vs_time(probe: ProbeSpec, lam: float, taus: Iterable[float], gamma: float = 1.0,
                 dim: int | None = None, tol: float = QFI_TOL) -> SweepResult:
    taus = np.asarray(list(taus), dtype=float)
    dim = required_dim(probe) if dim is None else dim
    h_kerr = qfi_curve(probe, lam, taus, gamma, dim, tol)
    h_lin = qfi_curve(probe, 0.0, taus, gamma, dim, tol)
    result = SweepResult(["probe", "nbar", "lambda", "tau", "H_kerr", "H_lin", "gain", "dim"],
                         meta={"experiment": "gain-vs-time", "probe": probe, "gamma": gamma, "tol": tol})
    for tau, hk, hl in zip(taus, h_kerr, h_lin):
        hk, hl = float(hk), float(hl)
        result.rows.append({**_probe_columns(probe), "lambda": lam, "tau": float(tau), "H_kerr": hk,
                            "H_lin": hl, "gain": _gain(hk, hl), "dim": dim})
    return result


def _optimal_point(args) -> dict:
    alpha, lam, gamma = args
    probe = ProbeSpec.coherent(alpha)
    tau_k, h_k = optimal_qfi(probe, lam, gamma)
    tau_l, h_l = optimal_qfi(probe, 0.0, gamma)
    return {"alpha": alpha, "nbar": probe.nbar, "lambda": lam, "tau_opt": tau_k, "H_kerr": h_k,
            "tau_opt_lin": tau_l, "H_lin": h_l, "gain": _gain(h_k, h_l), "dim": required_dim(probe)}


def optimal_gain_surface(alphas: Iterable[float], lams: Iterable[float], gamma: float = 1.0,
                         workers: int = 1) -> SweepResult:
    """Relative gain of the time-optimized QFI for coherent probes on an
    ``alpha x lambda`` grid."""
    points = [(float(a), float(l), gamma) for a in alphas for l in lams]
    rows = _pmap(_optimal_point, points, workers)
    result = SweepResult(["alpha", "nbar", "lambda", "tau_opt", "H_kerr", "tau_opt_lin", "H_lin", "gain", "dim"],
                         rows, {"experiment": "optimal-gain", "gamma": gamma})
    worst = min(r["gain"] for r in rows) if rows else 0.0
    result.meta["min_gain"] = worst
    if worst < -1e-6:
        warnings.warn(f"negative optimal gain {worst:.3e} on the surface", RuntimeWarning, stacklevel=2)
    return result


def small_time_gain(probes: Sequence[ProbeSpec], tau: float, lams: Iterable[float],
                    gamma: float = 1.0, tol: float = QFI_TOL) -> SweepResult:
    """Relative gain at one fixed short time for each probe and ``lambda``."""
    if not 0 < tau < 1:
        raise ValueError("small-time gain needs 0 < tau < 1")
    lams = [float(l) for l in lams]
    result = SweepResult(["probe", "nbar", "alpha", "lambda", "tau", "H_kerr", "H_lin", "gain", "dim"],
                         meta={"experiment": "small-time-gain", "tau": tau, "gamma": gamma})
    for probe in probes:
        dim = required_dim(probe)
        h_lin = float(qfi_curve(probe, 0.0, [tau], gamma, dim, tol)[0])
        for lam in lams:
            h_k = float(qfi_curve(probe, lam, [tau], gamma, dim, tol)[0])
            result.rows.append({**_probe_columns(probe), "alpha": abs(probe.alpha), "lambda": lam, "tau": tau,
                                "H_kerr": h_k, "H_lin": h_lin, "gain": _gain(h_k, h_lin), "dim": dim})
    return result


def _ratio_point(args) -> dict:
    mode, alpha, lam, tau, gamma = args
    probe = ProbeSpec.coherent(alpha)
    if mode == "optimal-time":
        tau, reference = optimal_qfi(probe, lam, gamma)
    else:
        reference = qfi_coherent_analytic(probe.nbar, gamma, tau)
    phase, fx = optimize_quadrature_phase(probe, ChannelParams.rescaled(tau, lam, gamma))
    return {"alpha": alpha, "nbar": probe.nbar, "lambda": lam, "tau": tau, "phase": phase, "F_x": fx,
            "H_ref": reference, "ratio": fx / reference, "dim": required_dim(probe)}


def quadrature_ratio_map(mode: str, alphas: Iterable[float], lams: Iterable[float], tau: float | None = None,
                         gamma: float = 1.0, workers: int = 1) -> SweepResult:
    """Phase-optimized homodyne FI relative to a QFI reference.

    ``mode="optimal-time"`` measures at the QFI-optimal time and divides by
    the optimal QFI with Kerr; ``mode="fixed-time"`` measures at ``tau`` and
    divides by the linear coherent QFI at that time.
    """
    if mode not in ("optimal-time", "fixed-time"):
        raise ValueError("mode must be 'optimal-time' or 'fixed-time'")
    if mode == "fixed-time" and (tau is None or tau <= 0):
        raise ValueError("fixed-time mode needs tau > 0")
    points = [(mode, float(a), float(l), tau, gamma) for a in alphas for l in lams]
    rows = _pmap(_ratio_point, points, workers)
    result = SweepResult(["alpha", "nbar", "lambda", "tau", "phase", "F_x", "H_ref", "ratio", "dim"], rows,
                         {"experiment": "quadrature-ratio", "mode": mode, "tau": tau, "gamma": gamma})
    if mode == "optimal-time":
        worst = max((r["ratio"] for r in rows), default=0.0)
        if worst > 1 + 1e-6:
            warnings.warn(f"homodyne FI exceeds the QFI (ratio {worst:.8g})", RuntimeWarning, stacklevel=2)
    return result


def _optimal_qfi_many(states: np.ndarray, lam: float, gamma: float, chunk: int = 100,
                      tol: float = QFI_TOL) -> np.ndarray:
    out = []
    for start in range(0, len(states), chunk):
        block = states[start : start + chunk]
        _, h = maximize_scalar_many(lambda taus: qfi_curve_many(block, lam, taus, gamma, tol),
                                    TAU_MIN, TAU_MAX, len(block), tol=1e-6)
        out.append(h)
    return np.concatenate(out)


def qutrit_average_gain(nbars: Iterable[float], lams: Iterable[float], samples: int = 1000, seed: int = 0,
                        gamma: float = 1.0, mu: float = math.pi, nu: float = math.pi,
                        tol: float = QFI_TOL) -> SweepResult:
    """Mean relative gain of the time-optimized QFI over random qutrit
    mixing angles ``phi`` in ``(0, pi/2)``.

    One seeded set of angles is shared by every grid point; each sampled
    state is optimized over time only, with and without Kerr.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    phis = uniform_samples(seed, samples, 0.0, math.pi / 2)
    lams = [float(l) for l in lams]
    result = SweepResult(["nbar", "lambda", "mean_gain", "std_gain", "min_gain", "max_gain", "samples"],
                         meta={"experiment": "qutrit-gain", "seed": seed, "samples": samples, "gamma": gamma,
                               "mu": mu, "nu": nu})
    for nbar in nbars:
        states = np.array([ProbeSpec.qutrit(float(nbar), float(phi), mu, nu).state() for phi in phis])
        h_lin = _optimal_qfi_many(states, 0.0, gamma, tol=tol)
        for lam in lams:
            g = _optimal_qfi_many(states, lam, gamma, tol=tol) / h_lin - 1.0
            result.rows.append({"nbar": float(nbar), "lambda": lam, "mean_gain": float(g.mean()),
                                "std_gain": float(g.std()), "min_gain": float(g.min()),
                                "max_gain": float(g.max()), "samples": samples})
    return result


def fidelity_map(alphas: Iterable[float] = (0.5, 0.75, 1.0), lams: Iterable[float] = (0.0,),
                 taus: Iterable[float] = (1.0,), dim: int | None = None) -> SweepResult:
    """Overlap of the small-Kerr pure-state approximation with the exact
    coherent-probe state."""
    result = SweepResult(["alpha", "lambda", "tau", "fidelity", "dim"], meta={"experiment": "fidelity-map"})
    taus = [float(t) for t in taus]
    for alpha in alphas:
        d = dim or required_dim(ProbeSpec.coherent(alpha))
        for lam in lams:
            exact = evolve_coherent_exact(alpha, float(lam), np.array(taus), d)
            for tau, rho in zip(taus, exact):
                psi = pure_state_approx(alpha, float(lam), tau, d)
                result.rows.append({"alpha": float(alpha), "lambda": float(lam), "tau": tau,
                                    "fidelity": fidelity(psi, rho), "dim": d})
    result.meta["dim"] = dim
    return result


def baselines(taus: Iterable[float], nbar: float = 1.0, gamma: float = 1.0) -> SweepResult:
    """Linear-channel QFI of coherent, squeezed-vacuum and Fock probes."""
    result = SweepResult(["tau", "nbar", "H_coherent", "H_squeezed", "H_fock"],
                         meta={"experiment": "baselines", "gamma": gamma})
    for tau in taus:
        tau = float(tau)
        result.rows.append({"tau": tau, "nbar": nbar,
                            "H_coherent": qfi_coherent_analytic(nbar, gamma, tau),
                            "H_squeezed": qfi_squeezed_analytic(nbar, gamma, tau),
                            "H_fock": qfi_fock_analytic(nbar, gamma, tau)})
    return result
