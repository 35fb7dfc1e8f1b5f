"""Probe states in a truncated Fock basis and the truncation-size policy.

States are plain numpy arrays: a pure state is a complex vector of Fock
amplitudes, a mixed state a complex ``dim x dim`` density matrix.

Squeezing convention: the squeezed vacuum is parametrized by its squeezing
argument ``r`` with mean energy ``sinh(r)**2``. The operator for it is
sometimes written with ``r**2`` in the exponent; that form is inconsistent
with ``nbar = sinh(r)**2`` and is not used here. Everything downstream is
reported against ``nbar``, so the two readings only differ in how ``r`` is
labelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "LEAKAGE_TOL",
    "DEFAULT_DIM_CAP",
    "TruncationError",
    "ProbeSpec",
    "coherent_state",
    "squeezed_vacuum",
    "fock_state",
    "qutrit_state",
    "qutrit_theta",
    "mean_photon_number",
    "leakage",
    "leakage_dim",
    "required_dim",
]

LEAKAGE_TOL = 1e-8
DEFAULT_DIM_CAP = 300
QFI_MATCH_RTOL = 1e-5
# truncated share of the mean energy; keeps nbar exact to 1e-6 relative
ENERGY_RTOL = 1e-7

KINDS = ("coherent", "squeezed", "fock", "qutrit")


class TruncationError(ValueError):
    """The requested truncation cannot represent the probe accurately."""


@dataclass(frozen=True)
class ProbeSpec:
    """Tagged description of an input probe.

    Use the ``coherent``/``squeezed``/``fock``/``qutrit`` constructors rather
    than filling the fields by hand.
    """

    kind: str
    alpha: complex = 0j
    r: float = 0.0
    n: int = 0
    nbar_target: float = 0.0
    phi: float = 0.0
    mu: float = math.pi
    nu: float = math.pi
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown probe kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def coherent(cls, alpha: complex) -> "ProbeSpec":
        return cls("coherent", alpha=complex(alpha))

    @classmethod
    def squeezed(cls, nbar: float | None = None, r: float | None = None) -> "ProbeSpec":
        if (nbar is None) == (r is None):
            raise ValueError("give exactly one of nbar or r")
        if r is None:
            if nbar < 0:
                raise ValueError("nbar must be non-negative")
            r = math.asinh(math.sqrt(nbar))
        return cls("squeezed", r=float(r))

    @classmethod
    def fock(cls, n: int) -> "ProbeSpec":
        if int(n) != n or n < 0:
            raise ValueError("Fock index must be a non-negative integer")
        return cls("fock", n=int(n))

    @classmethod
    def qutrit(cls, nbar: float, phi: float, mu: float = math.pi, nu: float = math.pi) -> "ProbeSpec":
        qutrit_theta(nbar, phi)  # validates
        return cls("qutrit", nbar_target=float(nbar), phi=float(phi), mu=float(mu), nu=float(nu))

    @property
    def nbar(self) -> float:
        if self.kind == "coherent":
            return abs(self.alpha) ** 2
        if self.kind == "squeezed":
            return math.sinh(self.r) ** 2
        if self.kind == "fock":
            return float(self.n)
        return self.nbar_target

    def state(self, dim: int | None = None) -> np.ndarray:
        if self.kind == "coherent":
            return coherent_state(self.alpha, dim)
        if self.kind == "squeezed":
            return squeezed_vacuum(self.r, dim)
        if self.kind == "fock":
            return fock_state(self.n, dim)
        return qutrit_state(self.nbar_target, self.phi, self.mu, self.nu, dim)

    def describe(self) -> str:
        if self.kind == "coherent":
            a = self.alpha
            return f"coherent(alpha={a.real:g}{a.imag:+g}j)" if a.imag else f"coherent(alpha={a.real:g})"
        if self.kind == "squeezed":
            return f"squeezed(r={self.r:g}, nbar={self.nbar:g})"
        if self.kind == "fock":
            return f"fock(n={self.n})"
        return f"qutrit(nbar={self.nbar_target:g}, phi={self.phi:g}, mu={self.mu:g}, nu={self.nu:g})"


def _coherent_amplitudes(alpha: complex, size: int) -> np.ndarray:
    c = np.empty(size, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for k in range(size - 1):
        c[k + 1] = c[k] * alpha / math.sqrt(k + 1)
    return c


def _squeezed_amplitudes(r: float, size: int) -> np.ndarray:
    c = np.zeros(size, dtype=complex)
    c[0] = 1.0 / math.sqrt(math.cosh(r))
    t = -math.tanh(r)
    for m in range(0, (size - 1) // 2):
        c[2 * m + 2] = c[2 * m] * t * math.sqrt((2 * m + 1) * (2 * m + 2)) / (2 * (m + 1))
    return c


def _tail_dim(amplitudes_fn, start: int, tol: float = LEAKAGE_TOL, cap: int = 100_000) -> int:
    """Smallest ``dim`` whose probability tail ``sum_{n >= dim} |c_n|^2``
    is below ``tol`` and whose energy tail ``sum_{n >= dim} n |c_n|^2`` is
    below ``ENERGY_RTOL`` times the mean energy. Tails are summed from the
    far end."""
    size = max(2 * start, 64)
    while True:
        p = np.abs(amplitudes_fn(size)) ** 2
        if p[-8:].sum() < 1e-30 or size >= cap:
            break
        size *= 2
    n = np.arange(size)
    tail = np.cumsum(p[::-1])[::-1]
    energy_tail = np.cumsum((n * p)[::-1])[::-1]
    ok = np.nonzero((tail <= tol) & (energy_tail <= ENERGY_RTOL * np.sum(n * p)))[0]
    return int(ok[0]) if ok.size else size


def _coherent_policy_dim(alpha: complex) -> int:
    n2 = abs(alpha) ** 2
    return math.ceil(n2 + 8.0 * math.sqrt(n2 + 1.0) + 10.0)


def leakage_dim(probe: ProbeSpec) -> int:
    """Smallest truncation satisfying the leakage policy for ``probe``."""
    if probe.kind == "coherent":
        return max(_coherent_policy_dim(probe.alpha),
                   _tail_dim(lambda s: _coherent_amplitudes(probe.alpha, s), 8))
    if probe.kind == "squeezed":
        return max(1, _tail_dim(lambda s: _squeezed_amplitudes(probe.r, s), 8))
    if probe.kind == "fock":
        return probe.n + 1
    return 3


def _check_dim(dim: int | None, minimum: int, what: str) -> int:
    if dim is None:
        return minimum
    if int(dim) != dim or dim < 1:
        raise ValueError("dim must be a positive integer")
    if dim < minimum:
        raise TruncationError(f"dim={dim} is below the {minimum} required for {what} (leakage <= {LEAKAGE_TOL:g})")
    return int(dim)


def coherent_state(alpha: complex, dim: int | None = None) -> np.ndarray:
    alpha = complex(alpha)
    dim = _check_dim(dim, leakage_dim(ProbeSpec.coherent(alpha)), f"coherent alpha={alpha}")
    return _coherent_amplitudes(alpha, dim)


def squeezed_vacuum(r: float, dim: int | None = None) -> np.ndarray:
    """Squeezed vacuum with squeezing argument ``r`` (``nbar = sinh(r)**2``).

    Even amplitudes ``(sech r)^(1/2) (-tanh r)^m sqrt((2m)!) / (2^m m!)``,
    odd amplitudes exactly zero.
    """
    dim = _check_dim(dim, leakage_dim(ProbeSpec.squeezed(r=r)), f"squeezed r={r}")
    return _squeezed_amplitudes(float(r), dim)


def fock_state(n: int, dim: int | None = None) -> np.ndarray:
    if dim is not None and n >= dim:
        raise TruncationError(f"Fock index {n} does not fit in dim={dim}")
    dim = _check_dim(dim, n + 1, f"Fock n={n}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def qutrit_theta(nbar: float, phi: float) -> float:
    arg = 2.0 * nbar / (3.0 + math.cos(2.0 * phi))
    if nbar < 0 or arg > 1.0:
        raise ValueError(f"no qutrit with nbar={nbar} at phi={phi}: arcsin argument {arg:.6g} outside [0, 1]")
    return math.asin(math.sqrt(arg))


def qutrit_state(nbar: float, phi: float, mu: float = math.pi, nu: float = math.pi,
                 dim: int | None = None) -> np.ndarray:
    """``cos(theta)|0> + e^{i mu} sin(theta) sin(phi)|1> + e^{i nu} sin(theta) cos(phi)|2>``
    with ``theta`` fixed by the mean energy ``nbar``."""
    dim = _check_dim(dim, 3, "qutrit")
    theta = qutrit_theta(nbar, phi)
    psi = np.zeros(dim, dtype=complex)
    psi[0] = math.cos(theta)
    psi[1] = np.exp(1j * mu) * math.sin(theta) * math.sin(phi)
    psi[2] = np.exp(1j * nu) * math.sin(theta) * math.cos(phi)
    return psi


def mean_photon_number(state: np.ndarray) -> float:
    state = np.asarray(state)
    n = np.arange(state.shape[0])
    if state.ndim == 1:
        return float(np.sum(n * np.abs(state) ** 2))
    return float(np.sum(n * np.diagonal(state).real))


def leakage(psi: np.ndarray) -> float:
    return max(0.0, 1.0 - float(np.sum(np.abs(psi) ** 2)))


def _baseline_qfi(probe: ProbeSpec, tau: float = 1.0) -> float | None:
    from kerrloss import metrology

    if probe.kind == "coherent":
        return metrology.qfi_coherent_analytic(probe.nbar, 1.0, tau)
    if probe.kind == "squeezed":
        return metrology.qfi_squeezed_analytic(probe.nbar, 1.0, tau)
    if probe.kind == "fock":
        return metrology.qfi_fock_analytic(probe.nbar, 1.0, tau)
    return None


@lru_cache(maxsize=512)
def required_dim(probe: ProbeSpec, cap: int = DEFAULT_DIM_CAP, step: int = 2) -> int:
    """Truncation for ``probe``: the leakage policy, then enlarged until the
    linear-channel QFI at ``gamma = t = 1`` matches its closed form to 1e-5
    relative. Qutrits live in three levels and skip the second test."""
    from kerrloss import metrology
    from kerrloss.channel import ChannelParams

    dim = leakage_dim(probe)
    if dim > cap:
        raise TruncationError(
            f"{probe.describe()} needs dim={dim} > cap {cap} for leakage alone; lower nbar or raise the cap")
    target = _baseline_qfi(probe)
    if target is None or target == 0.0:
        return dim
    params = ChannelParams(gamma=1.0, kerr=0.0, t=1.0)
    while dim <= cap:
        value = metrology.qfi_numeric(probe, params, dim=dim).value
        if abs(value - target) <= QFI_MATCH_RTOL * target:
            return dim
        dim += step
    raise TruncationError(
        f"{probe.describe()}: QFI at lambda=0 does not reach 1e-5 relative accuracy below dim cap {cap}; lower nbar")
