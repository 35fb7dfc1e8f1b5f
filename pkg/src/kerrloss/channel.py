"""Propagation through the lossy channel with self-Kerr interaction.

In rescaled units (``tau = gamma t``, ``lam = kerr / gamma``) the matrix
elements obey

    d rho_pq / d tau = -[i lam (p^2 - q^2) + (p + q)/2] rho_pq
                       + sqrt((p + 1)(q + 1)) rho_{p+1, q+1}

Coherent inputs have a closed form; every other input is integrated with the
adaptive Runge-Kutta kernel. Loss only moves population downwards, so the
in-flow term is simply absent on the last row/column of the truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from kerrloss.numerics import integrate_ode
from kerrloss.states import ProbeSpec, required_dim

__all__ = [
    "ChannelParams",
    "evolve_coherent_exact",
    "lindblad_rhs",
    "evolve_ode",
    "evolve_batch",
    "evolve_trajectory",
    "evolve",
    "pure_state_approx",
    "fidelity",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel parameters: loss rate ``gamma``, Kerr coupling
    ``kerr`` and interaction time ``t``."""

    gamma: float
    kerr: float
    t: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kerr < 0:
            raise ValueError("Kerr coupling must be non-negative")
        if self.t < 0:
            raise ValueError("interaction time must be non-negative")

    @classmethod
    def rescaled(cls, tau: float, lam: float, gamma: float = 1.0) -> "ChannelParams":
        return cls(gamma=gamma, kerr=lam * gamma, t=tau / gamma)

    @property
    def tau(self) -> float:
        return self.gamma * self.t

    @property
    def lam(self) -> float:
        return self.kerr / self.gamma


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + np.swapaxes(rho, -1, -2).conj())


def evolve_coherent_exact(alpha: complex, lam, tau, dim: int) -> np.ndarray:
    """Closed-form density matrix for a coherent input ``|alpha>``.

    ``lam`` and ``tau`` may be arrays of a common shape ``S``; the result then
    has shape ``S + (dim, dim)``.
    """
    lam = np.asarray(lam, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    lam, tau = np.broadcast_arrays(lam, tau)
    lam = lam[..., None, None]
    tau = tau[..., None, None]
    alpha = complex(alpha)
    n = np.arange(dim)
    p, q = n[:, None], n[None, :]
    if alpha == 0:
        out = np.zeros(lam.shape[:-2] + (dim, dim), dtype=complex)
        out[..., 0, 0] = 1.0
        return out
    n2 = abs(alpha) ** 2
    delta = 1.0 + 2j * lam * (p - q)
    log_prefactor = (p + q) * np.log(abs(alpha)) - 0.5 * (gammaln(p + 1) + gammaln(q + 1))
    phase = np.angle(alpha) * (p - q)
    # (1 - exp(-delta tau)) / delta, written with expm1 for small tau
    ratio = -np.expm1(-delta * tau) / delta
    exponent = log_prefactor + 1j * phase - 0.5 * (p + q) * delta * tau - n2 * (1.0 - ratio)
    return _hermitize(np.exp(exponent))


def lindblad_rhs(rho: np.ndarray, lam: float) -> np.ndarray:
    """Right-hand side of the rescaled master equation in the Fock basis."""
    rho = np.asarray(rho)
    dim = rho.shape[-1]
    n = np.arange(dim)
    p, q = n[:, None], n[None, :]
    out = -(1j * lam * (p * p - q * q) + 0.5 * (p + q)) * rho
    coupling = np.sqrt((n[1:, None]) * (n[None, 1:]))
    out[..., :-1, :-1] += coupling * rho[..., 1:, 1:]
    return out


def evolve_batch(psi0: np.ndarray, lams, taus, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Evolve one initial state to several ``(lam, tau)`` points at once.

    All points are integrated together over the normalized time ``s`` in
    [0, 1] (``tau' = s tau``), so they share one step sequence. Nearby
    points therefore carry smoothly varying integration error, which keeps
    finite differences across the batch clean. The Kerr phase
    ``exp(-i lam (p^2 - q^2) tau)`` is factored out analytically; only the
    slower ``exp(-2 i lam (p - q) tau)`` modulation of the in-flow term is
    integrated.

    ``psi0`` may also be a stack ``(B, dim)`` of initial states; ``lams`` and
    ``taus`` then need a leading axis of length ``B``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    lams, taus = np.broadcast_arrays(np.asarray(lams, dtype=float), np.asarray(taus, dtype=float))
    if np.any(taus < 0):
        raise ValueError("tau must be non-negative")
    dim = psi0.shape[-1]
    rho0 = psi0[..., :, None] * psi0[..., None, :].conj()
    if psi0.ndim == 1:
        shape = lams.shape
        rho0 = np.broadcast_to(rho0, shape + (dim, dim))
    else:
        if lams.ndim == 0 or lams.shape[0] != psi0.shape[0]:
            raise ValueError("stacked initial states need lams/taus with a matching leading axis")
        shape = lams.shape
        rho0 = np.broadcast_to(rho0.reshape((psi0.shape[0],) + (1,) * (lams.ndim - 1) + (dim, dim)),
                               shape + (dim, dim))
    rho0 = rho0.reshape(-1, dim, dim)
    lam_f = lams.reshape(-1)[:, None, None]
    tau_f = taus.reshape(-1)[:, None, None]
    n = np.arange(dim)
    p, q = n[:, None], n[None, :]
    decay = -0.5 * (p + q) * tau_f
    coupling = np.sqrt(n[1:, None] * n[None, 1:]) * tau_f
    drift = -2.0 * lam_f * (p - q)[:-1, :-1] * tau_f

    def rhs(s, sigma):
        out = decay * sigma
        out[:, :-1, :-1] += coupling * np.exp(1j * drift * s) * sigma[:, 1:, 1:]
        return out

    if dim > 1 and np.any(tau_f > 0):
        sigma = integrate_ode(rhs, rho0, 1.0, tol)
    else:
        sigma = rho0.copy()
    rho = np.exp(-1j * lam_f * (p * p - q * q) * tau_f) * sigma
    return _hermitize(rho).reshape(shape + (dim, dim))


def evolve_trajectory(psi0: np.ndarray, lam: float, taus, scales=(1.0,),
                      tol: float = DEFAULT_TOL) -> np.ndarray:
    """States along one trajectory, read off at every time in ``taus``.

    For each factor ``c`` in ``scales`` the point ``(lam / c, c tau)`` is
    returned, i.e. the loss rate is rescaled by ``c`` at fixed Kerr coupling
    and interaction time. All factors and all initial states are integrated
    together in ``s = tau`` with steps clipped onto the output times, so
    the whole set shares one step sequence.

    ``psi0`` of shape ``(dim,)`` gives ``(k, m, dim, dim)``; a stack
    ``(B, dim)`` gives ``(B, k, m, dim, dim)``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    scales = np.atleast_1d(np.asarray(scales, dtype=float))
    if np.any(taus < 0) or np.any(np.diff(taus) < 0):
        raise ValueError("taus must be non-negative and non-decreasing")
    if np.any(scales <= 0):
        raise ValueError("scales must be positive")
    single = psi0.ndim == 1
    states = psi0[None] if single else psi0
    b, dim = states.shape
    m = scales.size
    rho0 = states[:, :, None] * states[:, None, :].conj()
    rho0 = np.repeat(rho0[:, None], m, axis=1).reshape(b * m, dim, dim)
    c = np.tile(scales, b)[:, None, None]
    n = np.arange(dim)
    p, q = n[:, None], n[None, :]
    decay = -0.5 * (p + q) * c
    coupling = np.sqrt(n[1:, None] * n[None, 1:]) * c
    # lam_j c_j = lam for every slice, so the Kerr terms are shared
    drift = -2.0 * lam * (p - q)[:-1, :-1]

    def rhs(s, sigma):
        out = decay * sigma
        out[:, :-1, :-1] += coupling * np.exp(1j * drift * s) * sigma[:, 1:, 1:]
        return out

    if dim > 1 and taus[-1] > 0:
        sigma = integrate_ode(rhs, rho0, float(taus[-1]), tol, t_eval=taus)
    else:
        sigma = np.broadcast_to(rho0, (taus.size,) + rho0.shape)
    rho = np.exp(-1j * lam * (p * p - q * q) * taus[:, None, None, None]) * sigma
    rho = _hermitize(rho).reshape(taus.size, b, m, dim, dim)
    rho = np.moveaxis(rho, 0, 1)
    return rho[0] if single else rho


def evolve_ode(psi0: np.ndarray, lam: float, tau: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Density matrix at rescaled time ``tau`` by numerical integration."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return evolve_batch(psi0, [lam], [tau], tol)[0]


def evolve(probe: ProbeSpec, params: ChannelParams, dim: int | None = None,
           tol: float = DEFAULT_TOL) -> np.ndarray:
    """Output state for ``probe`` through the channel ``params``; coherent
    probes use the closed form, the rest the integrator."""
    dim = required_dim(probe) if dim is None else dim
    if probe.kind == "coherent":
        return evolve_coherent_exact(probe.alpha, params.lam, params.tau, dim)
    return evolve_ode(probe.state(dim), params.lam, params.tau, tol)


def pure_state_approx(alpha: complex, lam: float, tau: float, dim: int) -> np.ndarray:
    """Normalized pure state from the small-``lam`` expansion of the coherent
    solution: amplitudes of ``|alpha e^{-tau/2}>`` with phases
    ``-i lam p^2 tau - i lam |alpha|^2 p tau^2``."""
    alpha = complex(alpha)
    n = np.arange(dim)
    if alpha == 0:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
        return psi
    n2 = abs(alpha) ** 2
    log_amp = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * n * tau - 0.5 * np.exp(-tau) * n2
    phase = n * np.angle(alpha) - lam * n * n * tau - lam * n2 * n * tau * tau
    psi = np.exp(log_amp + 1j * phase)
    return psi / np.linalg.norm(psi)


def fidelity(psi: np.ndarray, rho: np.ndarray) -> float:
    psi = np.asarray(psi)
    rho = np.asarray(rho)
    if rho.shape != (psi.size, psi.size):
        raise ValueError(f"dimension mismatch: state {psi.size}, density matrix {rho.shape}")
    return float(np.real(psi.conj() @ rho @ psi))
