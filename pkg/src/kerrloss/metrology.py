"""Quantum and classical Fisher information for the loss rate ``gamma``.

Derivatives with respect to ``gamma`` are taken along the physical curve:
the Kerr coupling and the interaction time stay fixed, so a relative step
``gamma -> gamma (1 +- d)`` moves the rescaled parameters to
``tau (1 +- d)`` and ``lam / (1 +- d)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from kerrloss.channel import ChannelParams, evolve_batch, evolve_coherent_exact, evolve_trajectory
from kerrloss.numerics import (
    check_hermitian,
    eig_hermitian,
    maximize_scalar,
    oscillator_table,
    trapezoid,
)
from kerrloss.states import ProbeSpec, required_dim

__all__ = [
    "QFIResult",
    "MeasurementFI",
    "derivative_step",
    "rho_and_dgamma",
    "dgamma_rho",
    "qfi_mixed",
    "qfi_pure",
    "qfi_numeric",
    "qfi_curve",
    "qfi_curve_many",
    "qfi_coherent_analytic",
    "qfi_squeezed_analytic",
    "qfi_fock_analytic",
    "qfi_pure_approx_analytic",
    "gain_pure_approx",
    "optimal_time_pure_approx",
    "optimal_gain_pure_approx",
    "fi_photon_counting",
    "homodyne_distribution",
    "HomodyneModel",
    "fi_quadrature",
    "optimize_quadrature_phase",
]

PAIR_CUTOFF = 1e-12
# the gamma difference quotient divides integration error by ~1e-5, and late-time
# eigenvalues are tiny, so QFI work integrates more tightly than plain evolution
QFI_TOL = 1e-12
POPULATION_CUTOFF = 1e-14
DENSITY_CUTOFF = 1e-12
QUADRATURE_MIN_POINTS = 4001


@dataclass(frozen=True)
class QFIResult:
    value: float
    qsnr: float
    method: str
    dim: int
    h: float | None = None


@dataclass(frozen=True)
class MeasurementFI:
    kind: str
    value: float
    phase: float | None = None
    converged: bool = True


def derivative_step(gamma: float) -> float:
    """Absolute finite-difference step in ``gamma``."""
    return 1e-5 * max(1.0, gamma)


def _scaled_points(params: ChannelParams, h: float, taus=None):
    """(lam, tau) arrays at gamma (1 - d), gamma, gamma (1 + d) for each tau."""
    d = h / params.gamma
    factors = np.array([1.0 - d, 1.0, 1.0 + d])
    taus = np.atleast_1d(params.tau if taus is None else np.asarray(taus, dtype=float))
    lam = params.lam
    return (lam / factors)[None, :] * np.ones_like(taus)[:, None], taus[:, None] * factors[None, :], d


def _is_grid(taus: np.ndarray) -> bool:
    # many ordered times are cheaper along one trajectory
    return taus.size > 2 and bool(np.all(np.diff(taus) >= 0))


def rho_and_dgamma(probe: ProbeSpec, params: ChannelParams, h: float | None = None,
                   dim: int | None = None, tol: float = QFI_TOL, taus=None):
    """Output state and its ``gamma`` derivative, optionally for a whole
    array of rescaled times at fixed ``lam`` (``taus``)."""
    dim = required_dim(probe) if dim is None else dim
    h = derivative_step(params.gamma) if h is None else h
    lams, tau_pts, d = _scaled_points(params, h, taus)
    if probe.kind == "coherent":
        stack = evolve_coherent_exact(probe.alpha, lams, tau_pts, dim)
    elif _is_grid(tau_pts[:, 1]):
        stack = evolve_trajectory(probe.state(dim), params.lam, tau_pts[:, 1], [1.0 - d, 1.0, 1.0 + d], tol)
    else:
        stack = evolve_batch(probe.state(dim), lams, tau_pts, tol)
    rho = stack[:, 1]
    drho = (stack[:, 2] - stack[:, 0]) / (2.0 * d * params.gamma)
    if taus is None:
        return rho[0], drho[0]
    return rho, drho


def dgamma_rho(probe: ProbeSpec, params: ChannelParams, h: float | None = None,
               dim: int | None = None, tol: float = QFI_TOL) -> np.ndarray:
    """Central difference of the output state in ``gamma`` at fixed Kerr
    coupling and interaction time."""
    return rho_and_dgamma(probe, params, h, dim, tol)[1]


def _qfi_from_eigen(w: np.ndarray, v: np.ndarray, drho: np.ndarray, cutoff: float) -> np.ndarray:
    m = np.swapaxes(v, -1, -2).conj() @ drho @ v
    s = w[..., :, None] + w[..., None, :]
    keep = s > cutoff
    terms = np.where(keep, np.abs(m) ** 2 / np.where(keep, s, 1.0), 0.0)
    return 2.0 * terms.sum(axis=(-1, -2))


def qfi_mixed(rho: np.ndarray, drho: np.ndarray, cutoff: float = PAIR_CUTOFF,
              method: str = "lapack") -> float:
    """``2 sum_{n,m} |<psi_m|drho|psi_n>|^2 / (p_n + p_m)`` over pairs with
    ``p_n + p_m > cutoff``."""
    check_hermitian(drho, atol=1e-10)
    es = eig_hermitian(rho, method=method)
    return float(_qfi_from_eigen(es.eigenvalues, es.eigenvectors, 0.5 * (drho + drho.conj().T), cutoff))


def qfi_pure(psi: np.ndarray, dpsi: np.ndarray) -> float:
    """Pure-state QFI, ``4[<dpsi|dpsi> + <dpsi|psi>^2 + <psi|dpsi>^2 + |<dpsi|psi>|^2]``.

    Cross-checked against ``4(<dpsi|dpsi> - |<psi|dpsi>|^2)``; the two agree
    whenever ``<psi|dpsi>`` is imaginary, i.e. for normalized families.
    """
    psi = np.asarray(psi)
    dpsi = np.asarray(dpsi)
    dd = np.vdot(dpsi, dpsi)
    bra_d = np.vdot(dpsi, psi)
    ket_d = np.vdot(psi, dpsi)
    value = 4.0 * (dd + bra_d ** 2 + ket_d ** 2 + abs(bra_d) ** 2)
    scale = max(1.0, abs(value))
    if abs(value.imag) > 1e-10 * scale:
        raise ValueError(f"pure-state QFI is not real: imaginary part {value.imag:.3e}")
    reference = 4.0 * (dd.real - abs(ket_d) ** 2)
    if abs(value.real - reference) > 1e-8 * scale:
        warnings.warn(
            f"pure-state QFI forms disagree ({value.real:.12g} vs {reference:.12g}); "
            "is the state family normalized?", RuntimeWarning, stacklevel=2)
    return float(value.real)


def qfi_numeric(probe: ProbeSpec, params: ChannelParams, dim: int | None = None,
                h: float | None = None, tol: float = QFI_TOL, method: str = "lapack") -> QFIResult:
    """QFI from diagonalizing the truncated output state."""
    dim = required_dim(probe) if dim is None else dim
    h = derivative_step(params.gamma) if h is None else h
    rho, drho = rho_and_dgamma(probe, params, h, dim, tol)
    value = max(qfi_mixed(rho, drho, method=method), 0.0)
    return QFIResult(value, params.gamma ** 2 * value, "eigen-numeric", dim, h)


def qfi_curve(probe: ProbeSpec, lam: float, taus, gamma: float = 1.0, dim: int | None = None,
              tol: float = QFI_TOL) -> np.ndarray:
    """QFI at fixed rescaled Kerr strength ``lam`` for each rescaled time in
    ``taus`` (vectorized over time)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    params = ChannelParams.rescaled(float(taus[0]), lam, gamma)
    rho, drho = rho_and_dgamma(probe, params, dim=dim, tol=tol, taus=taus)
    w, v = np.linalg.eigh(rho)
    return np.maximum(_qfi_from_eigen(w, v, drho, PAIR_CUTOFF), 0.0)


def qfi_curve_many(states: np.ndarray, lam: float, taus: np.ndarray, gamma: float = 1.0,
                   tol: float = QFI_TOL) -> np.ndarray:
    """:func:`qfi_curve` for a stack of initial states ``(B, dim)`` with
    per-state times ``taus`` of shape ``(B, k)``; all evolved in one batch."""
    states = np.asarray(states, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    d = derivative_step(gamma) / gamma
    factors = np.array([1.0 - d, 1.0, 1.0 + d])
    if _is_grid(taus[0]) and np.all(taus == taus[0]):
        stack = evolve_trajectory(states, lam, taus[0], factors, tol)
    else:
        lams = np.broadcast_to(lam / factors, taus.shape + (3,))
        stack = evolve_batch(states, lams, taus[..., None] * factors, tol)
    rho = stack[..., 1, :, :]
    drho = (stack[..., 2, :, :] - stack[..., 0, :, :]) / (2.0 * d * gamma)
    w, v = np.linalg.eigh(rho)
    return np.maximum(_qfi_from_eigen(w, v, drho, PAIR_CUTOFF), 0.0)


def qfi_coherent_analytic(nbar: float, gamma: float, tau: float) -> float:
    return nbar / gamma ** 2 * tau ** 2 * math.exp(-tau)


def qfi_squeezed_analytic(nbar: float, gamma: float, tau: float) -> float:
    if tau == 0:
        return 0.0
    em1 = math.expm1(tau)
    # e^{2t} - 2e^t + 2 = (e^t - 1)^2 + 1 ;  2 nbar (e^t - 1) + e^{2t}
    return (em1 ** 2 + 1.0) * tau ** 2 * nbar / (gamma ** 2 * em1 * (2.0 * nbar * em1 + math.exp(2 * tau)))


def qfi_fock_analytic(nbar: float, gamma: float, tau: float) -> float:
    if tau == 0:
        return 0.0
    return nbar * tau ** 2 / (gamma ** 2 * math.expm1(tau))


def qfi_pure_approx_analytic(alpha: complex, lam: float, gamma: float, tau: float) -> float:
    n2 = abs(alpha) ** 2
    return n2 / gamma ** 2 * tau ** 2 * math.exp(-tau) * (1.0 + 4.0 * lam ** 2 * tau ** 2 * n2 ** 2)


def gain_pure_approx(alpha: complex, lam: float, tau: float) -> float:
    return 4.0 * lam ** 2 * tau ** 2 * abs(alpha) ** 4


def optimal_time_pure_approx(alpha: complex, lam: float) -> float:
    return 2.0 + 32.0 * lam ** 2 * abs(alpha) ** 4


def optimal_gain_pure_approx(alpha: complex, lam: float) -> float:
    return 16.0 * lam ** 2 * abs(alpha) ** 4


def fi_photon_counting(probe: ProbeSpec, params: ChannelParams, dim: int | None = None,
                       tol: float = QFI_TOL) -> MeasurementFI:
    rho, drho = rho_and_dgamma(probe, params, dim=dim, tol=tol)
    pops = np.diagonal(rho).real
    dpops = np.diagonal(drho).real
    keep = pops > POPULATION_CUTOFF
    return MeasurementFI("photon-counting", float(np.sum(dpops[keep] ** 2 / pops[keep])))


def quadrature_grid(dim: int, n_points: int | None = None) -> np.ndarray:
    half_width = 6.0 + math.sqrt(2.0 * dim)
    return np.linspace(-half_width, half_width, max(n_points or 0, QUADRATURE_MIN_POINTS))


class HomodyneModel:
    """Quadrature statistics of one density matrix on a fixed grid.

    The phase enters only through ``exp(-i k phase)`` on the ``k``-th band of
    the matrix, so band sums are formed once and every phase costs
    ``O(dim * len(x))``.
    """

    def __init__(self, rho: np.ndarray, x: np.ndarray, table: np.ndarray | None = None):
        rho = np.asarray(rho)
        self.x = np.asarray(x, dtype=float)
        dim = rho.shape[0]
        psi = oscillator_table(dim - 1, self.x) if table is None else table[:dim]
        self.bands = np.array([
            np.einsum("q,qx,qx->x", np.diagonal(rho, -k), psi[k:], psi[: dim - k]) for k in range(dim)
        ])
        self._k = np.arange(dim)

    def density(self, phase: float) -> np.ndarray:
        weights = np.exp(-1j * self._k * phase)
        weights[1:] *= 2.0
        return (weights @ self.bands).real


def homodyne_distribution(rho: np.ndarray, phase: float, x) -> np.ndarray | float:
    """Density of the rotated quadrature outcome ``x``.

    ``p(x) = sum_{p,q} exp(i (q - p) phase) rho_pq psi_p(x) psi_q(x)``.
    """
    scalar = np.ndim(x) == 0
    model = HomodyneModel(rho, np.atleast_1d(x))
    p = model.density(phase)
    if p.min() < -1e-10:
        warnings.warn(f"negative quadrature density {p.min():.3e}; truncation or grid is inconsistent",
                      RuntimeWarning, stacklevel=2)
    return float(p[0]) if scalar else p


def _quadrature_fi(model: HomodyneModel, dmodel: HomodyneModel, phase: float) -> float:
    p = model.density(phase)
    dp = dmodel.density(phase)
    keep = p >= DENSITY_CUTOFF
    integrand = np.where(keep, dp ** 2 / np.where(keep, p, 1.0), 0.0)
    return float(trapezoid(integrand, model.x))


def _quadrature_models(probe, params, dim, tol, n_points):
    dim = required_dim(probe) if dim is None else dim
    rho, drho = rho_and_dgamma(probe, params, dim=dim, tol=tol)
    x = quadrature_grid(dim, n_points)
    table = oscillator_table(dim - 1, x)
    return rho, drho, HomodyneModel(rho, x, table), HomodyneModel(drho, x, table), dim


def _converged_fi(rho, drho, phase, value, n_points) -> bool:
    x = quadrature_grid(rho.shape[0], 2 * len(quadrature_grid(rho.shape[0], n_points)) - 1)
    table = oscillator_table(rho.shape[0] - 1, x)
    fine, dfine = HomodyneModel(rho, x, table), HomodyneModel(drho, x, table)
    refined = _quadrature_fi(fine, dfine, phase)
    ok = abs(refined - value) <= 1e-4 * max(abs(refined), 1e-300)
    if not ok:
        warnings.warn(f"quadrature FI not converged on grid doubling: {value:.10g} vs {refined:.10g}",
                      RuntimeWarning, stacklevel=3)
    return ok


def fi_quadrature(probe: ProbeSpec, params: ChannelParams, phase: float = 0.0, dim: int | None = None,
                  tol: float = QFI_TOL, n_points: int | None = None, check: bool = True) -> MeasurementFI:
    """Classical FI of a homodyne measurement of the quadrature at ``phase``."""
    rho, drho, model, dmodel, _ = _quadrature_models(probe, params, dim, tol, n_points)
    value = _quadrature_fi(model, dmodel, phase)
    converged = _converged_fi(rho, drho, phase, value, n_points) if check else True
    return MeasurementFI("quadrature", value, phase, converged)


def optimize_quadrature_phase(probe: ProbeSpec, params: ChannelParams, dim: int | None = None,
                              tol: float = QFI_TOL, n_points: int | None = None,
                              check: bool = True) -> tuple[float, float]:
    """Best quadrature phase in ``[0, pi)`` and the FI it achieves."""
    rho, drho, model, dmodel, _ = _quadrature_models(probe, params, dim, tol, n_points)
    phase, value = maximize_scalar(lambda ph: _quadrature_fi(model, dmodel, ph), 0.0, math.pi, tol=1e-7)
    phase = phase % math.pi
    if check:
        _converged_fi(rho, drho, phase, value, n_points)
    return phase, value
