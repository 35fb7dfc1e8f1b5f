"""Numerical kernels: Hermitian eigensolvers, adaptive Runge-Kutta, oscillator
wavefunctions, finite differences, scalar maximization and quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

__all__ = [
    "EigenSystem",
    "IntegrationError",
    "eig_hermitian",
    "householder_tridiagonalize",
    "tridiagonal_ql",
    "integrate_ode",
    "oscillator_wavefunction",
    "oscillator_table",
    "central_difference",
    "maximize_scalar",
    "maximize_scalar_many",
    "trapezoid",
]

HERMITIAN_ATOL = 1e-12


class IntegrationError(RuntimeError):
    """Raised when the adaptive integrator cannot make progress."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(message)
        self.t_reached = t_reached


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def max_asymmetry(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def check_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    asym = max_asymmetry(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not np.isfinite(asym) or asym > atol * scale:
        raise ValueError(f"matrix is not Hermitian: max |M - M^H| = {asym:.3e}")
    return m


def householder_tridiagonalize(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce a Hermitian matrix to real symmetric tridiagonal form.

    Returns ``(d, e, q)`` with ``q^H m q = tridiag(e, d, e)``, ``d`` the
    diagonal and ``e[k]`` the (real, non-negative) coupling between rows
    ``k`` and ``k + 1``. The complex phases of the Householder result are
    absorbed into ``q``.
    """
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = a[k + 1 :, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * norm_x
        v /= np.linalg.norm(v)
        # a <- P a P with P = I - 2 v v^H acting on rows/cols k+1:
        sub = a[k + 1 :, k:]
        sub -= 2.0 * np.outer(v, v.conj() @ sub)
        sub = a[k:, k + 1 :]
        sub -= 2.0 * np.outer(sub @ v, v.conj())
        qs = q[:, k + 1 :]
        qs -= 2.0 * np.outer(qs @ v, v.conj())
    d = a.diagonal().real.copy()
    off = np.array([a[k + 1, k] for k in range(n - 1)], dtype=complex)
    # unitary diagonal rescaling makes the couplings real and non-negative
    phases = np.ones(n, dtype=complex)
    for k, c in enumerate(off):
        phases[k + 1] = phases[k] * (c / abs(c) if c != 0 else 1.0)
    e = np.zeros(n)
    e[: n - 1] = np.abs(off)
    return d, e, q * phases


def tridiagonal_ql(d: np.ndarray, e: np.ndarray, z: np.ndarray | None = None, max_iter: int = 60):
    """Implicit-shift QL on a real symmetric tridiagonal matrix.

    ``e[k]`` couples rows ``k`` and ``k + 1``; ``e[-1]`` is ignored. When
    ``z`` is given its columns are rotated along with the iteration, so
    passing the tridiagonalizing transform yields eigenvectors of the
    original matrix. Results are unsorted.
    """
    d = np.array(d, dtype=float)
    n = d.size
    e = np.array(e, dtype=float)
    e = np.resize(e, n)
    e[n - 1] = 0.0
    eps = np.finfo(float).eps
    if z is not None:
        z = np.array(z)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise np.linalg.LinAlgError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    zi = z[:, i].copy()
                    z[:, i] = c * zi - s * z[:, i + 1]
                    z[:, i + 1] = s * zi + c * z[:, i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def eig_hermitian(m: np.ndarray, method: str = "lapack", atol: float = HERMITIAN_ATOL) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues.

    ``method="lapack"`` calls ``numpy.linalg.eigh``; ``method="ql"`` runs the
    in-package Householder reduction followed by implicit-shift QL. Both
    reject inputs whose asymmetry exceeds ``atol * max(1, max|m|)``.
    """
    m = check_hermitian(m, atol)
    m = 0.5 * (m + m.conj().T)
    if method == "lapack":
        w, v = np.linalg.eigh(m)
    elif method == "ql":
        d, e, q = householder_tridiagonalize(m)
        w, v = tridiagonal_ql(d, e, q)
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[:, order]
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    return EigenSystem(w, v)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_end: float,
    tol: float = 1e-10,
    h0: float | None = None,
    max_steps: int = 1_000_000,
    t_eval=None,
) -> np.ndarray:
    """Integrate ``dy/dt = rhs(t, y)`` from 0 to ``t_end`` with adaptive
    Dormand-Prince 5(4) steps.

    ``y`` may be an array of any shape (complex allowed). The local error of
    every accepted step satisfies ``|err| <= tol * (1 + max(|y|, |y_new|))``
    elementwise. Raises :class:`IntegrationError` when the step drops below
    1e-14.

    With ``t_eval`` (non-decreasing times in [0, t_end]) the steps are
    clipped to land exactly on each requested time and the stacked states
    ``(len(t_eval),) + y.shape`` are returned instead of the endpoint.
    """
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    if t_eval is None:
        targets = np.array([t_end], dtype=float)
    else:
        targets = np.asarray(t_eval, dtype=float).reshape(-1)
        if np.any(np.diff(targets) < 0) or np.any(targets < 0) or np.any(targets > t_end):
            raise ValueError("t_eval must be non-decreasing and lie in [0, t_end]")
    out = []
    ti = 0
    t = 0.0
    while ti < len(targets) and targets[ti] <= t:
        out.append(y.copy())
        ti += 1
    if ti < len(targets):
        k1 = np.asarray(rhs(t, y))
        if h0 is None:
            scale = tol * (1.0 + np.abs(y))
            d0 = np.sqrt(np.mean((np.abs(y) / scale) ** 2))
            d1 = np.sqrt(np.mean((np.abs(k1) / scale) ** 2))
            h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h0, targets[-1])
    steps = 0
    ks = [None] * 7
    while ti < len(targets):
        if steps >= max_steps:
            raise IntegrationError(f"maximum number of steps exceeded at t={t:.6g}", t)
        if h < 1e-14:
            raise IntegrationError(f"step size underflow at t={t:.6g}", t)
        target = targets[ti]
        hit = t + h >= target
        hs = target - t if hit else h
        ks[0] = k1
        for i in range(1, 7):
            acc = y.copy()
            for a, k in zip(_A[i], ks[:i]):
                if a != 0.0:
                    acc += (hs * a) * k
            ks[i] = np.asarray(rhs(t + _C[i] * hs, acc))
        # the last stage is evaluated at the 5th order solution (FSAL)
        y_new = acc
        err = (hs * _E[0]) * ks[0]
        for c, k in zip(_E[1:], ks[1:]):
            if c != 0.0:
                err += (hs * c) * k
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        ratio = float(np.max(np.abs(err) / scale))
        steps += 1
        if ratio <= 1.0:
            t = target if hit else t + hs
            y = y_new
            k1 = ks[6]
            factor = 5.0 if ratio == 0.0 else min(5.0, 0.9 * ratio ** -0.2)
            # a clipped step says little about the natural step size
            h = max(h, hs * factor) if hit else hs * factor
            while ti < len(targets) and targets[ti] <= t:
                out.append(y.copy())
                ti += 1
        else:
            h = hs * max(0.2, 0.9 * ratio ** -0.2)
    if t_eval is None:
        return out[0]
    return np.stack(out) if out else np.empty((0,) + y.shape, dtype=y.dtype)


def oscillator_table(n_max: int, x) -> np.ndarray:
    """Rows ``psi_0(x) ... psi_{n_max}(x)`` of normalized oscillator
    eigenfunctions for ``x = (a + a^dag)/sqrt(2)``.

    Built with the upward recurrence
    ``psi_{n+1} = x sqrt(2/(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1}``.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = x * math.sqrt(2.0 / (n + 1)) * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def oscillator_wavefunction(n: int, x):
    """Position wavefunction of the Fock state ``|n>`` (vacuum density
    ``exp(-x^2)/sqrt(pi)``)."""
    if not 0 <= n < 1000:
        raise ValueError("n must satisfy 0 <= n < 1000")
    return oscillator_table(n, x)[n]


def central_difference(f: Callable, x0: float, h: float):
    if h <= 0:
        raise ValueError("h must be positive")
    return (np.asarray(f(x0 + h)) - np.asarray(f(x0 - h))) / (2.0 * h)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def maximize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-6,
    n_grid: int = 201,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Grid scan followed by golden-section refinement.

    The grid fixes which local maximum is refined; golden section then
    shrinks the bracket around the best grid point to width ``tol``. With
    ``vectorized=True``, ``f`` maps an array of abscissae to an array of
    values and the whole grid is evaluated in one call.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    n_grid = max(int(n_grid), 200)
    xs = np.linspace(lo, hi, n_grid)
    if vectorized:
        values = np.asarray(f(xs), dtype=float)
        f_vec = f
        f = lambda x: float(f_vec(np.array([x]))[0])  # noqa: E731
    else:
        values = np.array([f(x) for x in xs], dtype=float)
    i = int(np.nanargmax(values))
    best_x, best_f = float(xs[i]), float(values[i])
    a = float(xs[max(i - 1, 0)])
    b = float(xs[min(i + 1, n_grid - 1)])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x_ref, f_ref = (c, fc) if fc >= fd else (d, fd)
    if f_ref >= best_f:
        return float(x_ref), float(f_ref)
    return best_x, best_f


def maximize_scalar_many(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    count: int,
    tol: float = 1e-6,
    n_grid: int = 201,
) -> tuple[np.ndarray, np.ndarray]:
    """:func:`maximize_scalar` for ``count`` independent functions at once.

    ``f`` receives an array of shape ``(count, k)`` (row ``i`` holds points
    for function ``i``) and returns values of the same shape.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    n_grid = max(int(n_grid), 200)
    xs = np.linspace(lo, hi, n_grid)
    values = np.asarray(f(np.broadcast_to(xs, (count, n_grid)).copy()), dtype=float)
    idx = np.nanargmax(values, axis=1)
    rows = np.arange(count)
    best_x, best_f = xs[idx], values[rows, idx]
    a = xs[np.maximum(idx - 1, 0)]
    b = xs[np.minimum(idx + 1, n_grid - 1)]
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fcd = np.asarray(f(np.stack([c, d], axis=1)), dtype=float)
    fc, fd = fcd[:, 0], fcd[:, 1]
    while np.max(b - a) > tol:
        left = fc >= fd
        # left: keep [a, d]; right: keep [c, b]
        new_a = np.where(left, a, c)
        new_b = np.where(left, d, b)
        keep_x = np.where(left, c, d)
        keep_f = np.where(left, fc, fd)
        probe = np.where(left, new_b - _INVPHI * (new_b - new_a), new_a + _INVPHI * (new_b - new_a))
        fp = np.asarray(f(probe[:, None]), dtype=float)[:, 0]
        c = np.where(left, probe, keep_x)
        fc = np.where(left, fp, keep_f)
        d = np.where(left, keep_x, probe)
        fd = np.where(left, keep_f, fp)
        a, b = new_a, new_b
    use_c = fc >= fd
    x_ref = np.where(use_c, c, d)
    f_ref = np.where(use_c, fc, fd)
    better = f_ref >= best_f
    return np.where(better, x_ref, best_x), np.where(better, f_ref, best_f)
