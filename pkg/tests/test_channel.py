import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kerrloss.channel import (
    ChannelParams,
    evolve,
    evolve_batch,
    evolve_coherent_exact,
    evolve_ode,
    evolve_trajectory,
    fidelity,
    lindblad_rhs,
    pure_state_approx,
)
from kerrloss.states import ProbeSpec, coherent_state, fock_state, qutrit_state, required_dim

from conftest import random_density


def test_params_rescaling():
    p = ChannelParams(gamma=2.0, kerr=3.0, t=0.25)
    assert p.tau == 0.5 and p.lam == 1.5
    q = ChannelParams.rescaled(0.5, 1.5, gamma=2.0)
    assert q == p
    for bad in (dict(gamma=0.0, kerr=0, t=1), dict(gamma=1, kerr=-1, t=1), dict(gamma=1, kerr=0, t=-1)):
        with pytest.raises(ValueError):
            ChannelParams(**bad)


# --- closed form -------------------------------------------------------------

def test_exact_tau_zero_is_projector():
    psi = coherent_state(1.0 + 0.5j, 30)
    assert np.abs(evolve_coherent_exact(1.0 + 0.5j, 0.7, 0.0, 30) - np.outer(psi, psi.conj())).max() < 1e-14


def test_exact_lambda_zero_is_damped_coherent():
    rho = evolve_coherent_exact(1.2, 0.0, 0.8, 30)
    psi = coherent_state(1.2 * math.exp(-0.4), 30)
    assert np.abs(rho - np.outer(psi, psi.conj())).max() < 1e-14
    purity = np.trace(rho @ rho).real
    assert abs(purity - 1.0) < 1e-10


def test_exact_diagonal_poisson_independent_of_lambda():
    a = evolve_coherent_exact(1.0, 0.0, 1.3, 25).diagonal().real
    b = evolve_coherent_exact(1.0, 5.0, 1.3, 25).diagonal().real
    mean = math.exp(-1.3)
    pois = np.array([math.exp(-mean) * mean ** k / math.factorial(k) for k in range(25)])
    assert np.abs(a - pois).max() < 1e-15 and np.abs(b - pois).max() < 1e-15


def test_exact_rejects_negative_tau():
    with pytest.raises(ValueError):
        evolve_coherent_exact(1.0, 0.1, -0.1, 10)


def test_exact_vectorized():
    lams = np.array([0.0, 0.5, 2.0])
    stack = evolve_coherent_exact(1.0, lams, 1.0, 20)
    for lam, rho in zip(lams, stack):
        assert np.array_equal(rho, evolve_coherent_exact(1.0, lam, 1.0, 20))


# --- right-hand side -----------------------------------------------------------

def test_rhs_vacuum_stationary():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    assert np.all(lindblad_rhs(rho, 0.8) == 0)


def test_rhs_single_photon_decay():
    rho = np.zeros((3, 3), dtype=complex)
    rho[1, 1] = 1
    d = lindblad_rhs(rho, 0.8)
    assert d[1, 1] == -1 and d[0, 0] == 1 and np.trace(d) == 0


@given(st.integers(2, 20), st.floats(0, 5), st.integers(0, 2**32 - 1))
def test_rhs_traceless(dim, lam, seed):
    rho = random_density(np.random.default_rng(seed), dim)
    assert abs(np.trace(lindblad_rhs(rho, lam))) < 1e-12


def test_rhs_matches_elementwise_formula(rng):
    rho = random_density(rng, 6)
    lam = 0.37
    d = lindblad_rhs(rho, lam)
    for p in range(6):
        for q in range(6):
            ref = -(1j * lam * (p * p - q * q) + 0.5 * (p + q)) * rho[p, q]
            if p + 1 < 6 and q + 1 < 6:
                ref += math.sqrt((1 + p) * (1 + q)) * rho[p + 1, q + 1]
            assert abs(d[p, q] - ref) < 1e-15


# --- numerical evolution -------------------------------------------------------

@pytest.mark.parametrize("alpha, lam, tau", [(1.0, 0.5, 1.0), (1.5 - 0.5j, 2.0, 0.7), (0.5, 3.0, 4.0)])
def test_ode_matches_closed_form(alpha, lam, tau):
    dim = required_dim(ProbeSpec.coherent(alpha))
    rho = evolve_ode(coherent_state(alpha, dim), lam, tau)
    assert np.abs(rho - evolve_coherent_exact(alpha, lam, tau, dim)).max() < 1e-8


def test_ode_fock_kerr_invariant():
    psi = fock_state(3, 4)
    assert np.abs(evolve_ode(psi, 0.0, 1.2) - evolve_ode(psi, 2.5, 1.2)).max() < 1e-12


def test_ode_qutrit_stays_in_three_levels():
    psi = qutrit_state(0.5, 0.4, dim=8)
    for tau in (0.3, 1.0, 5.0):
        rho = evolve_ode(psi, 1.3, tau)
        assert np.abs(rho[3:, :]).max() == 0 and np.abs(rho[:, 3:]).max() == 0


def test_ode_negative_tau():
    with pytest.raises(ValueError):
        evolve_ode(fock_state(1, 2), 0.0, -1.0)


def test_trajectory_matches_pointwise():
    psi = ProbeSpec.squeezed(nbar=0.5).state()
    taus = np.array([0.0, 0.2, 1.0, 3.0])
    scales = np.array([0.9, 1.0, 1.2])
    traj = evolve_trajectory(psi, 0.6, taus, scales)
    for i, tau in enumerate(taus):
        for j, c in enumerate(scales):
            assert np.abs(traj[i, j] - evolve_ode(psi, 0.6 / c, c * tau)).max() < 1e-9


def test_batch_stacked_states():
    states = np.array([fock_state(1, 3), qutrit_state(0.5, 0.3)])
    out = evolve_batch(states, np.array([[0.5, 1.0], [0.5, 1.0]]), np.array([[1.0, 2.0], [1.0, 2.0]]))
    assert out.shape == (2, 2, 3, 3)
    assert np.abs(out[1, 1] - evolve_ode(states[1], 1.0, 2.0)).max() < 1e-12


_probes = st.one_of(
    st.builds(lambda a: ProbeSpec.coherent(a), st.floats(0.1, 1.5)),
    st.builds(lambda n: ProbeSpec.squeezed(nbar=n), st.floats(0.05, 1.0)),
    st.builds(ProbeSpec.fock, st.integers(1, 4)),
    st.builds(lambda n, p: ProbeSpec.qutrit(n, p), st.floats(0.05, 1.0), st.floats(0.0, 1.5)),
)


@given(_probes, st.floats(0.0, 3.0), st.floats(0.0, 10.0))
def test_evolved_state_is_valid(probe, lam, tau):
    dim = required_dim(probe)
    psi = probe.state(dim)
    rho = evolve_ode(psi, lam, tau)
    assert abs(np.trace(rho).real - 1.0) < 1e-8
    assert np.abs(rho - rho.conj().T).max() <= 1e-10
    assert np.linalg.eigvalsh(rho).min() >= -1e-8
    # diagonal decouples from the Kerr phase
    rho0 = evolve_ode(psi, 0.0, tau)
    assert np.abs(rho.diagonal() - rho0.diagonal()).max() <= 1e-9


@given(st.floats(0.1, 1.5), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_semigroup_linear_coherent(alpha, t1, t2):
    dim = required_dim(ProbeSpec.coherent(alpha))
    rho1 = evolve_ode(coherent_state(alpha, dim), 0.0, t1)
    w, v = np.linalg.eigh(rho1)
    psi1 = v[:, -1] * np.sqrt(w[-1])
    # keep the phase of the dominant coherent amplitude
    psi1 *= np.exp(-1j * np.angle(psi1[1])) if abs(psi1[1]) > 0 else 1.0
    two_step = evolve_ode(psi1, 0.0, t2)
    assert np.abs(two_step - evolve_ode(coherent_state(alpha, dim), 0.0, t1 + t2)).max() < 1e-8


@pytest.mark.parametrize("probe", [ProbeSpec.coherent(1.5), ProbeSpec.squeezed(nbar=1.0), ProbeSpec.fock(3),
                                   ProbeSpec.qutrit(0.8, 0.5)])
def test_long_time_vacuum(probe):
    rho = evolve(probe, ChannelParams.rescaled(30.0, 1.0))
    assert rho[0, 0].real >= 1 - 1e-6


def test_evolve_dispatch_respects_gamma():
    probe = ProbeSpec.squeezed(nbar=0.5)
    a = evolve(probe, ChannelParams(gamma=2.0, kerr=1.0, t=0.5))
    b = evolve(probe, ChannelParams.rescaled(1.0, 0.5))
    assert np.abs(a - b).max() < 1e-14


# --- pure-state approximation and fidelity --------------------------------------

def test_pure_state_limits():
    dim = 25
    assert np.abs(pure_state_approx(1.0, 0.0, 0.6, dim) - coherent_state(math.exp(-0.3), dim)).max() < 1e-14
    assert np.abs(pure_state_approx(1.0, 0.4, 0.0, dim) - coherent_state(1.0, dim)).max() < 1e-14


def test_pure_state_fidelity_examples():
    dim = required_dim(ProbeSpec.coherent(0.5))
    assert fidelity(pure_state_approx(0.5, 0.25, 1.0, dim), evolve_coherent_exact(0.5, 0.25, 1.0, dim)) > 0.99
    f = fidelity(pure_state_approx(1.0, 0.5, 20.0, 23), evolve_coherent_exact(1.0, 0.5, 20.0, 23))
    assert abs(f - 1.0) < 1e-3


def test_fidelity_examples():
    psi = coherent_state(0.7, 24)
    assert abs(fidelity(psi, np.outer(psi, psi.conj())) - 1.0) < 1e-14
    assert fidelity(fock_state(0, 2), np.diag([0.0, 1.0])) == 0.0
    with pytest.raises(ValueError, match="mismatch"):
        fidelity(fock_state(0, 2), np.eye(3) / 3)
