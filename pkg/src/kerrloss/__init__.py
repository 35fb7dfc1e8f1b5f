"""Loss-rate estimation in a lossy bosonic channel with self-Kerr interaction."""

__version__ = "0.1.0"

from kerrloss.channel import (  # noqa: E402
    ChannelParams,
    evolve,
    evolve_coherent_exact,
    evolve_ode,
    fidelity,
    lindblad_rhs,
    pure_state_approx,
)
from kerrloss.metrology import (  # noqa: E402
    dgamma_rho,
    fi_photon_counting,
    fi_quadrature,
    homodyne_distribution,
    optimize_quadrature_phase,
    qfi_coherent_analytic,
    qfi_fock_analytic,
    qfi_mixed,
    qfi_numeric,
    qfi_pure,
    qfi_squeezed_analytic,
)
from kerrloss.states import (  # noqa: E402
    ProbeSpec,
    coherent_state,
    fock_state,
    mean_photon_number,
    qutrit_state,
    required_dim,
    squeezed_vacuum,
)
