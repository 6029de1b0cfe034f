"""Exact quench dynamics and DQPT analysis for long-range transverse-field Ising chains."""

from .analysis import (
    CriticalTimeEstimate,
    RateTrace,
    crossing_time,
    fit_critical_time,
    loschmidt_rate,
    quadratic_coefficient,
    rate_functions,
)
from .config import RunConfig, parse_config
from .engine import (
    PropagationPlan,
    StateVector,
    apply_hamiltonian,
    evolve,
    evolve_trace,
    fwht,
    initial_state,
)
from .entanglement import (
    ReducedDensityMatrix,
    SqueezingResult,
    fit_variance_scan,
    half_chain_entropy,
    reduced_density_matrix,
    squeezing_exact,
    variance_scan,
    von_neumann_entropy,
)
from .model import CouplingMatrix, XSpectrum, build_couplings, classical_x_spectrum
from .observables import (
    CollectiveSpin,
    collective_covariance,
    loschmidt_amplitude,
    magnetization_x,
    return_probabilities,
    site_expectations,
)
from .perturbation import interaction_constants, perturbative_spins, predicted_tau_x
from .pipeline import run, sweep
from .sampling import (
    MeasurementRecord,
    estimate_magnetization,
    estimate_return_probabilities,
    sample_basis,
)
from .spectral import SpectralGrid, energy_resolved_map, mean_energy_density, spectral_weights

__version__ = "0.1.0"

__all__ = [
    "CollectiveSpin",
    "CouplingMatrix",
    "CriticalTimeEstimate",
    "MeasurementRecord",
    "PropagationPlan",
    "RateTrace",
    "ReducedDensityMatrix",
    "RunConfig",
    "SpectralGrid",
    "SqueezingResult",
    "StateVector",
    "XSpectrum",
    "apply_hamiltonian",
    "build_couplings",
    "classical_x_spectrum",
    "collective_covariance",
    "crossing_time",
    "energy_resolved_map",
    "estimate_magnetization",
    "estimate_return_probabilities",
    "evolve",
    "evolve_trace",
    "fit_critical_time",
    "fit_variance_scan",
    "fwht",
    "half_chain_entropy",
    "initial_state",
    "interaction_constants",
    "loschmidt_amplitude",
    "loschmidt_rate",
    "magnetization_x",
    "mean_energy_density",
    "parse_config",
    "perturbative_spins",
    "predicted_tau_x",
    "quadratic_coefficient",
    "rate_functions",
    "reduced_density_matrix",
    "return_probabilities",
    "run",
    "sample_basis",
    "site_expectations",
    "spectral_weights",
    "squeezing_exact",
    "sweep",
    "variance_scan",
    "von_neumann_entropy",
]
