"""Energy-resolved decomposition of the evolved state over the x-product basis.

Every x configuration is a joint eigenstate of the interaction Hamiltonian and
the x magnetization, so the state's weight distribution over (energy density,
magnetization) is exact; the continuous map is obtained by broadening the
discrete spectrum with Lorentzians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import StateVector, fwht_array
from .model import XSpectrum

# Broadened weight below which the ratio M = num/P is reported as undefined.
WEIGHT_FLOOR = 1e-12

# Lorentzian half-width as a fraction of the spectral span on the energy-density axis.
WIDTH_FRACTION = 1.0 / 50.0


@dataclass(frozen=True)
class SpectralGrid:
    """P(eps, tau) and M(eps, tau) on an (epsilon, tau) lattice.

    weights and magnetization have shape (len(tau), len(epsilon));
    magnetization is NaN where the broadened weight falls below WEIGHT_FLOOR.
    """

    tau: np.ndarray
    epsilon: np.ndarray
    weights: np.ndarray
    magnetization: np.ndarray
    mean_energy_density: np.ndarray
    mu: float


def spectral_weights(state: StateVector, spectrum: XSpectrum) -> np.ndarray:
    """p_nu = |<E_nu|psi>|^2 over all 2^N x configurations (sums to one)."""
    if state.n_spins != spectrum.n_spins:
        raise ValueError("state and spectrum sizes differ")
    return np.abs(fwht_array(state.amplitudes)) ** 2


def mean_energy_density(weights: np.ndarray, spectrum: XSpectrum) -> float:
    """Weighted mean of E_nu / N over the shifted spectrum."""
    return float(weights @ spectrum.energies) / spectrum.n_spins


def default_mu(spectrum: XSpectrum) -> float:
    """Half-width WIDTH_FRACTION of the energy-density span W/N."""
    return WIDTH_FRACTION * spectrum.bandwidth / spectrum.n_spins


def default_epsilon_grid(spectrum: XSpectrum, n_bins: int = 200) -> np.ndarray:
    """Uniform energy-density grid spanning [0, W/N]."""
    return np.linspace(0.0, spectrum.bandwidth / spectrum.n_spins, n_bins)


def energy_resolved_map(
    tau: np.ndarray,
    weights_trace: np.ndarray,
    spectrum: XSpectrum,
    epsilon: np.ndarray | None = None,
    mu: float | None = None,
) -> SpectralGrid:
    """Lorentzian-broadened weight and magnetization maps over (epsilon, tau).

    weights_trace has one row of 2^N discrete weights per grid time.
    """
    tau = np.asarray(tau, dtype=float)
    weights_trace = np.atleast_2d(np.asarray(weights_trace, dtype=float))
    if weights_trace.shape[0] != tau.size:
        raise ValueError("weights_trace must have one row per tau point")
    epsilon = default_epsilon_grid(spectrum) if epsilon is None else np.asarray(epsilon, float)
    mu = default_mu(spectrum) if mu is None else float(mu)
    if mu <= 0.0:
        raise ValueError(f"Lorentzian half-width must be positive, got {mu}")

    densities = spectrum.energies / spectrum.n_spins
    # kernel[e, nu] = Lorentzian delta_mu(epsilon_e - E_nu/N)
    gap = epsilon[:, None] - densities[None, :]
    kernel = (mu / np.pi) / (mu * mu + gap * gap)

    p_map = weights_trace @ kernel.T
    num = (weights_trace * spectrum.magnetizations) @ kernel.T
    m_map = np.full_like(p_map, np.nan)
    defined = p_map >= WEIGHT_FLOOR
    m_map[defined] = num[defined] / p_map[defined]

    ebar = weights_trace @ spectrum.energies / spectrum.n_spins
    for arr in (tau, epsilon, p_map, m_map, ebar):
        arr.setflags(write=False)
    return SpectralGrid(
        tau=tau,
        epsilon=epsilon,
        weights=p_map,
        magnetization=m_map,
        mean_energy_density=ebar,
        mu=mu,
    )
