import numpy as np
import pytest

import dqpt
from dqpt.engine import PropagationPlan, StateVector, evolve, evolve_trace, initial_state
from dqpt.spectral import (
    default_epsilon_grid,
    default_mu,
    energy_resolved_map,
    mean_energy_density,
    spectral_weights,
)

from conftest import dense_hamiltonian_oracle, random_state


def test_initial_weight_sits_on_the_ground_configuration():
    c = dqpt.build_couplings(5, 0.0, 0.4, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    weights = spectral_weights(initial_state(5, "right"), spectrum)
    expected = np.zeros(32)
    expected[0] = 1.0
    assert np.allclose(weights, expected, atol=1e-14)


def test_zero_energy_weights_are_the_return_probabilities():
    c = dqpt.build_couplings(6, 0.0, 0.42, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    state = evolve(initial_state(6, "right"), c, 0.9)
    weights = spectral_weights(state, spectrum)
    p_r, p_l = dqpt.return_probabilities(state)
    assert abs(weights[0] - p_r) < 1e-14
    assert abs(weights[-1] - p_l) < 1e-14


def test_weights_normalized_for_random_states():
    c = dqpt.build_couplings(4, 1.0, 0.3, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    for seed in range(3):
        weights = spectral_weights(random_state(4, seed), spectrum)
        assert abs(weights.sum() - 1.0) < 1e-12


def test_weights_reject_size_mismatch():
    spectrum = dqpt.classical_x_spectrum(dqpt.build_couplings(3, 0.0, 0.3, 1.0))
    with pytest.raises(ValueError):
        spectral_weights(initial_state(4, "right"), spectrum)


def test_mean_energy_density_zero_at_start_and_bounded():
    c = dqpt.build_couplings(6, 0.0, 0.5, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    w0 = spectral_weights(initial_state(6, "right"), spectrum)
    assert mean_energy_density(w0, spectrum) < 1e-14
    for seed in range(3):
        w = spectral_weights(random_state(6, seed), spectrum)
        assert 0.0 <= mean_energy_density(w, spectrum) <= spectrum.bandwidth / 6


def test_free_mean_energy_matches_dense_oracle():
    c = dqpt.build_couplings(5, 0.0, 0.0, 1.0)
    cc = dqpt.build_couplings(5, 0.0, 0.6, 1.0)  # H0 comes from these couplings
    spectrum = dqpt.classical_x_spectrum(cc)
    h0 = dense_hamiltonian_oracle(cc) - dense_hamiltonian_oracle(c)  # interaction part only
    shift = cc.pair_sum
    for tau in (0.5, 1.1):
        state = evolve(initial_state(5, "right"), c, tau)  # pure field rotation
        w = spectral_weights(state, spectrum)
        expected = (np.vdot(state.amplitudes, h0 @ state.amplitudes).real + shift) / 5
        assert abs(mean_energy_density(w, spectrum) - expected) < 1e-10


def test_default_mu_is_a_fiftieth_of_the_density_span():
    spectrum = dqpt.classical_x_spectrum(dqpt.build_couplings(6, 0.0, 0.5, 1.0))
    assert default_mu(spectrum) == pytest.approx(spectrum.bandwidth / 6 / 50)


def test_single_weight_map_is_plus_one_where_defined():
    c = dqpt.build_couplings(4, 0.0, 0.5, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    weights = np.zeros((1, 16))
    weights[0, 0] = 1.0
    grid = energy_resolved_map(np.array([0.0]), weights, spectrum)
    defined = ~np.isnan(grid.magnetization[0])
    assert defined.any()
    assert np.allclose(grid.magnetization[0][defined], 1.0)


def test_map_rejects_nonpositive_mu():
    c = dqpt.build_couplings(3, 0.0, 0.5, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    with pytest.raises(ValueError):
        energy_resolved_map(np.array([0.0]), np.ones((1, 8)) / 8, spectrum, mu=0.0)


def test_discrete_sum_rules_along_a_trace():
    c = dqpt.build_couplings(6, 0.0, 0.5, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    grid = np.linspace(0.0, 3.0, 60)
    trace = evolve_trace(initial_state(6, "right"), c, PropagationPlan(time_grid=grid))
    for _, state in trace:
        w = spectral_weights(state, spectrum)
        assert abs(w.sum() - 1.0) < 1e-10
        assert abs(w @ spectrum.magnetizations - dqpt.magnetization_x(state)) < 1e-10


def test_lorentzian_mass_recovered_on_a_wide_window():
    # a Lorentzian holds (2/pi) arctan(k) of its mass within +-k half-widths,
    # so the +-10 mu window can capture ~0.96 at best; 0.99 needs ~ +-100 mu
    c = dqpt.build_couplings(6, 0.0, 0.5, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    state = evolve(initial_state(6, "right"), c, 1.0)
    w = spectral_weights(state, spectrum)[None, :]
    mu = default_mu(spectrum)
    span = spectrum.bandwidth / 6
    for pad, floor in ((10, 0.95), (100, 0.99)):
        eps = np.linspace(-pad * mu, span + pad * mu, 20000)
        grid = energy_resolved_map(np.array([1.0]), w, spectrum, epsilon=eps, mu=mu)
        mass = np.trapezoid(grid.weights[0], eps)
        assert mass >= floor


def test_ground_line_magnetization_flips_across_the_crossing():
    n, jb = 6, 0.5
    c = dqpt.build_couplings(n, 0.0, jb, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    tau = np.linspace(0.0, 2.0, 150)
    trace = evolve_trace(initial_state(n, "right"), c, PropagationPlan(time_grid=tau))
    weights = np.stack([spectral_weights(s, spectrum) for _, s in trace])
    grid = energy_resolved_map(tau, weights, spectrum)
    rate = dqpt.rate_functions(tau, weights[:, 0], weights[:, -1], n)
    tau_c = dqpt.crossing_time(rate).tau_crit
    flip, _ = dqpt.analysis.first_zero_crossing(tau, grid.magnetization[:, 0])
    assert abs(flip - tau_c) <= 3 * (tau[1] - tau[0])


def test_spin_flip_reflects_the_magnetization_map():
    n = 5
    c = dqpt.build_couplings(n, 0.8, 0.4, 1.0)
    spectrum = dqpt.classical_x_spectrum(c)
    state = evolve(initial_state(n, "right"), c, 0.8)
    parity = 1.0 - 2.0 * (np.bitwise_count(np.arange(1 << n, dtype=np.uint64)) & 1)
    flipped = StateVector(n, parity * state.amplitudes)
    tau = np.array([0.8])
    a = energy_resolved_map(tau, spectral_weights(state, spectrum)[None, :], spectrum)
    b = energy_resolved_map(tau, spectral_weights(flipped, spectrum)[None, :], spectrum)
    mask = ~np.isnan(a.magnetization) & ~np.isnan(b.magnetization)
    assert mask.any()
    assert np.abs(a.magnetization[mask] + b.magnetization[mask]).max() < 1e-10


def test_epsilon_grid_spans_the_density_axis():
    spectrum = dqpt.classical_x_spectrum(dqpt.build_couplings(5, 0.0, 0.5, 1.0))
    eps = default_epsilon_grid(spectrum, 64)
    assert eps[0] == 0.0
    assert eps[-1] == pytest.approx(spectrum.bandwidth / 5)
    assert eps.size == 64
