import numpy as np
import pytest
from scipy import stats

import dqpt
from dqpt.engine import StateVector, evolve, initial_state
from dqpt.sampling import (
    MeasurementRecord,
    estimate_magnetization,
    estimate_return_probabilities,
    rotate_to_basis,
    sample_basis,
    sample_variance_scan,
)

from conftest import random_state


def test_polarized_state_in_its_own_basis_is_deterministic():
    record = sample_basis(initial_state(4, "right"), "xxxx", 200, seed=1)
    assert record.counts == {0: 200}
    assert record.shots == 200


def test_polarized_state_in_z_basis_is_unbiased():
    record = sample_basis(initial_state(4, "right"), "zzzz", 5000, seed=2)
    for site in range(4):
        ups = sum(c for out, c in record.counts.items() if not (out >> site) & 1)
        frac = ups / record.shots
        assert abs(frac - 0.5) <= 3 * np.sqrt(0.25 / 5000)


def test_sampled_frequencies_pass_goodness_of_fit():
    state = random_state(4, seed=8)
    probs = np.abs(state.amplitudes) ** 2
    record = sample_basis(state, "zzzz", 100_000, seed=3)
    observed = np.array([record.counts.get(k, 0) for k in range(16)], dtype=float)
    expected = probs * record.shots
    # merge sparse cells so the chi-squared approximation is valid
    keep = expected >= 5
    observed = np.append(observed[keep], observed[~keep].sum())
    expected = np.append(expected[keep], expected[~keep].sum())
    if expected[-1] == 0.0:
        observed, expected = observed[:-1], expected[:-1]
    result = stats.chisquare(observed, expected * observed.sum() / expected.sum())
    assert result.pvalue > 0.01


def test_rotations_measure_the_advertised_pauli():
    # +x-polarized spins: x basis deterministic, y and z unbiased
    state = initial_state(1, "right")
    assert sample_basis(state, "x", 100, 0).counts == {0: 100}
    for basis in ("y", "z"):
        counts = sample_basis(state, basis, 4000, 5).counts
        assert abs(counts.get(0, 0) / 4000 - 0.5) < 3 * np.sqrt(0.25 / 4000)
    # +y eigenstate measured in y is deterministic
    plus_y = StateVector(1, np.array([1.0, 1.0j]) / np.sqrt(2))
    assert sample_basis(plus_y, "y", 100, 0).counts == {0: 100}


def test_mixed_basis_rotation_matches_amplitudes():
    state = random_state(3, seed=4)
    rotated = rotate_to_basis(state, "xyz")
    assert abs(np.linalg.norm(rotated) - 1.0) < 1e-12
    again = rotate_to_basis(state, "xyz")
    assert np.array_equal(rotated, again)


def test_sampling_is_deterministic_given_seed():
    state = random_state(3, seed=6)
    a = sample_basis(state, "xxx", 1000, seed=42)
    b = sample_basis(state, "xxx", 1000, seed=42)
    c = sample_basis(state, "xxx", 1000, seed=43)
    assert a.counts == b.counts
    assert a.counts != c.counts


def test_sample_basis_validation():
    state = initial_state(2, "right")
    with pytest.raises(ValueError):
        sample_basis(state, "xq", 10, 0)
    with pytest.raises(ValueError):
        sample_basis(state, "x", 10, 0)
    with pytest.raises(ValueError):
        sample_basis(state, "xx", 0, 0)


def test_record_json_round_trip():
    record = sample_basis(random_state(3, 9), "xyz", 500, seed=11)
    again = MeasurementRecord.from_json(record.to_json())
    assert again == record
    assert '"rng": "philox"' in record.to_json()


def test_return_probability_estimates_from_pure_record():
    record = MeasurementRecord(basis="xxx", shots=100, counts={0: 100}, seed=0)
    (p_r, e_r), (p_l, e_l) = estimate_return_probabilities(record)
    assert (p_r, e_r) == (1.0, 0.0)
    assert (p_l, e_l) == (0.0, 0.0)


def test_return_probability_estimates_free_case():
    c = dqpt.build_couplings(2, 0.0, 0.0, 1.0)
    state = evolve(initial_state(2, "right"), c, np.pi / 4)
    record = sample_basis(state, "xx", 4000, seed=12)
    (p_r, e_r), _ = estimate_return_probabilities(record)
    assert abs(p_r - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / 4000)
    assert e_r == pytest.approx(np.sqrt(p_r * (1 - p_r) / 4000))


def test_estimators_demand_the_x_basis():
    record = sample_basis(initial_state(2, "right"), "zz", 10, 0)
    with pytest.raises(ValueError):
        estimate_return_probabilities(record)
    with pytest.raises(ValueError):
        estimate_magnetization(record)


def test_magnetization_estimate_from_pure_record():
    record = MeasurementRecord(basis="xxxx", shots=50, counts={0: 50}, seed=0)
    m, err = estimate_magnetization(record)
    assert m == 1.0 and err == 0.0


def test_magnetization_estimate_free_case():
    c = dqpt.build_couplings(3, 0.0, 0.0, 1.0)
    state = evolve(initial_state(3, "right"), c, np.pi / 8)
    record = sample_basis(state, "xxx", 5000, seed=13)
    m, err = estimate_magnetization(record)
    assert abs(m - np.cos(np.pi / 4)) <= 3 * err


def test_magnetization_estimates_track_exact_trace():
    n = 8
    c = dqpt.build_couplings(n, 0.0, 0.42, 1.0)
    psi0 = initial_state(n, "right")
    taus = np.linspace(0.1, 2.0, 24)
    covered = 0
    for k, tau in enumerate(taus):
        state = evolve(psi0, c, tau)
        record = sample_basis(state, "x" * n, 2000, seed=100 + k)
        m, err = estimate_magnetization(record)
        if abs(m - dqpt.magnetization_x(state)) <= 3 * err:
            covered += 1
    assert covered / taus.size >= 0.95


def test_estimator_error_scales_as_inverse_root_shots():
    c = dqpt.build_couplings(3, 0.0, 0.3, 1.0)
    state = evolve(initial_state(3, "right"), c, 0.55)
    p_true = dqpt.return_probabilities(state)[0]
    spreads = []
    for shots in (500, 2000, 8000):
        errs = []
        for seed in range(120):
            record = sample_basis(state, "xxx", shots, seed=2000 + seed)
            (p_r, _), _ = estimate_return_probabilities(record)
            errs.append(p_r - p_true)
        spreads.append(np.std(errs))
    assert spreads[0] / spreads[1] == pytest.approx(2.0, rel=0.35)
    assert spreads[1] / spreads[2] == pytest.approx(2.0, rel=0.35)


def test_variance_scan_matches_exact_variances():
    c = dqpt.build_couplings(4, 0.0, 0.25, 1.0)
    state = evolve(initial_state(4, "right"), c, 0.7)
    angles = np.linspace(0.0, np.pi, 9)
    exact = dqpt.variance_scan(state, angles)
    sampled = sample_variance_scan(state, angles, 20_000, seed=3)
    assert np.array_equal(sampled[:, 0], angles)
    assert np.abs(sampled[:, 1] - exact[:, 1]).max() < 5 * sampled[:, 2].max()
    assert (sampled[:, 2] > 0).all()


def test_sampled_scan_fit_covers_exact_squeezing():
    c = dqpt.build_couplings(4, 0.0, 0.25, 1.0)
    state = evolve(initial_state(4, "right"), c, 0.7)
    exact = dqpt.squeezing_exact(state).xi_squared
    angles = np.linspace(0.0, np.pi, 9)
    hits = 0
    trials = 40
    for seed in range(trials):
        scan = sample_variance_scan(state, angles, 1500, seed=7000 + 100 * seed)
        fit = dqpt.fit_variance_scan(scan[:, 0], scan[:, 1], scan[:, 2], n_spins=4)
        if abs(fit.xi_squared - exact) <= 3 * fit.xi_sigma:
            hits += 1
    assert hits / trials >= 0.95


def test_variance_scan_needs_two_shots():
    state = evolve(initial_state(3, "right"), dqpt.build_couplings(3, 0.0, 0.2, 1.0), 0.4)
    with pytest.raises(ValueError):
        sample_variance_scan(state, [0.0, 1.0], 1, seed=0)
