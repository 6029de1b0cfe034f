"""Shared oracles: dense Kronecker Hamiltonians, expm evolution, brute spectra.

Everything here is deliberately written as plain loops over explicit matrices,
independent of the package's transform-based kernels.
"""

import numpy as np
import pytest
import scipy.linalg

import dqpt

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = {"x": SX, "y": SY, "z": SZ}


def site_operator(op, site, n_spins):
    """Embed a 2x2 operator at `site`; site 0 lives in the least-significant bit."""
    out = np.array([[1.0]], dtype=complex)
    for k in reversed(range(n_spins)):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


def dense_hamiltonian_oracle(couplings):
    """H = -sum_{i<j} J_ij X_i X_j - B sum_i Z_i as an explicit matrix."""
    n = couplings.n_spins
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(n):
        h -= couplings.field * site_operator(SZ, i, n)
        for j in range(i + 1, n):
            h -= couplings.couplings[i, j] * (
                site_operator(SX, i, n) @ site_operator(SX, j, n)
            )
    return h


def evolve_oracle(couplings, amplitudes, tau):
    """Scaling-and-squaring propagation of the explicit matrix."""
    h = dense_hamiltonian_oracle(couplings)
    return scipy.linalg.expm(-1j * (tau / couplings.field) * h) @ amplitudes


def brute_force_spectrum(couplings):
    """(energies, magnetizations) by direct enumeration with python loops."""
    n = couplings.n_spins
    energies = []
    mags = []
    for nu in range(1 << n):
        spins = [1 - 2 * ((nu >> i) & 1) for i in range(n)]
        e = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                e -= couplings.couplings[i, j] * spins[i] * spins[j]
        energies.append(e)
        mags.append(sum(spins) / n)
    energies = np.array(energies)
    return energies - energies.min(), np.array(mags)


def random_state(n_spins, seed):
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(1 << n_spins) + 1j * rng.standard_normal(1 << n_spins)
    amps /= np.linalg.norm(amps)
    return dqpt.StateVector(n_spins=n_spins, amplitudes=amps)


def x_product_state(n_spins, nu):
    """The x-configuration basis vector |E_nu> as explicit z-basis amplitudes."""
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    amps = np.array([1.0])
    for site in reversed(range(n_spins)):
        amps = np.kron(minus if (nu >> site) & 1 else plus, amps)
    return amps.astype(complex)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger numba compilation once so timed tests measure steady state."""
    c = dqpt.build_couplings(3, 0.0, 0.2, 1.0)
    dqpt.classical_x_spectrum(c)
    dqpt.evolve(dqpt.initial_state(3, "right"), c, 0.1)
