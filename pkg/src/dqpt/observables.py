"""Scalar and vector observables extracted from a pure many-body state."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .engine import StateVector, fwht_array
from .model import x_magnetizations


@dataclass(frozen=True)
class CollectiveSpin:
    """Mean and covariance of the collective spin S_beta = 1/2 sum_i sigma_i^beta.

    The covariance uses the symmetrized ordering
    Cov(S_b, S_g) = Re<S_b S_g> - <S_b><S_g>.
    """

    mean: np.ndarray
    covariance: np.ndarray


@lru_cache(maxsize=16)
def _site_signs(n_spins: int, site: int) -> np.ndarray:
    """s_site(index) = +/-1 from the bit at `site`, +1 for bit value 0."""
    idx = np.arange(1 << n_spins)
    signs = 1.0 - 2.0 * ((idx >> site) & 1)
    signs.setflags(write=False)
    return signs


def _apply_sigma_x(amplitudes: np.ndarray, n_spins: int, site: int) -> np.ndarray:
    idx = np.arange(1 << n_spins) ^ (1 << site)
    return amplitudes[idx]


def _apply_sigma_y(amplitudes: np.ndarray, n_spins: int, site: int) -> np.ndarray:
    idx = np.arange(1 << n_spins) ^ (1 << site)
    # sigma^y sends |0> to i|1> and |1> to -i|0>; the sign follows the target bit
    phase = -1j * _site_signs(n_spins, site)
    return phase * amplitudes[idx]


def _apply_sigma_z(amplitudes: np.ndarray, n_spins: int, site: int) -> np.ndarray:
    return _site_signs(n_spins, site) * amplitudes


_PAULI_ACTIONS = {"x": _apply_sigma_x, "y": _apply_sigma_y, "z": _apply_sigma_z}


def magnetization_x(state: StateVector) -> float:
    """M_x = N^-1 sum_i <sigma_i^x>, computed from the x-basis weights."""
    weights = np.abs(fwht_array(state.amplitudes)) ** 2
    return float(weights @ x_magnetizations(state.n_spins))


def site_expectations(state: StateVector, axis: str) -> np.ndarray:
    """<sigma_i^axis> for every site i, each in [-1, 1]."""
    try:
        action = _PAULI_ACTIONS[axis]
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}") from None
    psi = state.amplitudes
    out = np.empty(state.n_spins)
    for i in range(state.n_spins):
        out[i] = np.vdot(psi, action(psi, state.n_spins, i)).real
    return out


def return_probabilities(state: StateVector) -> tuple[float, float]:
    """(P_right, P_left): weights on the two fully polarized x configurations."""
    xamp = fwht_array(state.amplitudes)
    return float(np.abs(xamp[0]) ** 2), float(np.abs(xamp[-1]) ** 2)


def loschmidt_amplitude(psi0: StateVector, psi_t: StateVector) -> complex:
    """Overlap <psi0|psi(t)>; its squared modulus is the return probability."""
    if psi0.n_spins != psi_t.n_spins:
        raise ValueError("states have different sizes")
    return complex(np.vdot(psi0.amplitudes, psi_t.amplitudes))


def collective_covariance(state: StateVector) -> CollectiveSpin:
    """Mean vector and 3x3 covariance of the collective spin-1/2 operators."""
    psi = state.amplitudes
    n = state.n_spins
    branches = []
    for axis in ("x", "y", "z"):
        action = _PAULI_ACTIONS[axis]
        acc = np.zeros_like(psi)
        for i in range(n):
            acc += action(psi, n, i)
        branches.append(0.5 * acc)
    mean = np.array([np.vdot(psi, b).real for b in branches])
    second = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            second[a, b] = second[b, a] = np.vdot(branches[a], branches[b]).real
    covariance = second - np.outer(mean, mean)
    mean.setflags(write=False)
    covariance.setflags(write=False)
    return CollectiveSpin(mean=mean, covariance=covariance)
