"""Projective-measurement emulation with finite shot counts.

Mirrors the statistics pipeline of a real measurement run: rotate each site
into the requested Pauli basis, draw outcomes from the Born weights with a
counter-based generator (Philox) for cross-platform reproducibility, and turn
the counts back into estimators with binomial error bars.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .engine import StateVector

RNG_ALGORITHM = "philox"

_SQRT_HALF = 2.0**-0.5

# per-site rotations mapping the +1 eigenvector of the measured Pauli onto |0>
_BASIS_ROTATIONS = {
    "x": np.array([[1.0, 1.0], [1.0, -1.0]]) * _SQRT_HALF,
    "y": np.array([[1.0, -1.0j], [1.0, 1.0j]]) * _SQRT_HALF,
    "z": np.eye(2, dtype=complex),
}


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome counts of repeated projective measurements in one product basis.

    basis is a length-N string, site 0 first; outcome bit value 0 means the
    +1 eigenstate of that site's measured Pauli operator.
    """

    basis: str
    shots: int
    counts: dict[int, int]
    seed: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to the shot number")
        size = 1 << len(self.basis)
        if any(not 0 <= k < size for k in self.counts):
            raise ValueError(f"outcomes must lie in [0, {size})")

    @property
    def n_spins(self) -> int:
        return len(self.basis)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis,
            "shots": self.shots,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MeasurementRecord":
        raw = json.loads(text)
        return cls(
            basis=raw["basis"],
            shots=int(raw["shots"]),
            counts={int(k): int(v) for k, v in raw["counts"].items()},
            seed=int(raw["seed"]),
        )


def _apply_single_qubit(amplitudes: np.ndarray, n_spins: int, site: int, gate: np.ndarray) -> np.ndarray:
    """Apply a 2x2 gate to one site of the 2^N amplitude vector."""
    # axes: (more significant bits, this site, less significant bits)
    block = amplitudes.reshape(1 << (n_spins - 1 - site), 2, 1 << site)
    out = np.empty_like(block)
    out[:, 0, :] = gate[0, 0] * block[:, 0, :] + gate[0, 1] * block[:, 1, :]
    out[:, 1, :] = gate[1, 0] * block[:, 0, :] + gate[1, 1] * block[:, 1, :]
    return out.reshape(amplitudes.shape)


def rotate_to_basis(state: StateVector, basis: str) -> np.ndarray:
    """Amplitudes after rotating every site into its measurement basis."""
    if len(basis) != state.n_spins:
        raise ValueError(f"basis string must have length {state.n_spins}, got {len(basis)}")
    psi = np.array(state.amplitudes, copy=True)
    for site, axis in enumerate(basis):
        if axis not in _BASIS_ROTATIONS:
            raise ValueError(f"unknown measurement axis {axis!r} at site {site}")
        if axis != "z":
            psi = _apply_single_qubit(psi, state.n_spins, site, _BASIS_ROTATIONS[axis])
    return psi


def sample_basis(state: StateVector, basis: str, shots: int, seed: int) -> MeasurementRecord:
    """Draw i.i.d. projective outcomes in the given product basis."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = np.abs(rotate_to_basis(state, basis)) ** 2
    probs /= probs.sum()
    rng = np.random.Generator(np.random.Philox(seed))
    drawn = rng.multinomial(shots, probs)
    hit = np.flatnonzero(drawn)
    counts = {int(outcome): int(drawn[outcome]) for outcome in hit}
    return MeasurementRecord(basis=basis, shots=shots, counts=counts, seed=seed)


def _require_all_x(record: MeasurementRecord):
    if set(record.basis) != {"x"}:
        raise ValueError(f"estimator requires the all-x basis, got {record.basis!r}")


def estimate_return_probabilities(record: MeasurementRecord):
    """((P_right, sigma), (P_left, sigma)) from all-up / all-down fractions."""
    _require_all_x(record)
    all_down = (1 << record.n_spins) - 1
    p_r = record.counts.get(0, 0) / record.shots
    p_l = record.counts.get(all_down, 0) / record.shots

    def binom_sigma(p):
        return float(np.sqrt(p * (1.0 - p) / record.shots))

    return (p_r, binom_sigma(p_r)), (p_l, binom_sigma(p_l))


def estimate_magnetization(record: MeasurementRecord):
    """(M_x, sigma): site mean of up-minus-down fractions with binomial errors."""
    _require_all_x(record)
    n = record.n_spins
    up = np.zeros(n)
    for outcome, count in record.counts.items():
        for site in range(n):
            if not (outcome >> site) & 1:
                up[site] += count
    frac = up / record.shots
    m = float(np.mean(2.0 * frac - 1.0))
    site_var = 4.0 * frac * (1.0 - frac) / record.shots
    return m, float(np.sqrt(site_var.sum()) / n)


def _direction_rotation(direction: np.ndarray) -> np.ndarray:
    """2x2 unitary mapping the +1 eigenstate of direction . sigma onto |0>."""
    dx, dy, dz = direction
    theta = np.arccos(np.clip(dz, -1.0, 1.0))
    phi = np.arctan2(dy, dx)
    cos, sin = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array(
        [[cos, sin * np.exp(-1j * phi)], [-sin * np.exp(1j * phi), cos]]
    )


def sample_variance_scan(state: StateVector, angles, shots: int, seed: int):
    """Sampled perpendicular collective-spin variances for the angle-scan fit.

    For each probe angle the spins are rotated so the perpendicular direction
    maps to z, then measured; the per-shot collective projection yields a
    sample variance and its standard error. Returns rows of
    (angle, variance, error); angle k uses seed + k.
    """
    from .entanglement import perpendicular_frame

    if shots < 2:
        raise ValueError("variance estimation needs at least 2 shots")
    _, e1, e2 = perpendicular_frame(state)
    n = state.n_spins
    values = 0.5 * (n - 2.0 * np.bitwise_count(np.arange(1 << n, dtype=np.uint64)))
    rows = np.empty((len(angles), 3))
    for k, angle in enumerate(angles):
        gate = _direction_rotation(np.cos(angle) * e1 + np.sin(angle) * e2)
        psi = np.array(state.amplitudes, copy=True)
        for site in range(n):
            psi = _apply_single_qubit(psi, n, site, gate)
        probs = np.abs(psi) ** 2
        probs /= probs.sum()
        rng = np.random.Generator(np.random.Philox(seed + k))
        counts = rng.multinomial(shots, probs)
        mean = counts @ values / shots
        centered = values - mean
        s2 = counts @ centered**2 / (shots - 1)
        m4 = counts @ centered**4 / shots
        var_s2 = max(m4 - s2 * s2 * (shots - 3) / (shots - 1), 0.0) / shots
        # error floor at the variance resolution scale, so degenerate draws keep finite weight
        rows[k] = (angle, s2, max(np.sqrt(var_s2), 0.25 * n / shots))
    return rows
