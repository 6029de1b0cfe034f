"""Closed-form second-order predictions for the weak-coupling regime.

These expressions serve as an independent analytic oracle for the exact
engine when J/B is small: per-site spin components, and the quadratic shift
of the first magnetization zero away from pi/4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CouplingMatrix


@dataclass(frozen=True)
class PerturbationPrediction:
    c1_per_site: np.ndarray
    c2_per_site: np.ndarray
    c1_mean: float
    c2_mean: float
    tau_x: float


def interaction_constants(couplings: CouplingMatrix):
    """Per-site coupling moments.

    c1_i = (sum_j J_ij / B)^2 / 2 and c2_i = sum_j (J_ij / B)^2 / 2, plus the
    site means. Cauchy-Schwarz gives c1_i >= c2_i >= 0 on every row.
    """
    ratio = couplings.couplings / couplings.field
    c1 = 0.5 * ratio.sum(axis=1) ** 2
    c2 = 0.5 * (ratio**2).sum(axis=1)
    return c1, c2, float(c1.mean()), float(c2.mean())


def perturbative_spins(couplings: CouplingMatrix, tau):
    """Per-site (<sigma^x>, <sigma^y>, <sigma^z>) at dimensionless time tau.

    Second order in J/B and J t; tau may be a scalar or an array, and the
    site axis is appended last.
    """
    tau = np.asarray(tau, dtype=float)[..., None]
    c1, c2, _, _ = interaction_constants(couplings)
    two_bt = 2.0 * tau  # 2 B t = 2 tau

    parallel = (
        1.0
        - c1 * np.sin(two_bt) ** 4 / 4.0
        - c2 * (2.0 * two_bt - np.sin(2.0 * two_bt)) / 16.0
    )
    perp = -c1 * (4.0 * two_bt - np.sin(4.0 * two_bt)) / 64.0 + c2 * (
        2.0 * two_bt * (1.0 + 2.0 * np.cos(2.0 * two_bt))
        - np.sin(2.0 * two_bt) * (2.0 + np.cos(2.0 * two_bt))
    ) / 16.0

    sx = np.cos(two_bt) * parallel - np.sin(two_bt) * perp
    # y orientation follows the engine's field sign (H1 = -B sum sigma^z)
    sy = -(np.sin(two_bt) * parallel + np.cos(two_bt) * perp)
    row_sum = couplings.couplings.sum(axis=1) / couplings.field
    sz = row_sum * np.sin(two_bt) ** 2 / 2.0
    return sx, sy, sz


def perturbative_magnetization(couplings: CouplingMatrix, tau):
    """Site mean of the perturbative <sigma^x>."""
    sx, _, _ = perturbative_spins(couplings, tau)
    return sx.mean(axis=-1)


def predicted_tau_x(couplings: CouplingMatrix) -> float:
    """First magnetization zero, pi/4 + (c1/2 + c2) pi/32."""
    _, _, c1_mean, c2_mean = interaction_constants(couplings)
    return float(np.pi / 4.0 + (0.5 * c1_mean + c2_mean) * np.pi / 32.0)


def predict(couplings: CouplingMatrix) -> PerturbationPrediction:
    c1, c2, c1_mean, c2_mean = interaction_constants(couplings)
    c1.setflags(write=False)
    c2.setflags(write=False)
    return PerturbationPrediction(
        c1_per_site=c1,
        c2_per_site=c2,
        c1_mean=c1_mean,
        c2_mean=c2_mean,
        tau_x=predicted_tau_x(couplings),
    )
