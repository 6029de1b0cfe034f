"""Half-chain entropy and Kitagawa-Ueda spin squeezing.

Both quantities come from exact state access: the entropy via a partial trace
and eigendecomposition, the squeezing via the closed-form sinusoid that the
perpendicular collective-spin variance traces as the probe direction rotates.
A weighted sinusoid fit mirrors the angle-scan procedure used on measured
variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import StateVector
from .observables import collective_covariance

SUBSET_SIZE_CAP = 12

HERMITICITY_TOL = 1e-12

# |<S>| below this multiple of N leaves the mean spin direction undefined.
MEAN_SPIN_FLOOR = 1e-8


class UndefinedDirectionError(RuntimeError):
    """Mean spin vector too short to define the perpendicular plane."""


@dataclass(frozen=True)
class ReducedDensityMatrix:
    subset: tuple[int, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class SqueezingResult:
    xi_squared: float
    mean_spin_direction: np.ndarray | None
    optimal_angle: float
    fit_params: tuple[float, float, float] | None = None  # (a, b, c) of a + b(1 + sin(2phi - c))
    xi_sigma: float | None = None
    degenerate: bool = False


def reduced_density_matrix(state: StateVector, subset) -> ReducedDensityMatrix:
    """Partial trace onto `subset`, tracing out the complementary sites."""
    subset = tuple(int(s) for s in subset)
    n = state.n_spins
    k = len(subset)
    if k > SUBSET_SIZE_CAP:
        raise ValueError(f"subset of {k} sites exceeds the cap of {SUBSET_SIZE_CAP}")
    if len(set(subset)) != k:
        raise ValueError("subset sites must be distinct")
    if any(s < 0 or s >= n for s in subset):
        raise ValueError(f"subset sites must lie in [0, {n})")

    # axis order of the reshaped state: site N-1 first (most significant bit);
    # subset[j] ends up in bit j of the reduced index, matching the global convention
    tensor = state.amplitudes.reshape((2,) * n)
    keep_axes = [n - 1 - s for s in reversed(subset)]
    rest_axes = [ax for ax in range(n) if ax not in keep_axes]
    psi = tensor.transpose(keep_axes + rest_axes).reshape(1 << k, -1)
    rho = psi @ psi.conj().T
    rho.setflags(write=False)
    return ReducedDensityMatrix(subset=subset, matrix=rho)


def von_neumann_entropy(rho: ReducedDensityMatrix | np.ndarray) -> float:
    """S = -sum lambda log lambda over the eigenvalues, natural log."""
    matrix = rho.matrix if isinstance(rho, ReducedDensityMatrix) else np.asarray(rho)
    deviation = np.abs(matrix - matrix.conj().T).max()
    if deviation > HERMITICITY_TOL:
        raise ValueError(f"density matrix is not Hermitian (deviation {deviation:.2e})")
    eigvals = np.linalg.eigvalsh(matrix)
    positive = eigvals[eigvals > 0.0]
    return float(-(positive * np.log(positive)).sum())


def half_chain_entropy(state: StateVector) -> float:
    """Entropy of sites {0 .. N/2 - 1}; even chain lengths only."""
    if state.n_spins % 2 != 0:
        raise ValueError("half-chain split requires an even number of spins")
    return von_neumann_entropy(reduced_density_matrix(state, range(state.n_spins // 2)))


def _orthonormal_pair(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair spanning the plane perpendicular to `direction`."""
    seed = np.zeros(3)
    seed[np.argmin(np.abs(direction))] = 1.0
    e1 = seed - (seed @ direction) * direction
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(direction, e1)


def _mean_direction(spin, n_spins: int) -> np.ndarray:
    length = float(np.linalg.norm(spin.mean))
    if length <= MEAN_SPIN_FLOOR * n_spins:
        raise UndefinedDirectionError(
            f"|<S>| = {length:.3e} leaves the squeezing direction undefined"
        )
    return spin.mean / length


def perpendicular_frame(state: StateVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n0, e1, e2): mean spin direction and a frame for the plane normal to it."""
    n0 = _mean_direction(collective_covariance(state), state.n_spins)
    e1, e2 = _orthonormal_pair(n0)
    return n0, e1, e2


def _perpendicular_sinusoid(state: StateVector):
    """Sinusoid parameters of the perpendicular variance V(phi) = A + R sin(2phi - c).

    Returns (A, R, c, n0, frame) where n0 is the mean spin direction.
    """
    spin = collective_covariance(state)
    n0 = _mean_direction(spin, state.n_spins)
    e1, e2 = _orthonormal_pair(n0)
    frame = np.stack([e1, e2])
    block = frame @ spin.covariance @ frame.T
    avg = 0.5 * (block[0, 0] + block[1, 1])
    half_diff = 0.5 * (block[0, 0] - block[1, 1])
    off = block[0, 1]
    # V(phi) = avg + half_diff cos(2phi) + off sin(2phi) = avg + R sin(2phi - c)
    amp = float(np.hypot(half_diff, off))
    phase = float(np.arctan2(-half_diff, off))
    return avg, amp, phase, n0, frame


def squeezing_exact(state: StateVector) -> SqueezingResult:
    """Minimal perpendicular variance in closed form; xi^2 = 4 min / N."""
    avg, amp, phase, n0, _ = _perpendicular_sinusoid(state)
    minimum = avg - amp
    optimal = 0.5 * (phase - 0.5 * np.pi)
    return SqueezingResult(
        xi_squared=4.0 * minimum / state.n_spins,
        mean_spin_direction=n0,
        optimal_angle=float(optimal),
        fit_params=(minimum, amp, phase),
    )


def variance_scan(state: StateVector, angles) -> np.ndarray:
    """Exact perpendicular variance at each probe angle; shape (len(angles), 2).

    Column 0 repeats the angles, column 1 holds the variances.
    """
    angles = np.asarray(angles, dtype=float)
    avg, amp, phase, _, _ = _perpendicular_sinusoid(state)
    values = avg + amp * np.sin(2.0 * angles - phase)
    return np.stack([angles, values], axis=1)


def fit_variance_scan(
    angles,
    variances,
    errors=None,
    n_spins: int | None = None,
) -> SqueezingResult:
    """Weighted sinusoid fit a + b(1 + sin(2phi - c)) to sampled variances.

    The model is linear in (a + b, b cos c, b sin c), so the fit is a plain
    weighted least squares; xi^2 = 4a/N with a 1-sigma interval propagated
    from the parameter covariance.
    """
    angles = np.asarray(angles, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if n_spins is None:
        raise ValueError("n_spins is required to normalize xi^2")
    if angles.size < 5:
        raise ValueError("need at least 5 scan angles")
    if angles.max() - angles.min() < np.pi - 1e-9:
        raise ValueError("scan angles must span at least pi")
    sigma = np.ones_like(variances) if errors is None else np.asarray(errors, dtype=float)

    # a + b(1 + sin(2phi - c)) = p0 + p1 sin(2phi) + p2 cos(2phi)
    design = np.stack([np.ones_like(angles), np.sin(2 * angles), np.cos(2 * angles)], axis=1)
    w = 1.0 / sigma**2
    gram = design.T @ (w[:, None] * design)
    cov = np.linalg.inv(gram)
    p = cov @ (design.T @ (w * variances))
    b = float(np.hypot(p[1], p[2]))
    c = float(np.arctan2(-p[2], p[1]))
    a = float(p[0] - b)

    if b <= 1e-12 * max(abs(a), abs(p[0]), 1e-300):
        var_a = float(cov[0, 0])
        degenerate = True
    else:
        grad = np.array([1.0, -p[1] / b, -p[2] / b])
        var_a = float(grad @ cov @ grad)
        grad_b = np.array([0.0, p[1] / b, p[2] / b])
        sigma_b = float(np.sqrt(max(grad_b @ cov @ grad_b, 0.0)))
        degenerate = errors is not None and b < sigma_b
    sigma_a = float(np.sqrt(max(var_a, 0.0)))
    return SqueezingResult(
        xi_squared=4.0 * a / n_spins,
        mean_spin_direction=None,
        optimal_angle=0.5 * (c - 0.5 * np.pi),
        fit_params=(a, b, c),
        xi_sigma=4.0 * sigma_a / n_spins,
        degenerate=degenerate,
    )
