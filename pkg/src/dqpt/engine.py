"""Many-body states and quench propagation via a basis-split matrix-free kernel.

The Hamiltonian H = H0 + H1 is dense in either product basis but diagonal in
each of two bases: H0 (pair couplings) in the x-product basis, H1 (transverse
field) in the z-product basis. The fast Walsh-Hadamard transform converts
between the two in O(N 2^N), so

    H |psi> = W D_x W |psi> + D_z |psi>

with W the normalized FWHT, D_x the classical x-configuration energies and
D_z[n] = -B (N - 2 popcount(n)). Time stepping uses a Lanczos short recurrence
on this matvec (H is real-symmetric in the z basis); a dense eigendecomposition
path serves as a small-system oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .model import CouplingMatrix, raw_x_energies

DENSE_SIZE_CAP = 12  # 2^12 eigenproblem is still cheap; the oracle stops there

_LANCZOS_BREAKDOWN = 1e-14


class ConvergenceError(RuntimeError):
    """Krylov stepping failed to reach the tolerance within the step budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over the z-product basis; unit norm."""

    n_spins: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class PropagationPlan:
    """How to step the Schroedinger equation along a dimensionless time grid."""

    method: str = "krylov"
    krylov_dim: int = 30
    step_tolerance: float = 1e-10
    time_grid: np.ndarray = field(default_factory=lambda: default_time_grid())

    def __post_init__(self):
        if self.method not in ("krylov", "dense-eigen"):
            raise ValueError(f"unknown propagation method {self.method!r}")
        if self.method == "krylov":
            if self.step_tolerance <= 0.0:
                raise ValueError("krylov stepping requires step_tolerance > 0")
            if self.krylov_dim < 2:
                raise ValueError("krylov_dim must be >= 2")
        grid = np.asarray(self.time_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("time_grid must be a nonempty 1-D sequence")
        if grid[0] < 0.0 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("time_grid must be strictly increasing and start >= 0")
        object.__setattr__(self, "time_grid", grid)


def default_time_grid(time_max: float = 3.0, n_steps: int = 200) -> np.ndarray:
    """Uniform grid of n_steps points over tau in [0, time_max]."""
    return np.linspace(0.0, time_max, n_steps)


def _as_state(n_spins: int, amplitudes: np.ndarray) -> StateVector:
    amplitudes.setflags(write=False)
    return StateVector(n_spins=n_spins, amplitudes=amplitudes)


def initial_state(n_spins: int, direction: str) -> StateVector:
    """Fully x-polarized product state, 'right' for |=>> and 'left' for |<=|.

    Both are eigenstates of every sigma_i^x, with eigenvalue +1 (right)
    or -1 (left); in the z basis the left state carries a parity sign.
    """
    if n_spins < 1:
        raise ValueError(f"n_spins must be >= 1, got {n_spins}")
    size = 1 << n_spins
    amp = 2.0 ** (-0.5 * n_spins)
    if direction == "right":
        amplitudes = np.full(size, amp, dtype=np.complex128)
    elif direction == "left":
        parity = np.bitwise_count(np.arange(size, dtype=np.uint64)) & 1
        amplitudes = np.where(parity == 1, -amp, amp).astype(np.complex128)
    else:
        raise ValueError(f"direction must be 'right' or 'left', got {direction!r}")
    return _as_state(n_spins, amplitudes)


@numba.njit(cache=True)
def _fwht_kernel(a):
    """Unnormalized in-place Walsh-Hadamard butterfly over a length-2^N array."""
    n = a.shape[0]
    h = 1
    while h < n:
        step = 2 * h
        for base in range(0, n, step):
            for j in range(base, base + h):
                u = a[j]
                v = a[j + h]
                a[j] = u + v
                a[j + h] = u - v
        h = step


def fwht_array(amplitudes: np.ndarray) -> np.ndarray:
    """Normalized FWHT of a length-2^N complex array (an involution)."""
    out = np.array(amplitudes, dtype=np.complex128, copy=True)
    _fwht_kernel(out)
    out *= 2.0 ** (-0.5 * np.log2(out.shape[0]))
    return out


def fwht(state: StateVector) -> StateVector:
    """Change of basis between the z-product and x-product representations.

    The output entry at index nu is the x-basis amplitude of configuration nu
    (bit value 0 meaning s = +1).
    """
    return _as_state(state.n_spins, fwht_array(state.amplitudes))


def field_diagonal(n_spins: int, field: float) -> np.ndarray:
    """D_z[n] = -B sum_i z_i(n) with z_i = +1 for bit value 0."""
    n = np.arange(1 << n_spins, dtype=np.uint64)
    return -field * (n_spins - 2.0 * np.bitwise_count(n))


class _SplitKernel:
    """Matrix-free H|psi> via the FWHT sandwich; reused across a trajectory."""

    def __init__(self, couplings: CouplingMatrix):
        self.n_spins = couplings.n_spins
        self.size = 1 << couplings.n_spins
        self.d_x = raw_x_energies(couplings)
        self.d_z = field_diagonal(couplings.n_spins, couplings.field)
        self._norm = 2.0 ** (-couplings.n_spins)  # two unnormalized FWHTs

    def matvec(self, amplitudes: np.ndarray) -> np.ndarray:
        phi = np.array(amplitudes, dtype=np.complex128, copy=True)
        _fwht_kernel(phi)
        phi *= self.d_x
        _fwht_kernel(phi)
        phi *= self._norm
        phi += self.d_z * amplitudes
        return phi


def apply_hamiltonian(couplings: CouplingMatrix, state: StateVector) -> StateVector:
    """H|psi> as a raw matrix action (output is not normalized)."""
    if couplings.n_spins != state.n_spins:
        raise ValueError(
            f"couplings are for {couplings.n_spins} spins, state has {state.n_spins}"
        )
    return _as_state(state.n_spins, _SplitKernel(couplings).matvec(state.amplitudes))


def dense_hamiltonian(couplings: CouplingMatrix) -> np.ndarray:
    """Explicit 2^N x 2^N Hamiltonian from Kronecker products of Pauli blocks.

    Oracle-only path, capped at N <= DENSE_SIZE_CAP.
    """
    n = couplings.n_spins
    if n > DENSE_SIZE_CAP:
        raise ValueError(f"dense assembly capped at N = {DENSE_SIZE_CAP}, got {n}")
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])

    def site_op(op, i):
        # site 0 lives in the least-significant bit, hence the rightmost factor
        return np.kron(np.kron(np.eye(1 << (n - 1 - i)), op), np.eye(1 << i))

    h = np.zeros((1 << n, 1 << n))
    for i in range(n):
        h -= couplings.field * site_op(sz, i)
        for j in range(i + 1, n):
            if couplings.couplings[i, j] != 0.0:
                h -= couplings.couplings[i, j] * (site_op(sx, i) @ site_op(sx, j))
    return h


class _DensePropagator:
    """exp(-i H dtau) via one eigendecomposition, reused for every step."""

    def __init__(self, couplings: CouplingMatrix):
        h = dense_hamiltonian(couplings)
        self.eigvals, self.eigvecs = np.linalg.eigh(h)

    def step(self, amplitudes: np.ndarray, dtau: float) -> np.ndarray:
        coeff = self.eigvecs.T @ amplitudes
        coeff *= np.exp(-1j * dtau * self.eigvals)
        return self.eigvecs @ coeff


class _KrylovPropagator:
    """Adaptive Lanczos stepping of exp(-i H dtau)|psi>.

    The Lanczos basis depends only on H and the current state, so each basis
    is built once and the largest admissible substep (local error budget
    step_tolerance per unit tau) is taken within it.
    """

    max_substeps = 10_000

    def __init__(self, couplings: CouplingMatrix, krylov_dim: int, step_tolerance: float):
        self.kernel = _SplitKernel(couplings)
        self.dim = min(krylov_dim, 1 << couplings.n_spins)
        self.tol = step_tolerance

    def _build_basis(self, v0: np.ndarray):
        """Lanczos tridiagonalization from unit vector v0; short recurrence."""
        basis = np.empty((self.dim, v0.shape[0]), dtype=np.complex128)
        alphas = np.empty(self.dim)
        betas = np.empty(max(self.dim - 1, 0))
        basis[0] = v0
        w = self.kernel.matvec(v0)
        alphas[0] = np.vdot(v0, w).real
        w -= alphas[0] * v0
        m = 1
        scale = max(abs(alphas[0]), 1.0)
        beta_next = np.linalg.norm(w)
        while m < self.dim:
            if beta_next < _LANCZOS_BREAKDOWN * scale:
                break  # happy breakdown: Krylov space is invariant
            betas[m - 1] = beta_next
            basis[m] = w / beta_next
            w = self.kernel.matvec(basis[m])
            w -= beta_next * basis[m - 1]
            alphas[m] = np.vdot(basis[m], w).real
            w -= alphas[m] * basis[m]
            beta_next = np.linalg.norm(w)
            scale = max(scale, abs(alphas[m]), betas[m - 1])
            m += 1
        happy = beta_next < _LANCZOS_BREAKDOWN * scale
        return basis[:m], alphas[:m], betas[: m - 1], beta_next, happy

    @staticmethod
    def _small_exp(alphas, betas, dtau):
        """y = exp(-i dtau T) e1 for the real symmetric tridiagonal T."""
        if alphas.shape[0] == 1:
            return np.exp(-1j * dtau * alphas[:1])
        t = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        vals, vecs = np.linalg.eigh(t)
        return vecs @ (np.exp(-1j * dtau * vals) * vecs[0])

    def step(self, amplitudes: np.ndarray, dtau: float) -> np.ndarray:
        if dtau == 0.0:
            return amplitudes.copy()
        psi = amplitudes
        remaining = dtau
        suggested = dtau
        for _ in range(self.max_substeps):
            basis, alphas, betas, beta_res, happy = self._build_basis(psi)
            sub = min(suggested, remaining)
            while True:
                y = self._small_exp(alphas, betas, sub)
                # residual-norm proxy for the local truncation error
                err = 0.0 if happy else beta_res * abs(y[-1])
                if happy or err <= self.tol * sub or sub <= remaining * 1e-12:
                    break
                sub *= 0.5
            if not happy and err > self.tol * sub:
                raise ConvergenceError(
                    f"krylov step stalled at substep {sub:.3e} of {dtau:.3e}",
                    residual=float(err),
                )
            psi = basis.T @ y
            remaining -= sub
            if remaining <= dtau * 1e-15:
                return psi
            # grow cautiously; the error scales steeply with the substep
            suggested = sub * (2.0 if (happy or err < 0.01 * self.tol * sub) else 1.25)
        raise ConvergenceError(
            f"krylov stepping exceeded {self.max_substeps} substeps for dtau={dtau}",
            residual=float(remaining),
        )


def _make_propagator(couplings: CouplingMatrix, plan: PropagationPlan):
    if plan.method == "dense-eigen":
        if couplings.n_spins > DENSE_SIZE_CAP:
            raise ValueError(
                f"dense-eigen propagation capped at N = {DENSE_SIZE_CAP}"
            )
        return _DensePropagator(couplings)
    return _KrylovPropagator(couplings, plan.krylov_dim, plan.step_tolerance)


def evolve(
    state: StateVector,
    couplings: CouplingMatrix,
    tau: float,
    plan: PropagationPlan | None = None,
) -> StateVector:
    """Propagate |psi> by the dimensionless time tau: exp(-i H tau / B)|psi>."""
    if tau < 0.0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if couplings.n_spins != state.n_spins:
        raise ValueError("couplings and state sizes differ")
    plan = plan or PropagationPlan()
    propagator = _make_propagator(couplings, plan)
    # tau = t B, so the physical step is tau / B
    out = propagator.step(state.amplitudes, tau / couplings.field)
    return _as_state(state.n_spins, out)


def evolve_trace(
    state: StateVector,
    couplings: CouplingMatrix,
    plan: PropagationPlan,
) -> list[tuple[float, StateVector]]:
    """States at every grid point, each step continuing from the previous one."""
    if couplings.n_spins != state.n_spins:
        raise ValueError("couplings and state sizes differ")
    propagator = _make_propagator(couplings, plan)
    out: list[tuple[float, StateVector]] = []
    current = state
    previous = 0.0
    for tau in plan.time_grid:
        dtau = (tau - previous) / couplings.field
        if dtau > 0.0:
            current = _as_state(state.n_spins, propagator.step(current.amplitudes, dtau))
        out.append((float(tau), current))
        previous = tau
    return out
