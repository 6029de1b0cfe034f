"""Rate functions, kink detection, and critical-time extraction.

Two independent routes to the first critical time: the exact crossing of the
two return probabilities, and the experimental procedure of intersecting
rms-optimal linear fits to the two log-probability branches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Return probabilities decay like exp(-N lambda); anything below this is
# indistinguishable from zero in float64 and would poison the logs.
PROBABILITY_FLOOR = 1e-300

MIN_FIT_WINDOW = 4


class CrossingNotFoundError(RuntimeError):
    """The two probability branches never cross on the supplied grid."""


class DegenerateFitError(RuntimeError):
    """The fitted branch lines are parallel; no intersection exists."""


@dataclass(frozen=True)
class RateTrace:
    """Per-branch and combined rate functions over a dimensionless time grid."""

    tau: np.ndarray
    p_right: np.ndarray
    p_left: np.ndarray
    lambda_right: np.ndarray
    lambda_left: np.ndarray
    lambda_total: np.ndarray
    lambda_min: np.ndarray
    n_spins: int
    floored: np.ndarray  # True where a probability had to be floored before log


@dataclass(frozen=True)
class CriticalTimeEstimate:
    tau_crit: float
    ci_low: float
    ci_high: float
    method: str
    diagnostics: dict


def _floored_log(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flagged = p < PROBABILITY_FLOOR
    return np.log(np.maximum(p, PROBABILITY_FLOOR)), flagged


def rate_functions(
    tau: np.ndarray,
    p_right: np.ndarray,
    p_left: np.ndarray,
    n_spins: int,
) -> RateTrace:
    """lambda_eta = -N^-1 log P_eta, their min, and the total-rate variant."""
    tau = np.asarray(tau, dtype=float)
    p_right = np.asarray(p_right, dtype=float)
    p_left = np.asarray(p_left, dtype=float)
    if not (tau.shape == p_right.shape == p_left.shape):
        raise ValueError("tau, p_right, p_left must have identical shapes")
    if np.all(p_right + p_left <= 0.0):
        raise ValueError("all probabilities vanish; no rate function defined")
    log_r, floor_r = _floored_log(p_right)
    log_l, floor_l = _floored_log(p_left)
    log_total, floor_t = _floored_log(p_right + p_left)
    inv_n = 1.0 / n_spins
    lam_r = -inv_n * log_r
    lam_l = -inv_n * log_l
    return RateTrace(
        tau=tau,
        p_right=p_right,
        p_left=p_left,
        lambda_right=lam_r,
        lambda_left=lam_l,
        lambda_total=-inv_n * log_total,
        lambda_min=np.minimum(lam_r, lam_l),
        n_spins=n_spins,
        floored=floor_r | floor_l | floor_t,
    )


def loschmidt_rate(g_trace: np.ndarray, n_spins: int) -> np.ndarray:
    """Modulus rate -N^-1 log|G(tau)|; the log branch of the phase is not taken."""
    modulus = np.abs(np.asarray(g_trace))
    logs, _ = _floored_log(modulus)
    return -logs / n_spins


def first_zero_crossing(tau: np.ndarray, values: np.ndarray) -> tuple[float, int]:
    """First sign change of `values`, linearly interpolated; returns (tau*, index).

    The index is the last grid point before the crossing.
    """
    v = np.asarray(values, dtype=float)
    sign = np.sign(v)
    nonzero = sign != 0
    # a grid point sitting exactly on zero is itself the crossing
    exact = np.flatnonzero(~nonzero)
    flips = np.flatnonzero(nonzero[:-1] & nonzero[1:] & (sign[:-1] != sign[1:]))
    if exact.size and (not flips.size or exact[0] <= flips[0]):
        k = int(exact[0])
        return float(tau[k]), max(k - 1, 0)
    if not flips.size:
        raise CrossingNotFoundError("no sign change on the supplied grid")
    k = int(flips[0])
    t0, t1 = tau[k], tau[k + 1]
    v0, v1 = v[k], v[k + 1]
    return float(t0 + (t1 - t0) * v0 / (v0 - v1)), k


def crossing_time(trace: RateTrace) -> CriticalTimeEstimate:
    """First crossing of P_right with P_left, located by linear interpolation."""
    tau_c, k = first_zero_crossing(trace.tau, trace.p_right - trace.p_left)
    return CriticalTimeEstimate(
        tau_crit=tau_c,
        ci_low=float(trace.tau[k]),
        ci_high=float(trace.tau[min(k + 1, trace.tau.size - 1)]),
        method="crossing",
        diagnostics={"bracket_index": k},
    )


def all_crossing_times(trace: RateTrace) -> list[float]:
    """Every crossing of the two branches (the dynamics is quasi-periodic)."""
    diff = trace.p_right - trace.p_left
    out = []
    sign = np.sign(diff)
    for k in range(diff.size - 1):
        if sign[k] != 0 and sign[k + 1] != 0 and sign[k] != sign[k + 1]:
            t0, t1 = trace.tau[k], trace.tau[k + 1]
            out.append(float(t0 + (t1 - t0) * diff[k] / (diff[k] - diff[k + 1])))
        elif sign[k] == 0 and (k == 0 or sign[k - 1] != 0):
            out.append(float(trace.tau[k]))
    return out


def _weighted_line_fit(x, y, sigma):
    """Weighted least-squares line y = m x + b; returns (m, b, cov, rms)."""
    w = 1.0 / sigma**2
    design = np.stack([x, np.ones_like(x)], axis=1)
    gram = design.T @ (w[:, None] * design)
    rhs = design.T @ (w * y)
    cov = np.linalg.inv(gram)
    m, b = cov @ rhs
    resid = y - (m * x + b)
    rms = float(np.sqrt(np.mean(resid**2)))
    return float(m), float(b), cov, rms


def fit_critical_time(
    tau: np.ndarray,
    log_p_right: np.ndarray,
    log_p_left: np.ndarray,
    sigma_right: np.ndarray | None = None,
    sigma_left: np.ndarray | None = None,
    valid_right: np.ndarray | None = None,
    valid_left: np.ndarray | None = None,
) -> CriticalTimeEstimate:
    """Critical time from intersecting linear fits to the two log branches.

    For each branch, sliding windows of at least MIN_FIT_WINDOW points lying
    strictly on one side of the crossing's bracketing interval are fit by
    weighted least squares; the window with minimal rms wins. The returned
    1-sigma interval is propagated from the fit-parameter covariances.
    """
    tau = np.asarray(tau, dtype=float)
    log_p_right = np.asarray(log_p_right, dtype=float)
    log_p_left = np.asarray(log_p_left, dtype=float)
    # without supplied uncertainties, fall back to the residual-scaled OLS covariance
    scale_cov = sigma_right is None and sigma_left is None
    sigma_right = np.ones_like(tau) if sigma_right is None else np.asarray(sigma_right, float)
    sigma_left = np.ones_like(tau) if sigma_left is None else np.asarray(sigma_left, float)
    valid_right = np.ones(tau.shape, bool) if valid_right is None else np.asarray(valid_right, bool)
    valid_left = np.ones(tau.shape, bool) if valid_left is None else np.asarray(valid_left, bool)

    _, bracket = first_zero_crossing(tau, log_p_right - log_p_left)

    estimates = []
    for logs, sig, valid in (
        (log_p_right, sigma_right, valid_right),
        (log_p_left, sigma_left, valid_left),
    ):
        ok = valid & np.isfinite(logs) & np.isfinite(sig) & (sig > 0)
        idx = np.flatnonzero(ok)
        left_idx = idx[idx <= bracket]
        right_idx = idx[idx > bracket]
        candidates = []
        # windows adjacent to the crossing, growing away from it on either side
        for w in range(MIN_FIT_WINDOW, left_idx.size + 1):
            candidates.append(("L", left_idx[left_idx.size - w :]))
        for w in range(MIN_FIT_WINDOW, right_idx.size + 1):
            candidates.append(("R", right_idx[:w]))
        best = None
        for side, window in candidates:
            m, b, cov, rms = _weighted_line_fit(tau[window], logs[window], sig[window])
            size = window.size
            if scale_cov and size > 2:
                cov = cov * (rms**2 * size / (size - 2))
            if (
                best is None
                or rms < best[0] - 1e-15
                or (abs(rms - best[0]) <= 1e-15 and size > best[1])
            ):
                best = (rms, size, m, b, cov, side, window)
        if best is None:
            raise ValueError(
                f"need at least {MIN_FIT_WINDOW} valid points per branch near the crossing"
            )
        estimates.append(best)

    (rms_r, _, m_r, b_r, cov_r, side_r, win_r) = estimates[0]
    (rms_l, _, m_l, b_l, cov_l, side_l, win_l) = estimates[1]
    slope_gap = m_r - m_l
    if abs(slope_gap) < 1e-12 * max(abs(m_r), abs(m_l), 1.0):
        raise DegenerateFitError("fitted branch lines are parallel")
    tau_c = (b_l - b_r) / slope_gap
    # gradient of tau_c w.r.t. (m_r, b_r, m_l, b_l)
    grad_r = np.array([-tau_c / slope_gap, -1.0 / slope_gap])
    grad_l = np.array([tau_c / slope_gap, 1.0 / slope_gap])
    var = grad_r @ cov_r @ grad_r + grad_l @ cov_l @ grad_l
    sigma_tc = float(np.sqrt(max(var, 0.0)))
    return CriticalTimeEstimate(
        tau_crit=float(tau_c),
        ci_low=float(tau_c - sigma_tc),
        ci_high=float(tau_c + sigma_tc),
        method="linear-fit",
        diagnostics={
            "rms_right": rms_r,
            "rms_left": rms_l,
            "window_right": (int(win_r[0]), int(win_r[-1])),
            "window_left": (int(win_l[0]), int(win_l[-1])),
            "side_right": side_r,
            "side_left": side_l,
            "sigma": sigma_tc,
        },
    )


def quadratic_coefficient(j_over_b: np.ndarray, tau_crit: np.ndarray) -> float:
    """Least-squares slope of (tau_crit - pi/4) against (J/B)^2 through the origin."""
    j_over_b = np.asarray(j_over_b, dtype=float)
    tau_crit = np.asarray(tau_crit, dtype=float)
    if j_over_b.size < 3:
        raise ValueError("need at least three (J/B, tau_crit) points")
    if np.any(j_over_b > 0.4):
        raise ValueError("quadratic fit is only meaningful for J/B <= 0.4")
    x = j_over_b**2
    y = tau_crit - np.pi / 4.0
    denom = float(x @ x)
    if denom == 0.0:
        return 0.0
    return float(x @ y / denom)
