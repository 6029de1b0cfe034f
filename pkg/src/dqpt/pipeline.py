"""Run orchestration: simulate, analyze, and emit plot-ready CSV/JSON files.

One run produces a trace table over the time grid plus a JSON summary; a sweep
executes one run per axis value on a process pool and aggregates, including
the quadratic small-coupling fit of the critical time.
"""

from __future__ import annotations

import concurrent.futures
import contextlib
import json
import math
import os
from dataclasses import replace

import numpy as np

from . import analysis, entanglement, perturbation, sampling, spectral
from .config import RunConfig, config_dict
from .engine import PropagationPlan, evolve_trace, fwht_array, initial_state
from .model import build_couplings, classical_x_spectrum

SCHEMA_VERSION = 1

CONVENTIONS = {
    "time": "dimensionless tau = t * B",
    "log_base": "natural",
    "mu": "lorentzian half-width = (W/N)/50 on the energy-density axis",
    "squeezing": "spin-1/2 collective operators; xi^2 = 1 for a coherent product state",
    "rng": sampling.RNG_ALGORITHM,
}

TRACE_COLUMNS = ("tau", "p_right", "p_left", "lambda", "lambda_min", "m_x", "epsilon_bar")
RATE_COLUMNS = ("tau", "p_right", "p_left", "lambda_right", "lambda_left", "lambda", "lambda_min")
SAMPLED_COLUMNS = (
    "tau",
    "p_right_hat",
    "p_right_err",
    "p_left_hat",
    "p_left_err",
    "m_x_hat",
    "m_x_err",
)


def _format_value(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return ""
    return repr(float(x))


def write_csv(path: str, columns, rows, header_lines) -> None:
    """CSV with a '#'-prefixed metadata block; floats keep full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def read_csv(path: str):
    """Inverse of write_csv: (columns, dict of float arrays, header lines)."""
    header, columns, rows = [], None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                header.append(line[1:].strip())
            elif columns is None:
                columns = line.split(",")
            elif line:
                rows.append([float(v) if v else math.nan for v in line.split(",")])
    if columns is None:
        raise ValueError(f"{path} has no column header")
    table = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return columns, {c: table[:, k] for k, c in enumerate(columns)}, header


def _metadata_lines(cfg: RunConfig, kind: str) -> list[str]:
    lines = [f"dqpt {kind} v{SCHEMA_VERSION}"]
    lines += [f"convention {k}: {v}" for k, v in sorted(CONVENTIONS.items())]
    lines += [f"config {k}: {v}" for k, v in sorted(config_dict(cfg).items())]
    return lines


def _needs_evolution(cfg: RunConfig) -> bool:
    return any(k != "perturbation" for k in cfg.outputs)


@contextlib.contextmanager
def _stage(name: str):
    """Name the failing pipeline stage on any propagated error."""
    try:
        yield
    except Exception as exc:
        head = str(exc.args[0]) if exc.args else type(exc).__name__
        exc.args = (f"[stage {name}] {head}",) + tuple(exc.args[1:])
        raise


def run(cfg: RunConfig) -> dict:
    """Execute one configuration; writes requested files, returns the summary."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    results: dict = {}
    files: dict = {}

    with _stage("model"):
        couplings = build_couplings(cfg.n_spins, cfg.alpha, cfg.j_over_b, field=1.0)
    tau_grid = np.linspace(0.0, cfg.time_max, cfg.n_steps)

    if _needs_evolution(cfg):
        with _stage("model"):
            spectrum = classical_x_spectrum(couplings)
        with _stage("evolve"):
            plan = PropagationPlan(
                method=cfg.method,
                krylov_dim=cfg.krylov_dim,
                step_tolerance=cfg.tolerance,
                time_grid=tau_grid,
            )
            states = evolve_trace(initial_state(cfg.n_spins, "right"), couplings, plan)

        n_tau = len(states)
        p_right = np.empty(n_tau)
        p_left = np.empty(n_tau)
        m_x = np.empty(n_tau)
        epsilon_bar = np.empty(n_tau)
        want_spectral = "spectral" in cfg.outputs
        weights_trace = np.empty((n_tau, 1 << cfg.n_spins)) if want_spectral else None
        entropy = np.full(n_tau, np.nan)
        xi_squared = np.full(n_tau, np.nan)

        with _stage("observables"):
            for k, (_, state) in enumerate(states):
                weights = np.abs(fwht_array(state.amplitudes)) ** 2
                p_right[k] = weights[0]
                p_left[k] = weights[-1]
                m_x[k] = weights @ spectrum.magnetizations
                epsilon_bar[k] = weights @ spectrum.energies / cfg.n_spins
                if want_spectral:
                    weights_trace[k] = weights
                if "entanglement" in cfg.outputs:
                    entropy[k] = entanglement.half_chain_entropy(state)
                if "squeezing" in cfg.outputs:
                    try:
                        xi_squared[k] = entanglement.squeezing_exact(state).xi_squared
                    except entanglement.UndefinedDirectionError:
                        pass  # GHZ-like point: direction undefined, leave the gap

        with _stage("rate-analysis"):
            rate = analysis.rate_functions(tau_grid, p_right, p_left, cfg.n_spins)
            results.update(_analyze_rate(rate))
            results["tau_x_zero"] = _first_zero_or_none(tau_grid, m_x)

        if "trace" in cfg.outputs:
            columns = list(TRACE_COLUMNS)
            series = [tau_grid, p_right, p_left, rate.lambda_total, rate.lambda_min, m_x, epsilon_bar]
            if "entanglement" in cfg.outputs:
                columns.append("entropy")
                series.append(entropy)
            if "squeezing" in cfg.outputs:
                columns.append("xi_squared")
                series.append(xi_squared)
            path = os.path.join(cfg.output_dir, "trace.csv")
            write_csv(path, columns, zip(*series), _metadata_lines(cfg, "trace"))
            files["trace"] = path

        if "rate" in cfg.outputs:
            path = os.path.join(cfg.output_dir, "rate.csv")
            series = [tau_grid, p_right, p_left, rate.lambda_right, rate.lambda_left,
                      rate.lambda_total, rate.lambda_min]
            write_csv(path, RATE_COLUMNS, zip(*series), _metadata_lines(cfg, "rate"))
            files["rate"] = path

        if "entanglement" in cfg.outputs or "squeezing" in cfg.outputs:
            columns = ["tau"]
            series = [tau_grid]
            if "entanglement" in cfg.outputs:
                columns.append("entropy")
                series.append(entropy)
            if "squeezing" in cfg.outputs:
                columns.append("xi_squared")
                series.append(xi_squared)
            path = os.path.join(cfg.output_dir, "entanglement.csv")
            write_csv(path, columns, zip(*series), _metadata_lines(cfg, "entanglement"))
            files["entanglement"] = path

        if "squeezing" in cfg.outputs and cfg.shots > 0:
            with _stage("squeezing-scan"):
                path = os.path.join(cfg.output_dir, "squeezing_fit.csv")
                write_csv(
                    path,
                    ("tau", "xi_squared_hat", "xi_sigma", "var_min", "var_amp", "var_phase", "degenerate"),
                    _sampled_squeezing_rows(cfg, states),
                    _metadata_lines(cfg, "squeezing-fit"),
                )
                files["squeezing_fit"] = path

        if want_spectral:
            with _stage("spectral"):
                grid = spectral.energy_resolved_map(
                    tau_grid,
                    weights_trace,
                    spectrum,
                    epsilon=spectral.default_epsilon_grid(spectrum, cfg.epsilon_bins),
                )
                path = os.path.join(cfg.output_dir, "spectral.csv")
                rows = (
                    (grid.tau[t], grid.epsilon[e], grid.weights[t, e], grid.magnetization[t, e])
                    for t in range(grid.tau.size)
                    for e in range(grid.epsilon.size)
                )
                write_csv(path, ("tau", "epsilon", "weight", "magnetization"), rows,
                          _metadata_lines(cfg, "spectral") + [f"mu = {grid.mu!r}"])
                files["spectral"] = path
                results["mu"] = grid.mu

        if cfg.shots > 0:
            with _stage("sampling"):
                sampled = _sample_trace(cfg, states)
                path = os.path.join(cfg.output_dir, "sampled.csv")
                write_csv(path, SAMPLED_COLUMNS, zip(*sampled["series"]),
                          _metadata_lines(cfg, "sampled"))
                files["sampled"] = path
                records_path = os.path.join(cfg.output_dir, "records.json")
                with open(records_path, "w", encoding="utf-8") as fh:
                    json.dump(
                        {
                            "schema": f"dqpt-records/{SCHEMA_VERSION}",
                            "config": config_dict(cfg),
                            "conventions": CONVENTIONS,
                            "records": [r.to_dict() for r in sampled["records"]],
                        },
                        fh,
                        indent=2,
                        sort_keys=True,
                    )
                    fh.write("\n")
                files["records"] = records_path
                results.update(sampled["results"])

    if "perturbation" in cfg.outputs:
        with _stage("perturbation"):
            prediction = perturbation.predict(couplings)
            m_pert = perturbation.perturbative_magnetization(couplings, tau_grid)
            path = os.path.join(cfg.output_dir, "perturbation.csv")
            write_csv(path, ("tau", "m_x"), zip(tau_grid, m_pert),
                      _metadata_lines(cfg, "perturbation"))
            files["perturbation"] = path
            results["tau_x_perturbative"] = prediction.tau_x
            results["tau_x_perturbative_zero"] = _first_zero_or_none(tau_grid, m_pert)
            results["c1_mean"] = prediction.c1_mean
            results["c2_mean"] = prediction.c2_mean

    summary = {
        "schema": f"dqpt-summary/{SCHEMA_VERSION}",
        "config": config_dict(cfg),
        "conventions": CONVENTIONS,
        "results": results,
        "files": files,
    }
    summary_path = os.path.join(cfg.output_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files["summary"] = summary_path
    return summary


def _first_zero_or_none(tau, values):
    try:
        tau_zero, _ = analysis.first_zero_crossing(tau, values)
        return tau_zero
    except analysis.CrossingNotFoundError:
        return None


def _analyze_rate(rate: analysis.RateTrace) -> dict:
    """Critical-time extraction by both routes plus kink diagnostics."""
    out: dict = {}
    crossings = analysis.all_crossing_times(rate)
    out["crossings"] = crossings
    out["kink_detected"] = bool(crossings)
    try:
        est = analysis.crossing_time(rate)
        out["tau_crit_crossing"] = est.tau_crit
        out["tau_crit_crossing_ci"] = [est.ci_low, est.ci_high]
    except analysis.CrossingNotFoundError:
        out["tau_crit_crossing"] = None
        out["tau_crit_crossing_ci"] = None
    try:
        fit = analysis.fit_critical_time(
            rate.tau,
            np.log(np.maximum(rate.p_right, analysis.PROBABILITY_FLOOR)),
            np.log(np.maximum(rate.p_left, analysis.PROBABILITY_FLOOR)),
            valid_right=~rate.floored,
            valid_left=~rate.floored,
        )
        out["tau_crit_fit"] = fit.tau_crit
        out["tau_crit_fit_ci"] = [fit.ci_low, fit.ci_high]
    except (analysis.CrossingNotFoundError, analysis.DegenerateFitError, ValueError):
        out["tau_crit_fit"] = None
        out["tau_crit_fit_ci"] = None
    # steepness of the normalized dominant-probability handover at the crossing
    if rate.tau.size >= 2:
        total = rate.p_right + rate.p_left
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(total > 0, rate.p_right / np.maximum(total, 1e-300), np.nan)
        slope = np.gradient(ratio, rate.tau)
        out["crossing_steepness"] = float(np.nanmax(np.abs(slope)))
    else:
        out["crossing_steepness"] = None
    return out


def analyze_trace(path: str) -> dict:
    """Re-run the rate analysis on an emitted trace or rate CSV."""
    columns, table, header = read_csv(path)
    for needed in ("tau", "p_right", "p_left"):
        if needed not in columns:
            raise ValueError(f"{path} lacks required column {needed!r}")
    header_cfg = _config_from_header(path, header)
    rate = analysis.rate_functions(
        table["tau"], table["p_right"], table["p_left"], header_cfg["n_spins"]
    )
    results = _analyze_rate(rate)
    results["tau_x_zero"] = (
        _first_zero_or_none(table["tau"], table["m_x"]) if "m_x" in table else None
    )
    return {
        "schema": f"dqpt-summary/{SCHEMA_VERSION}",
        "config": header_cfg,
        "conventions": CONVENTIONS,
        "results": results,
        "files": {"analyzed": path},
    }


def _config_from_header(path: str, header) -> dict:
    out = {}
    for line in header:
        if line.startswith("config "):
            key, _, value = line[len("config "):].partition(":")
            out[key.strip()] = _parse_header_value(value.strip())
    if "n_spins" not in out:
        raise ValueError(f"{path} metadata lacks 'config n_spins'")
    return out


def _parse_header_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if text.startswith("[") or text.startswith("("):
            return [p.strip(" '\"") for p in text.strip("[]()").split(",") if p.strip()]
        return text


_SCAN_ANGLES = np.linspace(0.0, np.pi, 9)


def _sampled_squeezing_rows(cfg: RunConfig, states):
    """Angle-scan fit of sampled perpendicular variances at every grid time."""
    rows = []
    for k, (tau, state) in enumerate(states):
        try:
            scan = sampling.sample_variance_scan(
                state, _SCAN_ANGLES, cfg.shots, cfg.seed + 7919 * k
            )
            fit = entanglement.fit_variance_scan(
                scan[:, 0], scan[:, 1], scan[:, 2], n_spins=cfg.n_spins
            )
            a, b, c = fit.fit_params
            rows.append((tau, fit.xi_squared, fit.xi_sigma, a, b, c, float(fit.degenerate)))
        except entanglement.UndefinedDirectionError:
            rows.append((tau, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan))
    return rows


def _sample_trace(cfg: RunConfig, states) -> dict:
    """Finite-shot estimates along the trace, plus a fitted critical time."""
    basis = "x" * cfg.n_spins
    records = []
    series = [np.array([tau for tau, _ in states])]
    est = np.empty((len(states), 6))
    for k, (_, state) in enumerate(states):
        record = sampling.sample_basis(state, basis, cfg.shots, cfg.seed + k)
        records.append(record)
        (pr, er), (pl, el) = sampling.estimate_return_probabilities(record)
        mx, em = sampling.estimate_magnetization(record)
        est[k] = (pr, er, pl, el, mx, em)
    series.extend(est.T)

    results: dict = {}
    pr_hat, er, pl_hat, el = est[:, 0], est[:, 1], est[:, 2], est[:, 3]
    ok_r = pr_hat > 0
    ok_l = pl_hat > 0
    # sigma of log p-hat, floored at one count's worth so p-hat = 1 keeps finite weight
    sig_floor = 1.0 / cfg.shots
    try:
        fit = analysis.fit_critical_time(
            series[0],
            np.log(np.maximum(pr_hat, analysis.PROBABILITY_FLOOR)),
            np.log(np.maximum(pl_hat, analysis.PROBABILITY_FLOOR)),
            sigma_right=np.where(ok_r, np.maximum(er / np.maximum(pr_hat, 1e-300), sig_floor), np.inf),
            sigma_left=np.where(ok_l, np.maximum(el / np.maximum(pl_hat, 1e-300), sig_floor), np.inf),
            valid_right=ok_r,
            valid_left=ok_l,
        )
        results["tau_crit_sampled"] = fit.tau_crit
        results["tau_crit_sampled_ci"] = [fit.ci_low, fit.ci_high]
    except (analysis.CrossingNotFoundError, analysis.DegenerateFitError, ValueError):
        results["tau_crit_sampled"] = None
        results["tau_crit_sampled_ci"] = None
    return {"records": records, "series": series, "results": results}


def _run_sweep_point(args):
    cfg_dict, axis, value = args
    cfg_dict = dict(cfg_dict)
    cfg_dict[axis] = value
    cfg_dict["outputs"] = tuple(cfg_dict["outputs"])
    cfg = RunConfig(**cfg_dict)
    try:
        summary = run(cfg)
        return value, summary, None
    except Exception as exc:  # the sweep must keep going past a bad point
        return value, None, f"{type(exc).__name__}: {exc}"


def sweep(template: RunConfig, axis: str, values, workers: int | None = None) -> dict:
    """One run per axis value, in parallel; aggregate critical-time fits."""
    if axis not in ("j_over_b", "alpha", "n_spins"):
        raise ValueError(f"sweep axis must be j_over_b, alpha, or n_spins, got {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one axis value")

    jobs = []
    for value in values:
        sub = os.path.join(template.output_dir, f"{axis}={value:g}" if isinstance(value, float) else f"{axis}={value}")
        cfg = replace(template, output_dir=sub)
        jobs.append((config_dict(cfg), axis, value))

    points = []
    if workers is None or workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_sweep_point, jobs))
    else:
        outcomes = [_run_sweep_point(job) for job in jobs]

    failed = 0
    for value, summary, error in outcomes:
        if error is None:
            points.append({"value": value, "ok": True, "results": summary["results"],
                           "files": summary["files"]})
        else:
            failed += 1
            points.append({"value": value, "ok": False, "error": error})

    aggregate = {
        "schema": f"dqpt-sweep/{SCHEMA_VERSION}",
        "axis": axis,
        "values": values,
        "template": config_dict(template),
        "conventions": CONVENTIONS,
        "points": points,
        "failed": failed,
    }
    if axis == "j_over_b":
        aggregate["d_crit"] = _quadratic_fit(points, "tau_crit_crossing")
        aggregate["d_x"] = _quadratic_fit(points, "tau_x_zero")
        aggregate["d_x_perturbative"] = _quadratic_fit(points, "tau_x_perturbative_zero")

    os.makedirs(template.output_dir, exist_ok=True)
    path = os.path.join(template.output_dir, "sweep.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    aggregate["file"] = path
    return aggregate


def _quadratic_fit(points, key) -> float | None:
    pairs = [
        (p["value"], p["results"][key])
        for p in points
        if p["ok"] and p["results"].get(key) is not None and p["value"] <= 0.4
    ]
    if len(pairs) < 3:
        return None
    x, y = zip(*pairs)
    return analysis.quadratic_coefficient(np.array(x), np.array(y))
