"""Declarative run configuration: parsing, validation, canonical emission."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .engine import DENSE_SIZE_CAP
from .model import ALPHA_MAX, SPECTRUM_SIZE_CAP

OUTPUT_KINDS = ("trace", "rate", "spectral", "entanglement", "squeezing", "perturbation")

# everything except the closed-form overlay requires propagating 2^N amplitudes
_EVOLVING_OUTPUTS = frozenset(OUTPUT_KINDS) - {"perturbation"}


class ConfigError(ValueError):
    """Invalid run configuration; names the offending field (and line, if any)."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        prefix = ""
        if key is not None:
            prefix += f"field {key!r}: "
        if line is not None:
            prefix = f"line {line}: " + prefix
        super().__init__(prefix + message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    n_spins: int
    alpha: float = 0.0
    j_over_b: float = 0.0
    time_max: float = 3.0
    n_steps: int = 200
    method: str = "krylov"
    krylov_dim: int = 30
    tolerance: float = 1e-10
    shots: int = 0
    seed: int = 0
    epsilon_bins: int = 200
    outputs: tuple[str, ...] = ("trace", "rate")
    output_dir: str = "."


_PARSERS = {
    "n_spins": int,
    "alpha": float,
    "j_over_b": float,
    "time_max": float,
    "n_steps": int,
    "method": str,
    "krylov_dim": int,
    "tolerance": float,
    "shots": int,
    "seed": int,
    "epsilon_bins": int,
    "outputs": None,  # handled separately
    "output_dir": str,
}


def _parse_outputs(value) -> tuple[str, ...]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
    else:
        parts = [str(p) for p in value]
    for p in parts:
        if p not in OUTPUT_KINDS:
            raise ConfigError(f"unknown output {p!r}; choose from {', '.join(OUTPUT_KINDS)}", key="outputs")
    # keep the canonical order, drop duplicates
    return tuple(k for k in OUTPUT_KINDS if k in parts)


def _coerce(key: str, value, line: int | None = None):
    if key not in _PARSERS:
        raise ConfigError("unknown key", key=key, line=line)
    if key == "outputs":
        return _parse_outputs(value)
    caster = _PARSERS[key]
    try:
        if caster is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        return caster(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {value!r} as {caster.__name__} ({exc})", key=key, line=line) from None


def validate_config(cfg: RunConfig) -> RunConfig:
    """Check every field against the module preconditions it will hit."""
    def bad(msg, key):
        raise ConfigError(msg, key=key)

    if cfg.n_spins < 1:
        bad(f"n_spins must be >= 1, got {cfg.n_spins}", "n_spins")
    if not 0.0 <= cfg.alpha < ALPHA_MAX:
        bad(f"alpha must lie in [0, {ALPHA_MAX}), got {cfg.alpha}", "alpha")
    if cfg.j_over_b < 0.0:
        bad(f"j_over_b must be >= 0, got {cfg.j_over_b}", "j_over_b")
    if cfg.time_max <= 0.0:
        bad(f"time_max must be > 0, got {cfg.time_max}", "time_max")
    if cfg.n_steps < 1:
        bad(f"n_steps must be >= 1, got {cfg.n_steps}", "n_steps")
    if cfg.method not in ("krylov", "dense-eigen"):
        bad(f"method must be 'krylov' or 'dense-eigen', got {cfg.method!r}", "method")
    if cfg.method == "dense-eigen" and cfg.n_spins > DENSE_SIZE_CAP:
        bad(f"dense-eigen is capped at n_spins = {DENSE_SIZE_CAP}", "method")
    if cfg.krylov_dim < 2:
        bad(f"krylov_dim must be >= 2, got {cfg.krylov_dim}", "krylov_dim")
    if cfg.tolerance <= 0.0:
        bad(f"tolerance must be > 0, got {cfg.tolerance}", "tolerance")
    if cfg.shots < 0:
        bad(f"shots must be >= 0, got {cfg.shots}", "shots")
    if cfg.epsilon_bins < 2:
        bad(f"epsilon_bins must be >= 2, got {cfg.epsilon_bins}", "epsilon_bins")
    if not cfg.outputs:
        bad("outputs must not be empty", "outputs")
    needs_evolution = _EVOLVING_OUTPUTS & set(cfg.outputs)
    if needs_evolution and cfg.n_spins > SPECTRUM_SIZE_CAP:
        bad(
            f"outputs {sorted(needs_evolution)} need 2^N state tables; "
            f"n_spins is capped at {SPECTRUM_SIZE_CAP}",
            "n_spins",
        )
    if "entanglement" in cfg.outputs and cfg.n_spins % 2 != 0:
        bad("the half-chain entropy needs an even n_spins", "outputs")
    return cfg


def parse_values(text: str) -> dict:
    """Coerce key = value lines or a JSON document into typed config fields."""
    stripped = text.lstrip()
    values: dict = {}
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
        for key, value in raw.items():
            values[key] = _coerce(key, value)
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError("expected key = value", line=lineno)
            key, _, value = body.partition("=")
            key = key.strip()
            values[key] = _coerce(key, value.strip(), line=lineno)
    if "n_spins" not in values:
        raise ConfigError("n_spins is required", key="n_spins")
    return values


def parse_config(text: str) -> RunConfig:
    """Parse key = value lines or a single JSON document into a validated config."""
    return validate_config(RunConfig(**parse_values(text)))


def emit_config(cfg: RunConfig) -> str:
    """Canonical key = value rendering; parse_config(emit_config(c)) == c."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if f.name == "outputs":
            value = ",".join(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_dict(cfg: RunConfig) -> dict:
    """JSON-friendly dict of the config (outputs as a list)."""
    raw = asdict(cfg)
    raw["outputs"] = list(raw["outputs"])
    return raw
