"""Command-line front end: subcommands over a shared run configuration."""

from __future__ import annotations

import argparse
import json
import sys

from . import pipeline
from .config import ConfigError, OUTPUT_KINDS, RunConfig, parse_values, validate_config
from .engine import ConvergenceError
from .model import ResourceLimitError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

# each subcommand pins the set of requested outputs
_SUBCOMMAND_OUTPUTS = {
    "evolve": ("trace",),
    "dqpt": ("trace", "rate"),
    "spectral": ("trace", "spectral"),
    "entanglement": ("trace", "entanglement"),
    "squeeze": ("trace", "squeezing"),
    "perturb": ("perturbation",),
    "sample": ("trace", "rate"),
    "sweep": None,  # taken from the template config
}


def _add_common(parser: argparse.ArgumentParser, config_required: bool = True):
    parser.add_argument("--config", required=config_required, help="path to key=value or JSON config")
    parser.add_argument("--out", help="output directory (overrides config output_dir)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--shots", type=int, help="override the config shot count")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="table format for the trace outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqpt",
        description=(
            "Quench simulator and analysis toolkit for long-range transverse-field "
            "Ising chains. Defaults: n_steps=200, time_max=3, method=krylov; "
            f"output kinds: {', '.join(OUTPUT_KINDS)}."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("evolve", "propagate the quench and emit the observable trace"),
        ("dqpt", "trace plus rate functions and critical-time extraction"),
        ("spectral", "energy-resolved weight and magnetization map"),
        ("entanglement", "trace plus half-chain entropy"),
        ("squeeze", "trace plus exact spin squeezing"),
        ("perturb", "closed-form weak-coupling overlay"),
        ("sample", "finite-shot measurement emulation along the trace"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "dqpt":
            p.add_argument("--trace", help="analyze an existing trace CSV instead of simulating")

    p = sub.add_parser("sweep", help="run one point per axis value in parallel")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=("j_over_b", "alpha", "n_spins"))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--workers", type=int, default=None, help="process pool size")
    return parser


def _load_config(args) -> RunConfig:
    with open(args.config, encoding="utf-8") as fh:
        values = parse_values(fh.read())
    if args.out is not None:
        values["output_dir"] = args.out
    if args.seed is not None:
        values["seed"] = args.seed
    if getattr(args, "shots", None) is not None:
        values["shots"] = args.shots
    wanted = _SUBCOMMAND_OUTPUTS.get(args.command)
    if wanted is not None:
        values["outputs"] = wanted
    return validate_config(RunConfig(**values))


def _axis_values(axis: str, text: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("sweep needs at least one axis value", key="values")
    cast = int if axis == "n_spins" else float
    try:
        return [cast(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad axis value ({exc})", key="values") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "sample" and cfg.shots < 1:
            raise ConfigError("the sample subcommand needs shots >= 1", key="shots")

        if args.command == "sweep":
            values = _axis_values(args.axis, args.values)
            aggregate = pipeline.sweep(cfg, args.axis, values, workers=args.workers)
            print(aggregate["file"])
            return EXIT_PARTIAL if aggregate["failed"] else EXIT_OK

        if args.command == "dqpt" and getattr(args, "trace", None):
            summary = pipeline.analyze_trace(args.trace)
            print(json.dumps(summary, indent=2, sort_keys=True))
            return EXIT_OK

        summary = pipeline.run(cfg)
        if args.format == "json":
            _convert_tables_to_json(summary)
        print(summary["files"]["summary"])
        return EXIT_OK
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, ResourceLimitError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _convert_tables_to_json(summary: dict) -> None:
    """Rewrite emitted CSV tables as JSON documents next to them."""
    for kind, path in list(summary["files"].items()):
        if not path.endswith(".csv"):
            continue
        columns, table, header = pipeline.read_csv(path)
        doc = {
            "kind": kind,
            "metadata": header,
            "columns": columns,
            "data": {c: [None if v != v else v for v in table[c].tolist()] for c in columns},
        }
        json_path = path[:-4] + ".json"
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")
        summary["files"][kind] = json_path


if __name__ == "__main__":
    raise SystemExit(main())
