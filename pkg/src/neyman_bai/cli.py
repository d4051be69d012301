"""Command-line front end: ``neyman-bai {solve,bounds,simulate,sweep}``.

Configs are JSON documents. Arms are numbered from 1 in configs and on the
command line (``h_gna_eba:1``, ``--best-arm 1``); the Python API is 0-based.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 solver failure,
5 I/O failure. Failures print one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .allocation import SolverError, SolverReport, max_min_rate, solve_gna, solve_known_best, solve_oo, star_pairs
from .bounds import chernoff_misid_bound, gna_upper_bound, uniform_lower_bound, worst_case_lower_bound
from .model import BanditInstance, GapBounds, ValidationError, gaps, best_arm, validate_gap_bounds
from .sim import ExperimentConfig, InstanceGenerator, results_to_csv, results_to_json, run_sweep
from .strategies import StrategySpec, build_schedule

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_IO = 5

SEED_ENV = "NEYMAN_BAI_SEED"
CONFIG_KEYS = (
    "K",
    "means",
    "variances",
    "mean_rule",
    "variance_support",
    "gap_bounds",
    "strategies",
    "budgets",
    "trials",
    "seed",
)


class ConfigParseError(ValueError):
    """Malformed document or a value of the wrong type."""


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    config_path: Optional[str] = None
    output_path: Optional[str] = None
    format: str = "json"
    seed_override: Optional[int] = None
    workers: int = 1


# -- config documents ---------------------------------------------------------


def _number_list(doc: dict, key: str, length: Optional[int] = None) -> list[float]:
    value = doc[key]
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise ConfigParseError(f"key {key!r}: expected an array of numbers")
    if length is not None and len(value) != length:
        raise ConfigParseError(f"key {key!r}: expected {length} entries, got {len(value)}")
    return [float(x) for x in value]


def _integer(doc: dict, key: str) -> int:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigParseError(f"key {key!r}: expected an integer")
    return value


def _int_list(doc: dict, key: str) -> list[int]:
    value = doc[key]
    if not isinstance(value, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
        raise ConfigParseError(f"key {key!r}: expected an array of integers")
    return list(value)


def _seed_value(value, source: str) -> int:
    try:
        seed = int(value)
    except (TypeError, ValueError):
        raise ConfigParseError(f"{source}: seed must be an integer") from None
    if isinstance(value, bool) or not 0 <= seed < 2**64:
        raise ValidationError(f"{source}: seed must be an integer in [0, 2**64)")
    return seed


def _load_json(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigParseError("line 1: config must be a JSON object")
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigParseError(f"key {unknown[0]!r}: unknown key (allowed: {', '.join(CONFIG_KEYS)})")
    return doc


def parse_config(text: str, seed_override: Optional[int] = None, default_seed: int = 0) -> ExperimentConfig:
    """Parse and validate a JSON config document.

    The master seed is ``seed_override`` if given, else the document's
    ``seed``, else ``default_seed``.
    """
    doc = _load_json(text)

    if seed_override is not None:
        seed = _seed_value(seed_override, "--seed")
    elif "seed" in doc:
        seed = _seed_value(doc["seed"], "key 'seed'")
    else:
        seed = _seed_value(default_seed, "default seed")

    K = _integer(doc, "K") if "K" in doc else None
    generator = None
    instance = None
    if "variances" in doc:
        if "variance_support" in doc or "mean_rule" in doc:
            raise ConfigParseError("key 'variance_support': give either 'variances' or a generator, not both")
        variances = _number_list(doc, "variances", K)
        if "means" in doc:
            instance = BanditInstance(_number_list(doc, "means", len(variances)), variances)
        else:
            BanditInstance(np.arange(len(variances), dtype=float), variances)  # variance checks only
    elif "variance_support" in doc:
        if K is None:
            raise ConfigParseError("key 'K': required with 'variance_support'")
        if "means" in doc:
            raise ConfigParseError("key 'means': use 'mean_rule' with 'variance_support'")
        rule = doc.get("mean_rule", "fixed-0.75")
        if not isinstance(rule, str):
            raise ConfigParseError("key 'mean_rule': expected a string")
        support = _number_list(doc, "variance_support", 2)
        generator = InstanceGenerator(K, rule, (support[0], support[1]))
        instance = generator.build(seed)
        variances = instance.variances.tolist()
    else:
        raise ConfigParseError("key 'variances': required (or 'variance_support')")

    gap_bounds = None
    if "gap_bounds" in doc:
        lo, hi = _number_list(doc, "gap_bounds", 2)
        gap_bounds = GapBounds(lo, hi)

    strategies = doc.get("strategies", [])
    if not isinstance(strategies, list) or not all(isinstance(s, str) for s in strategies):
        raise ConfigParseError("key 'strategies': expected an array of strategy names")
    specs = tuple(StrategySpec.parse(s) for s in strategies)

    return ExperimentConfig(
        variances=tuple(variances),
        instance=instance,
        generator=generator,
        strategies=specs,
        budgets=tuple(_int_list(doc, "budgets")) if "budgets" in doc else (),
        trials=_integer(doc, "trials") if "trials" in doc else 1,
        master_seed=seed,
        gap_bounds=gap_bounds,
    )


def config_to_dict(config: ExperimentConfig) -> dict:
    """Inverse of :func:`parse_config`: reparsing the dump gives an equivalent config."""
    doc: dict = {"K": config.K}
    if config.generator is not None:
        doc["mean_rule"] = config.generator.mean_rule
        doc["variance_support"] = list(config.generator.variance_support)
    else:
        if config.instance is not None:
            doc["means"] = config.instance.means.tolist()
        doc["variances"] = list(config.variances)
    if config.gap_bounds is not None:
        doc["gap_bounds"] = [config.gap_bounds.delta_lo, config.gap_bounds.delta_hi]
    doc["strategies"] = [s.name for s in config.strategies]
    doc["budgets"] = list(config.budgets)
    doc["trials"] = config.trials
    doc["seed"] = config.master_seed
    return doc


# -- subcommands ---------------------------------------------------------------


def _resolved_gap_bounds(config: ExperimentConfig) -> GapBounds:
    if config.gap_bounds is not None:
        return config.gap_bounds
    if config.instance is None:
        raise ValidationError("bounds need 'gap_bounds' or 'means'")
    g = np.delete(gaps(config.instance), best_arm(config.instance))
    return GapBounds(float(g.min()), float(g.max()))


def bounds_report(config: ExperimentConfig) -> dict:
    """Lower/upper rate bounds, per-arm uniform bounds, and Chernoff bounds for GNA-EBA."""
    gb = _resolved_gap_bounds(config)
    report = solve_gna(config.variances)
    out = {
        "delta_lo": gb.delta_lo,
        "delta_hi": gb.delta_hi,
        "lower_bound": worst_case_lower_bound(gb.delta_hi, config.variances, report),
        "upper_bound": gna_upper_bound(gb.delta_lo, config.variances, report),
        "uniform_lower_bound_per_astar": [
            uniform_lower_bound(gb.delta_hi, config.variances, a) for a in range(config.K)
        ],
        "gna_weights": report.weights.tolist(),
        "chernoff": {},
    }
    if config.instance is not None:
        if config.gap_bounds is not None:
            out["gap_bounds_consistent"] = validate_gap_bounds(config.instance, config.gap_bounds)
        if config.budgets:
            bound = []
            for T in config.budgets:
                counts = build_schedule(report.weights, T).counts
                bound.append(chernoff_misid_bound(config.instance, counts / T, T))
            out["chernoff"] = {"strategy": "gna_eba", "budgets": list(config.budgets), "bound": bound}
    return out


def solve_request(
    variances: Sequence[float],
    best_arm_1based: Optional[int] = None,
    oo_means: Optional[Sequence[float]] = None,
) -> SolverReport:
    if best_arm_1based is not None and oo_means is not None:
        raise ValidationError("--best-arm and --oo are exclusive")
    if oo_means is not None:
        return solve_oo(BanditInstance(oo_means, variances))
    if best_arm_1based is not None:
        a = best_arm_1based - 1
        w = solve_known_best(variances, a)
        objective = max_min_rate(w, variances, star_pairs(len(w), a))
        return SolverReport(weights=w, objective=objective, iterations=0, converged=True, residual=0.0)
    return solve_gna(variances)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def write_output(text: str, path: Optional[str]) -> None:
    """Write to ``path`` atomically (temp file in the same directory, then rename), or stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_config(cli: CliConfig) -> ExperimentConfig:
    if cli.config_path is None:
        raise ConfigParseError("--config is required")
    with open(cli.config_path, encoding="utf-8") as fh:
        text = fh.read()
    env = os.environ.get(SEED_ENV)
    default = _seed_value(env, f"${SEED_ENV}") if env not in (None, "") else 0
    return parse_config(text, seed_override=cli.seed_override, default_seed=default)


def _render_results(results, fmt: str) -> str:
    return results_to_csv(results) if fmt == "csv" else results_to_json(results)


def run_cli(cli: CliConfig, solve_args: Optional[argparse.Namespace] = None) -> int:
    """Run one subcommand; raises on failure (see :func:`main` for exit codes)."""
    if cli.subcommand == "solve":
        a = solve_args
        if a.config is not None:
            cfg = _read_config(cli)
            variances = cfg.variances
            means = cfg.instance.means.tolist() if (a.oo and cfg.instance is not None) else None
        else:
            if a.variances is None:
                raise ConfigParseError("solve needs --variances or --config")
            variances = a.variances
            means = a.means
        if a.oo and means is None:
            raise ConfigParseError("--oo needs --means (or means in the config)")
        if a.means is not None and not a.oo:
            raise ConfigParseError("--means is only used with --oo")
        report = solve_request(variances, a.best_arm, means if a.oo else None)
        write_output(_json_text(report.to_dict()), cli.output_path)
    elif cli.subcommand == "bounds":
        write_output(_json_text(bounds_report(_read_config(cli))), cli.output_path)
    elif cli.subcommand in ("simulate", "sweep"):
        config = _read_config(cli)
        if not config.strategies or not config.budgets:
            raise ValidationError("simulation needs 'strategies' and 'budgets'")
        results = run_sweep(config, workers=cli.workers)
        write_output(_render_results(results, cli.format), cli.output_path)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigParseError(f"unknown subcommand {cli.subcommand!r}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line JSON instead of usage text
        _emit_error(EXIT_PARSE, "parse", message)
        sys.exit(EXIT_PARSE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neyman-bai", description="Fixed-budget best arm identification with Neyman-type allocations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, default_format):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.add_argument("--seed", type=int, help=f"master seed; overrides the config and ${SEED_ENV}")
        p.add_argument("--workers", type=int, default=1, help="worker processes for simulation")

    solve = sub.add_parser("solve", help="target allocation ratio")
    common(solve, "json")
    solve.add_argument("--variances", type=float, nargs="+")
    solve.add_argument("--best-arm", type=int, help="known best arm (1-based): closed-form allocation")
    solve.add_argument("--oo", action="store_true", help="full-information allocation; needs --means")
    solve.add_argument("--means", type=float, nargs="+")

    common(sub.add_parser("bounds", help="rate bounds"), "json")
    common(sub.add_parser("simulate", help="Monte Carlo estimates, JSON by default"), "json")
    common(sub.add_parser("sweep", help="Monte Carlo sweep, CSV by default"), "csv")
    return parser


def _emit_error(code: int, kind: str, message: str) -> None:
    record = {"error": kind, "exit_code": code, "message": " ".join(str(message).split())}
    sys.stderr.write(json.dumps(record) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    if args.subcommand in ("solve", "bounds") and args.format != "json":
        _emit_error(EXIT_PARSE, "parse", f"{args.subcommand} only writes JSON")
        return EXIT_PARSE
    if args.workers < 1:
        _emit_error(EXIT_VALIDATION, "validation", "--workers must be >= 1")
        return EXIT_VALIDATION
    cli = CliConfig(
        subcommand=args.subcommand,
        config_path=args.config,
        output_path=args.out,
        format=args.format,
        seed_override=args.seed,
        workers=args.workers,
    )
    try:
        return run_cli(cli, args)
    except ConfigParseError as exc:
        _emit_error(EXIT_PARSE, "parse", str(exc))
        return EXIT_PARSE
    except ValidationError as exc:
        _emit_error(EXIT_VALIDATION, "validation", str(exc))
        return EXIT_VALIDATION
    except SolverError as exc:
        _emit_error(EXIT_SOLVER, "solver", str(exc))
        return EXIT_SOLVER
    except OSError as exc:
        _emit_error(EXIT_IO, "io", str(exc))
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
