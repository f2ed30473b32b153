"""
Command-line front-end: analytic curves, Monte-Carlo runs and sweeps
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import yaml
from pydantic import BaseModel, ValidationError

from core.config import Settings, reload_settings, settings
from core.errors import CacheSimError, ConfigurationError
from core.network import CacheNetworkConfig
from services.analytics import rate_uncoded_analytic
from services.montecarlo import (
    REPORTED_AS,
    ExperimentSpec,
    GraphSource,
    RatePoint,
    RateScheme,
    RateSource,
    Scheme,
    SweepAxis,
    analytic_rate,
    run_sweep,
    simulated_rate,
    sweep_config,
)
from cli.output import OutputRow, emit, error_row, make_row

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# CLI names of the analytic curves
ANALYTIC_SCHEMES: Dict[str, RateScheme] = {
    "cfcm": RateScheme.CFCM,
    "cfcc": RateScheme.CFCC,
    "cscc-approx": RateScheme.CSCC,
    "cscc": RateScheme.CSCC,
    "csc-opt": RateScheme.CSC_OPT,
    "uncoded": RateScheme.UNCODED,
    "uncoded-approx": RateScheme.UNCODED_APPROX,
    "centralized": RateScheme.CENTRALIZED,
}
SIMULATED_SCHEMES = [s.value for s in Scheme]

# Option defaults applied after the config file
DEFAULTS = {
    "delta": 1,
    "trials": 1000,
    "seed": 0,
    "source": GraphSource.EXACT.value,
    "format": "csv",
}


class OptionFile(BaseModel):
    """Option defaults read from --config; values are coerced like their flags"""

    K: Optional[int] = None
    N: Optional[int] = None
    M: Optional[int] = None
    delta: Optional[int] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    threads: Optional[int] = None
    ode_step: Optional[float] = None
    scheme: Optional[str] = None
    schemes: Optional[Union[List[str], str]] = None
    source: Optional[str] = None
    axis: Optional[str] = None
    values: Optional[Union[List[int], int, str]] = None
    format: Optional[str] = None
    out: Optional[str] = None
    dump_trials: Optional[str] = None
    analytic_only: Optional[bool] = None
    fixed_ratio: Optional[bool] = None


CONFIG_KEYS = set(OptionFile.model_fields)


class UsageError(ConfigurationError):
    """Invalid or missing command-line options"""


def setup_logging(config: Settings = settings):
    """Configure logging; tables own stdout, so logs go to stderr or a file"""
    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    level = getattr(logging, config.log_level.upper(), logging.INFO)

    if config.log_file:
        logging.basicConfig(level=level, format=log_format, filename=config.log_file, filemode='a')
    else:
        logging.basicConfig(level=level, format=log_format, stream=sys.stderr)


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def _instance_options(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="YAML file of option defaults (keys are option names)")
    parser.add_argument("--K", type=int, help="number of caches")
    parser.add_argument("--N", type=int, help="library size in files")
    parser.add_argument("--M", type=int, help="cache capacity in files")
    parser.add_argument("--delta", type=int, help="subfiles per file (default 1)")
    parser.add_argument("--ode-step", dest="ode_step", type=float, help="RK4 step for the clique cover ODE")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--out", help="output file (default stdout)")


def _trial_options(parser: argparse.ArgumentParser):
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per point (default 1000)")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--source", choices=[s.value for s in GraphSource])
    parser.add_argument("--threads", type=int, help="worker processes (default CACHE_SIM_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.app_name, description="Decentralized coded caching simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.version}")
    parser.add_argument("--settings", help="YAML file of runtime settings; CACHE_SIM_* variables take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    analytic = sub.add_parser("analytic", help="closed-form and ODE rates")
    analytic.add_argument("--scheme", choices=sorted(ANALYTIC_SCHEMES))
    _instance_options(analytic)
    analytic.set_defaults(handler=cmd_analytic)

    simulate = sub.add_parser("simulate", help="Monte-Carlo estimate of one configuration")
    simulate.add_argument("--scheme", choices=SIMULATED_SCHEMES)
    _instance_options(simulate)
    _trial_options(simulate)
    simulate.add_argument("--dump-trials", dest="dump_trials", help="per-trial CSV path")
    simulate.set_defaults(handler=cmd_simulate)

    sweep = sub.add_parser("sweep", help="simulated and analytic rates over one parameter")
    sweep.add_argument("--axis", choices=[a.value for a in SweepAxis])
    sweep.add_argument("--values", help="comma-separated parameter values")
    sweep.add_argument("--schemes", help="comma-separated schemes (default cfcc, cscc for --axis delta)")
    sweep.add_argument("--analytic-only", dest="analytic_only", action="store_true", default=None)
    sweep.add_argument("--fixed-ratio", dest="fixed_ratio", action="store_true", default=None,
                       help="keep K/N and M/N constant when sweeping K")
    _instance_options(sweep)
    _trial_options(sweep)
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def load_option_file(path: str) -> Dict[str, object]:
    """Option defaults from a YAML mapping"""
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a mapping of option names to values")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown option(s) in {path}: {', '.join(unknown)}")
    try:
        return OptionFile.model_validate(data).model_dump(exclude_unset=True)
    except ValidationError as e:
        raise UsageError(f"invalid value in {path}: {e}") from e


def resolve_options(args: argparse.Namespace) -> argparse.Namespace:
    """Command-line flags over config file values over built-in defaults"""
    file_values = load_option_file(args.config) if getattr(args, "config", None) else {}
    for key, value in file_values.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    if getattr(args, "format", None) not in (None, "csv", "json"):
        raise UsageError(f"unknown output format {args.format}")
    missing = [name for name in ("K", "N", "M") if getattr(args, name, None) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join('--' + m for m in missing)}")
    return args


def _network(args: argparse.Namespace) -> CacheNetworkConfig:
    return CacheNetworkConfig(K=args.K, N=args.N, M=args.M, delta=args.delta)


def _int_list(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated integers, got {text!r}") from None


def _name_list(text) -> List[str]:
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _uncoded_reference(cfg: CacheNetworkConfig) -> float:
    return rate_uncoded_analytic(cfg.K, cfg.N, cfg.M)


def _analytic_point(name: str, cfg: CacheNetworkConfig, ode_step: Optional[float]) -> RatePoint:
    scheme = ANALYTIC_SCHEMES[name]
    if scheme in (RateScheme.CFCM, RateScheme.CFCC) and cfg.delta != 1:
        raise ConfigurationError(f"{name} is file caching; use cscc-approx for delta > 1")
    return analytic_rate(scheme, cfg, ode_step=ode_step)


def _workers(args: argparse.Namespace) -> Optional[int]:
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be positive")
    return args.threads


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_analytic(args: argparse.Namespace) -> List[OutputRow]:
    """One analytic rate row for the requested curve"""
    if args.scheme is None:
        raise UsageError("--scheme is required")
    if args.scheme not in ANALYTIC_SCHEMES:
        raise UsageError(f"unknown analytic scheme {args.scheme}")
    cfg = _network(args)
    point = _analytic_point(args.scheme, cfg, args.ode_step)
    return [make_row(point, _uncoded_reference(cfg))]


def cmd_simulate(args: argparse.Namespace) -> List[OutputRow]:
    """One Monte-Carlo row with its standard error"""
    if args.scheme is None:
        raise UsageError("--scheme is required")
    spec = ExperimentSpec(
        cfg=_network(args),
        scheme=Scheme(args.scheme),
        trials=args.trials,
        master_seed=args.seed,
        graph_source=GraphSource(args.source),
    )
    dump_path = Path(args.dump_trials) if args.dump_trials else None
    point = simulated_rate(spec, workers=_workers(args), dump_path=dump_path)
    return [make_row(point, _uncoded_reference(spec.cfg))]


def _analytic_sweep_rows(name: str, base: CacheNetworkConfig, axis: SweepAxis, values: Sequence[int],
                         fixed_ratio: bool, ode_step: Optional[float]) -> List[OutputRow]:
    rows = []
    for value in values:
        try:
            cfg = sweep_config(base, axis, value, fixed_ratio)
            rows.append(make_row(_analytic_point(name, cfg, ode_step), _uncoded_reference(cfg)))
        except (CacheSimError, ValueError) as e:
            logger.error(f"Analytic point {name} {axis.value}={value} failed: {e}")
            rows.append(error_row(ANALYTIC_SCHEMES[name].value, RateSource.ANALYTIC.value,
                                  *_point_shape(base, axis, value), str(e)))
    return rows


def _point_shape(base: CacheNetworkConfig, axis: SweepAxis, value: int):
    shape = {"K": base.K, "N": base.N, "M": base.M, "delta": base.delta}
    shape[axis.value] = value
    return shape["K"], shape["N"], shape["M"], shape["delta"]


def _simulated_sweep_rows(name: str, args: argparse.Namespace, base: CacheNetworkConfig,
                          axis: SweepAxis, values: Sequence[int]) -> List[OutputRow]:
    scheme = Scheme(name)
    source = GraphSource(args.source)
    spec = ExperimentSpec.model_construct(
        cfg=base, scheme=scheme, trials=args.trials, master_seed=args.seed,
        graph_source=GraphSource.ASYMPTOTIC if name.endswith("-ga") else source,
    )
    rows = []
    for point in run_sweep(spec, axis, values, fixed_ratio=bool(args.fixed_ratio),
                           workers=_workers(args), ode_step=args.ode_step):
        if point.error is not None:
            rows.append(error_row(REPORTED_AS[scheme].value, RateSource.MONTE_CARLO.value,
                                  *_point_shape(base, axis, point.value), point.error))
            continue
        cfg = sweep_config(base, axis, point.value, bool(args.fixed_ratio))
        reference = _uncoded_reference(cfg)
        rows.append(make_row(point.simulated, reference))
        rows.append(make_row(point.analytic, reference))
    return rows


def cmd_sweep(args: argparse.Namespace) -> List[OutputRow]:
    """Rows per (scheme, value): Monte-Carlo estimate then analytic companion"""
    if args.axis is None or args.values is None:
        raise UsageError("--axis and --values are required")
    axis = SweepAxis(args.axis)
    values = _int_list(args.values)
    if not values:
        raise UsageError("--values must name at least one value")
    default_schemes = "cscc" if axis == SweepAxis.DELTA else "cfcc"
    names = _name_list(args.schemes or default_schemes)
    for name in names:
        if name not in ANALYTIC_SCHEMES and name not in SIMULATED_SCHEMES:
            raise UsageError(f"unknown scheme {name}")

    # The base instance is checked for usage errors; swept values are checked per point
    try:
        base = _network(args)
    except ValidationError as e:
        raise UsageError(f"invalid base configuration: {e}") from e

    rows: List[OutputRow] = []
    for name in names:
        simulated = name in SIMULATED_SCHEMES and not args.analytic_only
        logger.info(f"Sweeping {axis.value} over {values} for {name}")
        if simulated:
            rows.extend(_simulated_sweep_rows(name, args, base, axis, values))
        else:
            rows.extend(_analytic_sweep_rows(_analytic_name(name), base, axis, values,
                                             bool(args.fixed_ratio), args.ode_step))
    return rows


def _analytic_name(name: str) -> str:
    if name in ANALYTIC_SCHEMES:
        return name
    return REPORTED_AS[Scheme(name)].value


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, run and emit; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.settings:
            reload_settings(args.settings)
        setup_logging(settings)
        args = resolve_options(args)
        rows = args.handler(args)
        emit(rows, out=args.out, fmt=args.format)
    except (ValidationError, ConfigurationError) as e:
        logger.error(f"Invalid options: {e}")
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CacheSimError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"{parser.prog} {args.command}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as e:
        # option values taken from a config file bypass argparse choices
        logger.error(f"Invalid option value: {e}")
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK
