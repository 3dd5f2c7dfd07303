"""
Command-line entry point: `netvariance <verb> [options]`.
"""

import argparse
from dataclasses import replace
import logging
from pathlib import Path
import sys
from typing import List, Optional, Sequence

from .errors import InvalidUsageError, NetVarianceError
from .experiment import (
    DEFAULT_BURN_IN,
    DEFAULT_SAMPLE_COUNT,
    ExperimentConfig,
    analyze_setups,
    compare_conditions,
    export_plotdata,
    fit_setup,
    point_label,
    reproduce_case_study,
    rerun_from_manifest,
    run_montecarlo,
)
from .formats import (
    CASE_STUDY_FILES,
    parse_config,
    read_text,
    write_condition,
    write_curves,
    write_immersion_report,
    write_module_responses,
    write_signal_record,
    write_text,
)
from .immersion import CONFOUNDING_NOTE, check_consistency_conditions

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="network or experiment configuration file")
    common.add_argument("--seed", type=int, help="seed (of run 0 for Monte-Carlo campaigns)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--grid", type=int, help="number of frequency grid points")
    common.add_argument("--runs", type=int, help="Monte-Carlo runs per sweep point")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="netvariance",
        description="Variance analysis of local module identification in dynamic networks.",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)
    verbs.add_parser("simulate", parents=[common], help="simulate a network, write t,w,r CSV")
    verbs.add_parser("immerse", parents=[common], help="immersion report of every setup")
    verbs.add_parser("identify", parents=[common], help="simulate once and fit every setup")
    verbs.add_parser("variance", parents=[common], help="asymptotic curves and conditions")
    montecarlo = verbs.add_parser("montecarlo", parents=[common], help="Monte-Carlo campaign")
    montecarlo.add_argument("--manifest", type=Path, help="re-run the campaign of a manifest")
    case_study = verbs.add_parser("case-study", parents=[common], help="built-in case study")
    case_study.add_argument("--variant", choices=sorted(CASE_STUDY_FILES), required=True)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format=LOG_FORMAT)


def _require_config(args: argparse.Namespace) -> str:
    if args.config is None:
        raise InvalidUsageError(f"`{args.verb}` needs --config.")
    return read_text(args.config)


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_text(_require_config(args))
    overrides = {
        "seed": args.seed,
        "grid_size": args.grid,
        "runs": args.runs,
        "workers": args.workers,
    }
    return replace(config, **{key: value for key, value in overrides.items() if value is not None})


def _simulate(args: argparse.Namespace) -> List[Path]:
    document = parse_config(_require_config(args))
    sample_count, sample_time, burn_in, seed = DEFAULT_SAMPLE_COUNT, 1.0, DEFAULT_BURN_IN, 0
    if document.has_experiment:
        config = _experiment(args)
        sample_count, sample_time = config.sample_count, config.sample_time
        burn_in, seed = config.burn_in, config.seed
    if args.seed is not None:
        seed = args.seed
    record = document.model.simulate(sample_count, sample_time, seed=seed, burn_in=burn_in)
    return [write_signal_record(record, args.out / f"record_seed{seed}.csv")]


def _immerse(args: argparse.Namespace) -> List[Path]:
    config = _experiment(args)
    grid = config.grid()
    written = []
    for setup in config.setups:
        predictor_set = setup.predictor_set(config.target)
        verdict = check_consistency_conditions(config.network, predictor_set)
        status = "consistent" if verdict.satisfied else "NOT consistent"
        sys.stdout.write(f"{setup.name}: {status}; {CONFOUNDING_NOTE}\n")
        for violation in verdict.violations:
            sys.stdout.write(f"  {violation.condition}: {violation.witness}\n")
    for analysis in analyze_setups(config, config.network, grid):
        immersed = analysis.immersed
        for node, transfer in sorted((immersed.lumped_transfers or {}).items()):
            sys.stdout.write(f"  G{config.target[0]}{node}: {transfer.to_text()}\n")
        path = args.out / f"immersion_{analysis.setup.name}.csv"
        written.append(write_immersion_report(immersed, path))
    return written


def _identify(args: argparse.Namespace) -> List[Path]:
    config = _experiment(args)
    grid = config.grid()
    record = config.network.simulate(
        config.sample_count, config.sample_time, seed=config.seed, burn_in=config.burn_in
    )
    j = config.target[0]
    written = []
    for setup in config.setups:
        fit = fit_setup(setup, config.target, record, config.restarts, config.seed)
        written.append(write_text(fit.report(), args.out / f"fit_{setup.name}.txt"))
        ordered = setup.predictor_set(config.target).ordered_inputs()
        responses = {
            f"G{j}{node}": fit.module_response(index, grid) for index, node in enumerate(ordered)
        }
        path = args.out / f"responses_{setup.name}.csv"
        written.append(write_module_responses(responses, grid, path))
    return written


def _variance(args: argparse.Namespace) -> List[Path]:
    config = _experiment(args)
    grid = config.grid()
    written = []
    for gain, model in config.sweep_points():
        label = point_label(gain)
        analyses = analyze_setups(config, model, grid)
        curves = [analysis.asymptotic for analysis in analyses]
        written.append(write_curves(curves, args.out / f"asymptotic_{label}.csv"))
        for name, condition in compare_conditions(analyses).items():
            path = args.out / f"condition_{label}_{name}.csv"
            written.append(write_condition(condition, path))
    return written


def _montecarlo(args: argparse.Namespace) -> List[Path]:
    if args.manifest is not None:
        bundle = rerun_from_manifest(args.manifest)
    else:
        bundle = run_montecarlo(_experiment(args))
    return export_plotdata(bundle, args.out)


def _case_study(args: argparse.Namespace) -> List[Path]:
    bundle = reproduce_case_study(
        args.variant, runs=args.runs, workers=args.workers, grid_size=args.grid, seed=args.seed
    )
    return export_plotdata(bundle, args.out)


VERBS = {
    "simulate": _simulate,
    "immerse": _immerse,
    "identify": _identify,
    "variance": _variance,
    "montecarlo": _montecarlo,
    "case-study": _case_study,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs one verb; returns 0 on success and 1 on a library error (logged to stderr).
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        written = VERBS[args.verb](args)
    except NetVarianceError as error:
        logger.error("%s failed: %s", args.verb, error)
        return 1
    for path in written:
        sys.stdout.write(f"{path}\n")
    return 0
