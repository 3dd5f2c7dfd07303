"""
Seeded Monte-Carlo campaigns comparing identification setups of one module.

For every sweep point the same data realization (run `i` uses seed `seed + i`) is
fitted with every setup; the spread of the estimated responses is then held
against the analytic covariance curves and the comparison condition computed from
the true network.
"""

from dataclasses import dataclass, field, replace
from hashlib import sha256
import logging
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidUsageError, NetVarianceError
from .formats import (
    PathLike,
    case_study_text,
    format_network,
    grid_from_size,
    parse_config,
    read_manifest,
    write_condition,
    write_curves,
    write_manifest,
    write_table,
    write_text,
)
from .identify import (
    BJStructure,
    FitResult,
    InputOrders,
    PEMOptions,
    fit_pem,
    module_response_covariance,
    residual_whiteness,
)
from .immersion import ImmersedNetwork, PredictorSet, immerse
from .network import DEFAULT_GRID_SIZE, FrequencyGrid, NetworkModel, SignalRecord, SignalResponses
from .utils import coerce_to_list, parse_float_list, parse_int_list, validate_float, validate_int
from .variance import (
    ConditionCurve,
    CovarianceCurve,
    CurveLabel,
    OptimalityComparison,
    SpectralBlock,
    asymptotic_cov_full,
    asymptotic_cov_immersed,
    build_spectral_block,
    comparison_condition,
    d_optimality_compare,
    e_optimality_compare,
    information_log_determinant,
    predictor_ordering,
    sample_covariance,
)

logger = logging.getLogger(__name__)

DEFAULT_BURN_IN = 1000
DEFAULT_SAMPLE_COUNT = 10000
DEFAULT_RUNS = 100
FAILURE_LIMIT = 0.2
EXPORT_KINDS = ("sample", "condition", "curves", "optimality", "manifest", "all")


@dataclass(frozen=True)
class SetupConfig:
    """
    One identification setup: the predictor inputs and the model orders.

    Args:
        name: unique name of the setup.
        predictors: the predictor input nodes `D`.
        inputs: the module orders of every predictor input.
        nc: free coefficients of the noise numerator.
        nd: free coefficients of the noise denominator.
    """

    name: str
    predictors: Tuple[int, ...]
    inputs: Dict[int, InputOrders] = field(default_factory=dict)
    nc: int = 0
    nd: int = 0

    def __post_init__(self) -> None:
        if not self.name or any(character.isspace() for character in self.name):
            raise InvalidUsageError(f"Setup name `{self.name}` must be a single word.")
        coerce_to_list(list(self.predictors), int, min_size=1)
        validate_int(self.nc, field_name="nc", min_value=0)
        validate_int(self.nd, field_name="nd", min_value=0)
        missing = [node for node in self.predictors if node not in self.inputs]
        if missing:
            raise InvalidUsageError(f"Setup `{self.name}` has no orders for inputs {missing}.")

    def predictor_set(self, target: Tuple[int, int]) -> PredictorSet:
        return PredictorSet(target[0], target[1], self.predictors)

    def structure(self, target: Tuple[int, int]) -> BJStructure:
        """
        The model structure with the inputs in predictor order (target input first).
        """
        ordered = self.predictor_set(target).ordered_inputs()
        return BJStructure([self.inputs[node] for node in ordered], nc=self.nc, nd=self.nd)

    def to_lines(self) -> List[str]:
        predictors = ",".join(str(node) for node in self.predictors)
        lines = [f"setup {self.name} predictors={predictors} nc={self.nc} nd={self.nd}"]
        for node in self.predictors:
            orders = self.inputs[node]
            lines.append(
                f"input {self.name} {node} nb={orders.nb} nf={orders.nf} delay={orders.delay}"
            )
        return lines


@dataclass(frozen=True)
class SweepConfig:
    """
    A gain sweep: the module on `edge` (a `(from, to)` pair) is the unit-gain
    template, multiplied by every gain in turn.
    """

    edge: Tuple[int, int]
    gains: Tuple[float, ...]

    def __post_init__(self) -> None:
        coerce_to_list(list(self.gains), (int, float), min_size=1)
        for gain in self.gains:
            validate_float(gain, field_name="gain", min_value=0.0, strict=True)

    def to_line(self) -> str:
        gains = ",".join(repr(float(gain)) for gain in self.gains)
        return f"sweep edge={self.edge[0]},{self.edge[1]} gains=[{gains}]"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a Monte-Carlo campaign needs. The first setup is the reference every
    other setup is compared against.

    Args:
        network: the true network.
        target: the target module as `(j, k)`.
        setups: the setups to compare.
        sample_count: the data length `N`.
        sample_time: `T_s` in seconds.
        burn_in: leading samples dropped from every simulation.
        runs: the number of Monte-Carlo runs per sweep point.
        seed: the seed of run 0 (run `i` uses `seed + i`).
        grid_size: the number of frequency grid points.
        workers: the number of worker processes.
        restarts: optimizer starts per fit.
        sweep: the optional gain sweep.
        sample_figure: file prefix of the sample-covariance exports.
        condition_figure: file prefix of the condition exports.
    """

    network: NetworkModel
    target: Tuple[int, int]
    setups: Tuple[SetupConfig, ...]
    sample_count: int = DEFAULT_SAMPLE_COUNT
    sample_time: float = 1.0
    burn_in: int = DEFAULT_BURN_IN
    runs: int = DEFAULT_RUNS
    seed: int = 0
    grid_size: int = DEFAULT_GRID_SIZE
    workers: int = 1
    restarts: int = 1
    sweep: Optional[SweepConfig] = None
    sample_figure: str = "sample"
    condition_figure: str = "condition"

    def __post_init__(self) -> None:
        validate_int(self.sample_count, field_name="N", min_value=1)
        validate_float(self.sample_time, field_name="Ts", min_value=0.0, strict=True)
        validate_int(self.burn_in, field_name="burn_in", min_value=0)
        validate_int(self.runs, field_name="runs", min_value=1)
        validate_int(self.seed, field_name="seed", min_value=0)
        validate_int(self.grid_size, field_name="grid", min_value=2)
        validate_int(self.workers, field_name="workers", min_value=1)
        validate_int(self.restarts, field_name="restarts", min_value=1)
        coerce_to_list(list(self.setups), SetupConfig, min_size=1)
        names = [setup.name for setup in self.setups]
        if len(set(names)) != len(names):
            raise InvalidUsageError(f"Setup names must be unique, got {names}.")
        j, k = self.target
        if not self.network.has_module(j, k):
            raise InvalidUsageError(f"The target module G{j}{k} does not exist.")
        if self.sweep is not None:
            source, destination = self.sweep.edge
            if not self.network.has_module(destination, source):
                raise InvalidUsageError(
                    f"The swept edge {source}->{destination} does not exist."
                )

    @staticmethod
    def from_text(text: str) -> "ExperimentConfig":
        """
        Parses a configuration with an `[experiment]` stanza.

        Throws:
            InvalidUsageError: on a missing stanza, unknown keys or malformed values.
        """
        document = parse_config(text)
        if not document.has_experiment:
            raise InvalidUsageError("The configuration has no [experiment] stanza.")
        settings: Dict[str, object] = {}
        target = None
        sweep = None
        setups: Dict[str, Dict[str, object]] = {}
        integer_keys = {
            "N": "sample_count",
            "burn_in": "burn_in",
            "runs": "runs",
            "seed": "seed",
            "grid": "grid_size",
            "workers": "workers",
            "restarts": "restarts",
        }
        for line in document.experiment:
            if line.keyword in integer_keys:
                settings[integer_keys[line.keyword]] = line.integer(0, line.keyword)
            elif line.keyword == "Ts":
                settings["sample_time"] = line.real_at(0, "Ts")
            elif line.keyword in ("sample_figure", "condition_figure"):
                settings[line.keyword] = line.tokens[0]
            elif line.keyword == "target":
                target = (line.integer(0, "output node"), line.integer(1, "input node"))
            elif line.keyword == "sweep":
                options = line.options()
                edge = parse_int_list(options.get("edge", ""), "edge")
                if len(edge) != 2:
                    raise line.error("edge must be <from>,<to>")
                gains = parse_float_list(options.get("gains", "[]"), "gains")
                sweep = SweepConfig(edge=(edge[0], edge[1]), gains=tuple(gains))
            elif line.keyword == "setup":
                if not line.tokens:
                    raise line.error("missing setup name")
                predictors = parse_int_list(line.options(1).get("predictors", ""), "predictors")
                setups[line.tokens[0]] = {
                    "predictors": tuple(predictors),
                    "inputs": {},
                    **line.integer_options(1, ("nc", "nd"), skip=("predictors",)),
                }
            elif line.keyword == "input":
                if not line.tokens or line.tokens[0] not in setups:
                    raise line.error("input before its setup")
                node = line.integer(1, "input node")
                options = line.integer_options(2, ("nb", "nf", "delay"))
                setups[line.tokens[0]]["inputs"][node] = InputOrders(**options)
            else:
                raise line.error("unknown experiment setting")
        if target is None:
            raise InvalidUsageError("The experiment has no `target <j> <k>` line.")
        return ExperimentConfig(
            network=document.model,
            target=target,
            setups=tuple(SetupConfig(name=name, **values) for name, values in setups.items()),
            sweep=sweep,
            **settings,
        )

    def to_text(self) -> str:
        """
        Writes the configuration; `from_text` reads it back to an equal config.
        """
        lines = [
            "[experiment]",
            f"N={self.sample_count}",
            f"Ts={self.sample_time!r}",
            f"burn_in={self.burn_in}",
            f"runs={self.runs}",
            f"seed={self.seed}",
            f"grid={self.grid_size}",
            f"workers={self.workers}",
            f"restarts={self.restarts}",
            f"sample_figure={self.sample_figure}",
            f"condition_figure={self.condition_figure}",
            f"target {self.target[0]} {self.target[1]}",
        ]
        if self.sweep is not None:
            lines.append(self.sweep.to_line())
        for setup in self.setups:
            lines.extend(setup.to_lines())
        return format_network(self.network) + "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """
        SHA-256 of the configuration text, worker count excluded.
        """
        return sha256(replace(self, workers=1).to_text().encode("utf-8")).hexdigest()

    def grid(self) -> FrequencyGrid:
        return grid_from_size(self.grid_size)

    def sweep_points(self) -> List[Tuple[Optional[float], NetworkModel]]:
        """
        `(gain, network)` for every sweep point; `gain` is `None` without a sweep.
        """
        if self.sweep is None:
            return [(None, self.network)]
        source, destination = self.sweep.edge
        template = self.network.module(destination, source)
        return [
            (gain, self.network.with_module(destination, source, template.scaled(gain)))
            for gain in self.sweep.gains
        ]


def load_experiment(path: PathLike) -> ExperimentConfig:
    return ExperimentConfig.from_text(Path(path).read_text(encoding="utf-8"))


def point_label(gain: Optional[float]) -> str:
    return "nominal" if gain is None else f"gain{gain:g}"


class SetupAnalysis:
    """
    The analytic view of one setup on one network: its spectral block, noise
    spectrum and asymptotic covariance curve of the target module.
    """

    def __init__(
        self,
        setup: SetupConfig,
        predictor_set: PredictorSet,
        immersed: ImmersedNetwork,
        block: SpectralBlock,
        noise_spectrum: np.ndarray,
        asymptotic: CovarianceCurve,
    ) -> "SetupAnalysis":
        self.setup = setup
        self.predictor_set = predictor_set
        self.immersed = immersed
        self.block = block
        self.noise_spectrum = noise_spectrum
        self.asymptotic = asymptotic

    @property
    def n_params(self) -> int:
        return self.asymptotic.n_params

    @property
    def label(self) -> CurveLabel:
        return self.asymptotic.label


def analyze_setups(
    config: ExperimentConfig, model: NetworkModel, grid: FrequencyGrid
) -> List[SetupAnalysis]:
    """
    Asymptotic covariance curves of the target module for every setup, computed from
    the exact spectra of `model`. A curve's `n_params` is the length of the setup's
    parameter vector, noise model included.

    Throws:
        ConsistencyError: if a setup's predictor set violates the path or loop
            conditions.
        NoExcitationMarginError: if a Schur complement vanishes on the grid.
    """
    responses = SignalResponses.from_model(model, grid)
    analyses = []
    for setup in config.setups:
        predictor_set = setup.predictor_set(config.target)
        immersed = immerse(model, predictor_set, grid)
        rows = responses.with_rows(immersed.signal_rows())
        ordering = predictor_ordering(predictor_set.ordered_inputs(), immersed.innovation_tag())
        block = build_spectral_block(rows, ordering)
        n_params = setup.structure(config.target).parameter_count
        if predictor_set.removed_inputs(model):
            noise = immersed.noise_spectrum
            curve = asymptotic_cov_immersed(block, n_params, config.sample_count, noise)
        else:
            noise = immersed.phi_v
            curve = asymptotic_cov_full(block, n_params, config.sample_count, noise)
        analyses.append(SetupAnalysis(setup, predictor_set, immersed, block, noise, curve))
    return analyses


def compare_conditions(analyses: Sequence[SetupAnalysis]) -> Dict[str, ConditionCurve]:
    """
    The comparison condition of every setup against the first one.
    """
    reference = analyses[0]
    return {
        other.setup.name: comparison_condition(
            reference.block,
            reference.n_params,
            other.block,
            other.n_params,
            reference.noise_spectrum,
            other.noise_spectrum,
        )
        for other in analyses[1:]
    }


@dataclass
class SetupFit:
    """
    What a worker keeps of one fit.
    """

    theta: np.ndarray
    covariance: np.ndarray
    module_covariance: np.ndarray
    response: np.ndarray
    delta: np.ndarray
    iterations: int
    converged: bool
    white: bool
    record_digest: str


@dataclass
class RunOutcome:
    point: int
    run: int
    seed: int
    digest: str = ""
    fits: Dict[str, SetupFit] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class _RunTask:
    point: int
    run: int
    seed: int
    model: NetworkModel
    target: Tuple[int, int]
    setups: Tuple[SetupConfig, ...]
    sample_count: int
    sample_time: float
    burn_in: int
    restarts: int
    grid: FrequencyGrid


def fit_setup(
    setup: SetupConfig,
    target: Tuple[int, int],
    record: SignalRecord,
    restarts: int = 1,
    seed: int = 0,
) -> FitResult:
    """
    Fits one setup on a record by the direct method: the output is `w_j - r_j` and
    the inputs are the predictor node signals, target input first.
    """
    j = target[0]
    y = record.signal(f"w{j}") - record.signal(f"r{j}")
    inputs = [record.signal(f"w{node}") for node in setup.predictor_set(target).ordered_inputs()]
    options = PEMOptions(restarts=restarts, seed=seed)
    return fit_pem(setup.structure(target), y, inputs, options)


def _run_single(task: _RunTask) -> RunOutcome:
    outcome = RunOutcome(point=task.point, run=task.run, seed=task.seed)
    try:
        record = task.model.simulate(
            task.sample_count, task.sample_time, seed=task.seed, burn_in=task.burn_in
        )
    except NetVarianceError as error:
        outcome.error = f"simulation: {error}"
        return outcome
    outcome.digest = record.digest()
    for setup in task.setups:
        try:
            fit = fit_setup(setup, task.target, record, task.restarts, task.seed)
            outcome.fits[setup.name] = SetupFit(
                theta=fit.theta,
                covariance=fit.covariance,
                module_covariance=fit.module_covariance_block(0),
                response=fit.module_response(0, task.grid),
                delta=module_response_covariance(fit, 0, task.grid).values,
                iterations=fit.iterations,
                converged=fit.converged,
                white=residual_whiteness(fit.residuals).passed,
                record_digest=record.digest(),
            )
        except NetVarianceError as error:
            outcome.error = f"{setup.name}: {error}"
            logger.debug("run %d (seed %d) failed: %s", task.run, task.seed, outcome.error)
            return outcome
    logger.debug("run %d (seed %d) done", task.run, task.seed)
    return outcome


@dataclass
class FitSummary:
    """
    Fit diagnostics of one setup over the successful runs of a sweep point.

    `calibration` holds, per parameter, the Monte-Carlo variance of the estimates
    divided by the mean predicted variance (diagonal of `P_theta`).
    """

    runs_used: int
    converged: int
    mean_iterations: float
    white: int
    mean_theta: List[float]
    calibration: Optional[List[float]]


class SetupResult:
    """
    All curves of one setup at one sweep point.

    Args:
        name: the setup name.
        analysis: the analytic view (asymptotic curve and spectral block).
        sample: the sample covariance, or `None` with fewer than 2 successful runs.
        delta: the mean delta-method curve.
        responses: the estimated target responses, shape `(runs, F)`.
        summary: fit diagnostics.
        mean_module_covariance: the mean covariance of the target module parameters.
        mean_covariance: the mean covariance of all parameters.
    """

    def __init__(
        self,
        name: str,
        analysis: SetupAnalysis,
        sample: Optional[CovarianceCurve],
        delta: Optional[CovarianceCurve],
        responses: np.ndarray,
        summary: FitSummary,
        mean_module_covariance: Optional[np.ndarray],
        mean_covariance: Optional[np.ndarray] = None,
    ) -> "SetupResult":
        self.name = name
        self.analysis = analysis
        self.sample = sample
        self.delta = delta
        self.responses = responses
        self.summary = summary
        self.mean_module_covariance = mean_module_covariance
        self.mean_covariance = mean_covariance

    def full_matrix_log_determinant(self) -> Optional[float]:
        """
        `log det(P^-1)` of the mean covariance of all parameters, or `None` without
        fits. Setups with different parameter counts give values of different
        dimension.
        """
        if self.mean_covariance is None:
            return None
        try:
            return information_log_determinant(self.mean_covariance)
        except InvalidUsageError:
            logger.warning("setup %s: mean covariance is not positive definite", self.name)
            return None

    @property
    def asymptotic(self) -> CovarianceCurve:
        return self.analysis.asymptotic

    def curves(self) -> List[CovarianceCurve]:
        return [curve for curve in (self.asymptotic, self.sample, self.delta) if curve is not None]


class SweepPointResult:
    """
    The outcome of one sweep point: per-setup results, conditions and optimality
    verdicts (each against the reference setup, on the target module block), and the
    excluded runs.
    """

    def __init__(
        self,
        index: int,
        gain: Optional[float],
        setups: Dict[str, SetupResult],
        conditions: Dict[str, ConditionCurve],
        optimality: Dict[str, Tuple[OptimalityComparison, OptimalityComparison]],
        seeds: List[int],
        digests: List[str],
        failures: Dict[int, str],
        aborted: bool,
    ) -> "SweepPointResult":
        self.index = index
        self.gain = gain
        self.setups = setups
        self.conditions = conditions
        self.optimality = optimality
        self.seeds = seeds
        self.digests = digests
        self.failures = failures
        self.aborted = aborted

    @property
    def label(self) -> str:
        return point_label(self.gain)

    def optimality_rows(self) -> List[List[object]]:
        """
        `setup,scope,criterion,verdict,values` rows: the D and E verdicts of every
        setup against the reference on the target module block, then the
        `log det(P^-1)` of every setup's full parameter covariance.
        """
        rows: List[List[object]] = []
        for name, comparisons in self.optimality.items():
            for criterion, comparison in zip(("D", "E"), comparisons):
                values = " ".join(f"{value:.10g}" for value in comparison.values)
                rows.append([name, "target-block", criterion, comparison.verdict.value, values])
        for name, result in self.setups.items():
            value = result.full_matrix_log_determinant()
            if value is not None:
                rows.append([name, "full-matrix", "log-det-information", "", f"{value:.10g}"])
        return rows

    def _resolve_optimality(self) -> Dict[str, object]:
        return {
            "target_block": {
                name: {"D": d._resolve(), "E": e._resolve()}
                for name, (d, e) in self.optimality.items()
            },
            "full_matrix_log_det_information": {
                name: result.full_matrix_log_determinant()
                for name, result in self.setups.items()
            },
        }


class ResultBundle:
    """
    Everything a campaign produced; every curve lives on `grid`.
    """

    def __init__(
        self, config: ExperimentConfig, grid: FrequencyGrid, points: List[SweepPointResult]
    ) -> "ResultBundle":
        self.config = config
        self.grid = grid
        self.points = points

    def point(self, gain: Optional[float]) -> SweepPointResult:
        for point in self.points:
            if point.gain == gain:
                return point
        raise InvalidUsageError(f"No sweep point with gain {gain}.")

    def manifest(self, files: Sequence[str] = ()) -> Dict[str, object]:
        """
        The data needed to reproduce the campaign: configuration text and hash, seeds,
        record digests and excluded runs, next to the optimality summary.
        """
        return {
            "package": "netvariance",
            "config": self.config.to_text(),
            "config_hash": self.config.config_hash(),
            "seed_base": self.config.seed,
            "runs": self.config.runs,
            "points": {
                point.label: {
                    "seeds": point.seeds,
                    "record_digests": point.digests,
                    "excluded": {str(run): reason for run, reason in point.failures.items()},
                    "aborted": point.aborted,
                    "optimality": point._resolve_optimality(),
                }
                for point in self.points
            },
            "files": sorted(files),
        }


def _summarize(
    name: str, analysis: SetupAnalysis, fits: List[SetupFit], grid: FrequencyGrid, n: int
) -> SetupResult:
    count = len(fits)
    responses = np.stack([fit.response for fit in fits]) if fits else np.zeros((0, grid.count))
    sample = delta = None
    calibration = None
    mean_block = mean_covariance = None
    if count >= 2:
        sample = sample_covariance(responses, grid, analysis.n_params, n)
        thetas = np.stack([fit.theta for fit in fits])
        predicted = np.mean([np.diag(fit.covariance) for fit in fits], axis=0)
        calibration = [float(value) for value in np.var(thetas, axis=0, ddof=1) / predicted]
    else:
        logger.info("setup %s: sample covariance unavailable with %d run(s)", name, count)
    if fits:
        delta = CovarianceCurve(
            grid,
            np.mean([fit.delta for fit in fits], axis=0),
            CurveLabel.DELTA_METHOD,
            analysis.n_params,
            n,
        )
        mean_block = np.mean([fit.module_covariance for fit in fits], axis=0)
        mean_covariance = np.mean([fit.covariance for fit in fits], axis=0)
    summary = FitSummary(
        runs_used=count,
        converged=sum(fit.converged for fit in fits),
        mean_iterations=float(np.mean([fit.iterations for fit in fits])) if fits else 0.0,
        white=sum(fit.white for fit in fits),
        mean_theta=[],
        calibration=calibration,
    )
    if fits:
        summary.mean_theta = [float(v) for v in np.mean([fit.theta for fit in fits], axis=0)]
    return SetupResult(
        name, analysis, sample, delta, responses, summary, mean_block, mean_covariance
    )


def _optimality(
    reference: SetupResult, other: SetupResult
) -> Optional[Tuple[OptimalityComparison, OptimalityComparison]]:
    a, b = reference.mean_module_covariance, other.mean_module_covariance
    if a is None or b is None or a.shape != b.shape:
        return None
    return d_optimality_compare(a, b), e_optimality_compare(a, b)


def _collect_point(
    config: ExperimentConfig,
    index: int,
    gain: Optional[float],
    analyses: List[SetupAnalysis],
    outcomes: List[RunOutcome],
    grid: FrequencyGrid,
) -> SweepPointResult:
    outcomes = sorted(outcomes, key=lambda outcome: outcome.run)
    failures = {outcome.run: outcome.error for outcome in outcomes if outcome.error}
    succeeded = [outcome for outcome in outcomes if not outcome.error]
    for outcome in succeeded:
        if {fit.record_digest for fit in outcome.fits.values()} != {outcome.digest}:
            raise NetVarianceError(f"run {outcome.run}: setups were fitted on different data")
    label = point_label(gain)
    aborted = len(failures) > FAILURE_LIMIT * config.runs
    if failures:
        logger.warning("%s: excluded %d of %d runs", label, len(failures), config.runs)
    if aborted:
        logger.info("%s: aborted, more than %d%% of the runs failed", label, FAILURE_LIMIT * 100)
        succeeded = []
    setups = {
        analysis.setup.name: _summarize(
            analysis.setup.name,
            analysis,
            [outcome.fits[analysis.setup.name] for outcome in succeeded],
            grid,
            config.sample_count,
        )
        for analysis in analyses
    }
    names = [analysis.setup.name for analysis in analyses]
    optimality = {}
    for name in names[1:]:
        verdicts = _optimality(setups[names[0]], setups[name])
        if verdicts is not None:
            optimality[name] = verdicts
    logger.info("%s: %d of %d runs used", label, len(succeeded), config.runs)
    return SweepPointResult(
        index=index,
        gain=gain,
        setups=setups,
        conditions=compare_conditions(analyses),
        optimality=optimality,
        seeds=[outcome.seed for outcome in outcomes],
        digests=[outcome.digest for outcome in outcomes],
        failures=failures,
        aborted=aborted,
    )


def run_montecarlo(config: ExperimentConfig, out_dir: Optional[PathLike] = None) -> ResultBundle:
    """
    Runs the campaign: for every sweep point, run `i` is simulated with seed
    `seed + i` and fitted with every setup; the sample covariance of the estimated
    target responses is assembled next to the analytic curves and the comparison
    condition.

    Args:
        config: the experiment.
        out_dir: if given, every export and the manifest are written there.

    Returns:
        The `ResultBundle`. The result does not depend on `config.workers`.

    Throws:
        IllPosedNetworkError: if a swept network is not simulatable.
        ConsistencyError: if a setup's predictor set is not consistent.
    """
    grid = config.grid()
    points = config.sweep_points()
    analyses = []
    tasks = []
    for index, (gain, model) in enumerate(points):
        model.validate(grid).raise_for_violations()
        analyses.append(analyze_setups(config, model, grid))
        for run in range(config.runs):
            tasks.append(
                _RunTask(
                    point=index,
                    run=run,
                    seed=config.seed + run,
                    model=model,
                    target=config.target,
                    setups=config.setups,
                    sample_count=config.sample_count,
                    sample_time=config.sample_time,
                    burn_in=config.burn_in,
                    restarts=config.restarts,
                    grid=grid,
                )
            )
    logger.info(
        "running %d sweep point(s) x %d runs on %d worker(s)",
        len(points),
        config.runs,
        config.workers,
    )
    if config.workers > 1:
        with Pool(processes=config.workers) as pool:
            outcomes = pool.map(_run_single, tasks, chunksize=1)
    else:
        outcomes = [_run_single(task) for task in tasks]
    results = []
    for index, (gain, _) in enumerate(points):
        point_outcomes = [outcome for outcome in outcomes if outcome.point == index]
        results.append(_collect_point(config, index, gain, analyses[index], point_outcomes, grid))
    bundle = ResultBundle(config, grid, results)
    if out_dir is not None:
        export_plotdata(bundle, out_dir)
    return bundle


def rerun_from_manifest(path: PathLike, out_dir: Optional[PathLike] = None) -> ResultBundle:
    """
    Re-runs the campaign recorded in a manifest.

    Throws:
        InvalidUsageError: if the configuration does not match the recorded hash.
    """
    manifest = read_manifest(path)
    config = ExperimentConfig.from_text(manifest["config"])
    if config.config_hash() != manifest["config_hash"]:
        raise InvalidUsageError(f"Manifest `{path}` does not match its configuration hash.")
    return run_montecarlo(config, out_dir)


def reproduce_case_study(
    variant: str,
    out_dir: Optional[PathLike] = None,
    runs: Optional[int] = None,
    workers: Optional[int] = None,
    grid_size: Optional[int] = None,
    seed: Optional[int] = None,
) -> ResultBundle:
    """
    Runs a built-in case-study campaign (`one_param_g43` or `two_param_g43`): the
    4-node network with the module `G24` swept over four gains, identified by the
    full-MISO setup and by the setup leaving node 4 out.
    """
    config = ExperimentConfig.from_text(case_study_text(variant))
    overrides = {"runs": runs, "workers": workers, "grid_size": grid_size, "seed": seed}
    config = replace(
        config, **{key: value for key, value in overrides.items() if value is not None}
    )
    return run_montecarlo(config, out_dir)


_PLOT_STUB = """\
# Plots the exported curves; needs matplotlib and numpy.
# Sample-covariance files: omega,cov_<setup>... ; condition files: omega,condition_value,sign.
import sys

import matplotlib.pyplot as plt
import numpy as np

for path in sys.argv[1:]:
    data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    figure, axes = plt.subplots()
    for column in data.dtype.names[1:]:
        axes.plot(data["omega"], data[column], label=column)
    axes.set_xlabel("omega [rad/sample]")
    axes.set_title(path)
    axes.legend()
plt.show()
"""


def _sample_header(names: List[str]) -> List[str]:
    header = ["omega"]
    for index, name in enumerate(names):
        header.append(("cov_full", "cov_immersed")[index] if index < 2 else f"cov_{name}")
    return header


def export_plotdata(bundle: ResultBundle, out_dir: PathLike, which: str = "all") -> List[Path]:
    """
    Writes the plot-ready files of a bundle.

    - `<sample_figure>_<point>.csv`: `omega,cov_full,cov_immersed[,cov_<setup>...]`,
      the sample covariance of every setup.
    - `<condition_figure>_<point>.csv`: `omega,condition_value,sign` for the second
      setup against the first (`..._<setup>.csv` for further setups).
    - `curves_<point>.csv`: `omega,value,label,n_params,N`, every curve.
    - `optimality_<point>.csv`: `setup,scope,criterion,verdict,values`, the D and E
      verdicts on the target module block and the labeled full-matrix
      `log det(P^-1)` of every setup.
    - `manifest.json` and the plotting stub `plot.py`.

    Args:
        bundle: the campaign results.
        out_dir: the output directory.
        which: one of `sample`, `condition`, `curves`, `optimality`, `manifest`,
            `all`.

    Throws:
        InvalidUsageError: if `which` is unknown, or a requested sample curve is
            missing (fewer than 2 successful runs).
    """
    if which not in EXPORT_KINDS:
        raise InvalidUsageError(f"`which` must be one of {EXPORT_KINDS}, got `{which}`.")
    out_dir = Path(out_dir)
    config = bundle.config
    written: List[Path] = []
    for point in bundle.points:
        names = list(point.setups)
        if which in ("sample", "all"):
            curves = [point.setups[name].sample for name in names]
            if any(curve is None for curve in curves):
                if which == "sample":
                    raise InvalidUsageError(f"missing sample covariance curve for {point.label}")
                logger.warning("%s: no sample covariance curves to export", point.label)
            else:
                columns = np.column_stack([bundle.grid.points] + [c.values for c in curves])
                written.append(
                    write_table(
                        out_dir / f"{config.sample_figure}_{point.label}.csv",
                        _sample_header(names),
                        columns.tolist(),
                        comments=[
                            f"sample covariance of G{config.target[0]}{config.target[1]}"
                            f" over {curves[0].sample_count} samples, setups {','.join(names)}"
                        ],
                    )
                )
        if which in ("condition", "all"):
            for position, (name, condition) in enumerate(point.conditions.items()):
                suffix = "" if position == 0 else f"_{name}"
                path = out_dir / f"{config.condition_figure}_{point.label}{suffix}.csv"
                written.append(write_condition(condition, path))
        if which in ("curves", "all"):
            curves = [curve for name in names for curve in point.setups[name].curves()]
            written.append(write_curves(curves, out_dir / f"curves_{point.label}.csv"))
        if which in ("optimality", "all"):
            written.append(
                write_table(
                    out_dir / f"optimality_{point.label}.csv",
                    ["setup", "scope", "criterion", "verdict", "values"],
                    point.optimality_rows(),
                    comments=[
                        f"reference setup {names[0]}; target-block rows compare the"
                        f" G{config.target[0]}{config.target[1]} parameter block",
                        "full-matrix rows are log det(P^-1) of all parameters and differ"
                        " in dimension between setups",
                    ],
                )
            )
    if which == "all":
        written.append(write_text(_PLOT_STUB, out_dir / "plot.py"))
    if which in ("manifest", "all"):
        files = [path.name for path in written] + ["manifest.json"]
        written.append(write_manifest(bundle.manifest(files), out_dir / "manifest.json"))
    return written
