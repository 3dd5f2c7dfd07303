"""
Direct-method prediction-error identification of a multi-input single-output node
equation with Box-Jenkins structure:

`y(t) = sum_k q^-d_k B_k(q) / F_k(q) u_k(t) + C(q) / D(q) e(t)`

The parameter vector lists, input by input, the coefficients of `B_k` then the
non-leading coefficients of the monic `F_k`, followed by those of the monic `C`
and `D`.
"""

from dataclasses import dataclass, field
from json import dumps
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from .errors import (
    InvalidUsageError,
    NetVarianceError,
    OptimizationError,
    PredictorUnstableError,
    UnidentifiableError,
)
from .lti import Polynomial, RationalTransfer
from .network import FrequencyGrid
from .utils import as_signal, coerce_to_list, validate_float, validate_int
from .variance import CovarianceCurve, CurveLabel, marginal_block

logger = logging.getLogger(__name__)

PROJECTION_RADIUS = 0.99
SINGULARITY_TOLERANCE = 1e-12
MIN_SAMPLES_PER_PARAMETER = 20
DAMPING_LIMIT = 1e12


class InputOrders:
    """
    Orders of one module `q^-delay B(q) / F(q)`.

    Args:
        nb: number of numerator coefficients (at least 1).
        nf: number of free denominator coefficients (`F` is monic).
        delay: input delay in samples.
    """

    def __init__(self, nb: int = 1, nf: int = 0, delay: int = 0) -> "InputOrders":
        self.nb = validate_int(nb, field_name="nb", min_value=1)
        self.nf = validate_int(nf, field_name="nf", min_value=0)
        self.delay = validate_int(delay, field_name="delay", min_value=0)

    @property
    def count(self) -> int:
        return self.nb + self.nf

    def _resolve(self) -> Dict[str, Any]:
        return {"nb": self.nb, "nf": self.nf, "delay": self.delay}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InputOrders):
            return NotImplemented
        return self._resolve() == other._resolve()

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


class BJStructure:
    """
    A Box-Jenkins model structure.

    Args:
        inputs: the orders of every input module, in predictor order.
        nc: number of free coefficients of the monic noise numerator `C`.
        nd: number of free coefficients of the monic noise denominator `D`.

    Throws:
        InvalidUsageError: if there is no input or an order is negative.
    """

    def __init__(
        self, inputs: Sequence[InputOrders], nc: int = 0, nd: int = 0
    ) -> "BJStructure":
        self.inputs = coerce_to_list(list(inputs), InputOrders, min_size=1)
        self.nc = validate_int(nc, field_name="nc", min_value=0)
        self.nd = validate_int(nd, field_name="nd", min_value=0)
        offsets = np.cumsum([0] + [orders.count for orders in self.inputs])
        self._offsets = [int(offset) for offset in offsets]

    @property
    def input_count(self) -> int:
        return len(self.inputs)

    @property
    def parameter_count(self) -> int:
        """
        Length of the parameter vector, noise model included.
        """
        return self._offsets[-1] + self.nc + self.nd

    @property
    def module_parameter_count(self) -> int:
        """
        Number of transfer-function parameters of the input modules only.
        """
        return self._offsets[-1]

    def b_slice(self, index: int) -> slice:
        start = self._offsets[index]
        return slice(start, start + self.inputs[index].nb)

    def f_slice(self, index: int) -> slice:
        start = self._offsets[index] + self.inputs[index].nb
        return slice(start, start + self.inputs[index].nf)

    def module_slice(self, index: int) -> slice:
        return slice(self._offsets[index], self._offsets[index + 1])

    @property
    def c_slice(self) -> slice:
        start = self._offsets[-1]
        return slice(start, start + self.nc)

    @property
    def d_slice(self) -> slice:
        start = self._offsets[-1] + self.nc
        return slice(start, start + self.nd)

    def unpack(self, theta: np.ndarray) -> "Polynomials":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.parameter_count,):
            raise InvalidUsageError(
                f"Parameter vector has shape {theta.shape}, expected ({self.parameter_count},)."
            )
        b = [theta[self.b_slice(index)] for index in range(self.input_count)]
        f = [
            np.concatenate([[1.0], theta[self.f_slice(index)]])
            for index in range(self.input_count)
        ]
        c = np.concatenate([[1.0], theta[self.c_slice]])
        d = np.concatenate([[1.0], theta[self.d_slice]])
        return Polynomials(b=b, f=f, c=c, d=d)

    def pack(self, polynomials: "Polynomials") -> np.ndarray:
        parts = []
        for index in range(self.input_count):
            parts.append(polynomials.b[index])
            parts.append(polynomials.f[index][1:])
        parts.append(polynomials.c[1:])
        parts.append(polynomials.d[1:])
        return np.concatenate([np.asarray(part, dtype=float) for part in parts])

    def _resolve(self) -> Dict[str, Any]:
        return {
            "inputs": [orders._resolve() for orders in self.inputs],
            "nc": self.nc,
            "nd": self.nd,
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


@dataclass
class Polynomials:
    """
    The polynomials of a Box-Jenkins model, each as coefficients in `q^-1`.
    """

    b: List[np.ndarray]
    f: List[np.ndarray]
    c: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class PEMOptions:
    """
    Tuning of `fit_pem`.

    Args:
        max_iterations: iteration cap per start.
        restarts: number of starts (the first uses the stage-wise initial estimate,
            the others perturb it).
        initial_damping: starting Levenberg-Marquardt damping.
        damping_factor: damping multiplier on a rejected step (divisor on acceptance).
        cost_tolerance: relative cost decrease below which a start has converged.
        gradient_tolerance: gradient norm below which a start has converged.
        arx_order: order of the high-order ARX model used for initialization.
        seed: seed of the restart perturbations.
        initial_theta: explicit initial parameter vector (skips the stage-wise
            initialization).
    """

    max_iterations: int = 200
    restarts: int = 5
    initial_damping: float = 1e-3
    damping_factor: float = 10.0
    cost_tolerance: float = 1e-9
    gradient_tolerance: float = 1e-8
    arx_order: int = 10
    seed: int = 0
    initial_theta: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        validate_int(self.max_iterations, field_name="max_iterations", min_value=1)
        validate_int(self.restarts, field_name="restarts", min_value=1)
        validate_float(self.initial_damping, field_name="initial_damping", min_value=0.0)
        validate_float(self.damping_factor, field_name="damping_factor", min_value=1.0, strict=True)
        validate_int(self.arx_order, field_name="arx_order", min_value=1)


@dataclass
class Prediction:
    """
    One-step-ahead prediction of a Box-Jenkins model.

    Args:
        y_hat: the predicted output.
        residuals: the prediction errors `y - y_hat`.
        module_outputs: the simulated output `x_k` of every input module.
        noise: the output minus every module output, `v = y - sum x_k`.
    """

    y_hat: np.ndarray
    residuals: np.ndarray
    module_outputs: List[np.ndarray]
    noise: np.ndarray


def _as_inputs(inputs: Any, count: int, length: int) -> List[np.ndarray]:
    if isinstance(inputs, np.ndarray) and inputs.ndim == 1:
        inputs = [inputs]
    signals = [as_signal(signal, field_name="input") for signal in inputs]
    if len(signals) != count:
        raise InvalidUsageError(f"Expected {count} input signals, got {len(signals)}.")
    for signal in signals:
        if signal.size != length:
            raise InvalidUsageError("Input and output signals must have equal length.")
    return signals


def _shift(signal: np.ndarray, steps: int) -> np.ndarray:
    if steps == 0:
        return signal
    shifted = np.zeros_like(signal)
    if steps < signal.size:
        shifted[steps:] = signal[:-steps]
    return shifted


def _require_stable(coefficients: np.ndarray, name: str) -> None:
    roots = Polynomial(coefficients).roots()
    if roots.size and np.max(np.abs(roots)) >= 1.0:
        raise PredictorUnstableError(
            f"predictor unstable: {name} has a root of magnitude {np.max(np.abs(roots)):.6g}"
        )


def project_monic(coefficients: np.ndarray, radius: float = PROJECTION_RADIUS) -> np.ndarray:
    """
    Reflects the roots of a monic polynomial that lie on or outside the unit circle
    to the inside, clipping them to `radius`.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.size < 2:
        return coefficients
    roots = np.roots(coefficients)
    outside = np.abs(roots) >= 1.0
    if not np.any(outside):
        return coefficients
    magnitudes = np.abs(roots[outside])
    roots[outside] = roots[outside] / magnitudes * np.minimum(1.0 / magnitudes, radius)
    return np.real(np.poly(roots))


def _project(structure: BJStructure, theta: np.ndarray) -> np.ndarray:
    polynomials = structure.unpack(theta)
    polynomials.f = [project_monic(f) for f in polynomials.f]
    polynomials.c = project_monic(polynomials.c)
    polynomials.d = project_monic(polynomials.d)
    return structure.pack(polynomials)


def predict(structure: BJStructure, theta: np.ndarray, y: Any, inputs: Any) -> Prediction:
    """
    One-step-ahead predictor `eps = (D / C) (y - sum_k q^-d_k B_k / F_k u_k)` from
    zero initial conditions.

    Args:
        structure: the model structure.
        theta: the parameter vector.
        y: the output samples.
        inputs: one sample sequence per input module (list or `(m, N)` array).

    Returns:
        A `Prediction`.

    Throws:
        PredictorUnstableError: if `C` or some `F_k` has a root on or outside the unit
            circle.
    """
    y = as_signal(y, field_name="y")
    signals = _as_inputs(inputs, structure.input_count, y.size)
    polynomials = structure.unpack(theta)
    _require_stable(polynomials.c, "C")
    outputs = []
    for index, orders in enumerate(structure.inputs):
        _require_stable(polynomials.f[index], f"F{index + 1}")
        b = np.concatenate([np.zeros(orders.delay), polynomials.b[index]])
        outputs.append(lfilter(b, polynomials.f[index], signals[index]))
    noise = y - np.sum(outputs, axis=0)
    residuals = lfilter(polynomials.d, polynomials.c, noise)
    return Prediction(y_hat=y - residuals, residuals=residuals, module_outputs=outputs, noise=noise)


def gradient(structure: BJStructure, theta: np.ndarray, y: Any, inputs: Any) -> np.ndarray:
    """
    `psi(t) = d eps(t) / d theta` by filtering, shape `(N, n)`.

    Throws:
        PredictorUnstableError: as `predict`.
    """
    y = as_signal(y, field_name="y")
    signals = _as_inputs(inputs, structure.input_count, y.size)
    return _psi(structure, theta, signals, predict(structure, theta, y, signals))


def _psi(
    structure: BJStructure, theta: np.ndarray, signals: List[np.ndarray], prediction: Prediction
) -> np.ndarray:
    polynomials = structure.unpack(theta)
    psi = np.zeros((prediction.residuals.size, structure.parameter_count))
    for index, orders in enumerate(structure.inputs):
        c_f = np.convolve(polynomials.c, polynomials.f[index])
        filtered_input = lfilter(polynomials.d, c_f, signals[index])
        filtered_output = lfilter(polynomials.d, c_f, prediction.module_outputs[index])
        b_slice, f_slice = structure.b_slice(index), structure.f_slice(index)
        for lag in range(orders.nb):
            psi[:, b_slice.start + lag] = -_shift(filtered_input, orders.delay + lag)
        for lag in range(orders.nf):
            psi[:, f_slice.start + lag] = _shift(filtered_output, lag + 1)
    if structure.nc:
        filtered_residuals = lfilter([1.0], polynomials.c, prediction.residuals)
        for lag in range(structure.nc):
            psi[:, structure.c_slice.start + lag] = -_shift(filtered_residuals, lag + 1)
    if structure.nd:
        filtered_noise = lfilter([1.0], polynomials.c, prediction.noise)
        for lag in range(structure.nd):
            psi[:, structure.d_slice.start + lag] = _shift(filtered_noise, lag + 1)
    return psi


def _lagged(signal: np.ndarray, lags: Sequence[int], start: int) -> np.ndarray:
    length = signal.size
    return np.stack([signal[start - lag : length - lag] for lag in lags], axis=1)


def _least_squares(target: np.ndarray, columns: List[np.ndarray]) -> np.ndarray:
    regressors = np.concatenate(columns, axis=1)
    solution, *_ = np.linalg.lstsq(regressors, target, rcond=None)
    return solution


def initial_estimate(
    structure: BJStructure, y: np.ndarray, inputs: List[np.ndarray], arx_order: int = 10
) -> np.ndarray:
    """
    Stage-wise initial estimate: a high-order ARX least-squares fit, reduction of
    every input module to its target orders by equation-error least squares on the
    ARX-simulated module output, then a Hannan-Rissanen estimate of the noise model.
    """
    delays = [orders.delay for orders in structure.inputs]
    start = max([arx_order] + [delay + arx_order - 1 for delay in delays])
    columns = [-_lagged(y, range(1, arx_order + 1), start)]
    for signal, delay in zip(inputs, delays):
        columns.append(_lagged(signal, range(delay, delay + arx_order), start))
    solution = _least_squares(y[start:], columns)
    a = project_monic(np.concatenate([[1.0], solution[:arx_order]]))

    b_parts, f_parts, outputs = [], [], []
    for index, (signal, orders) in enumerate(zip(inputs, structure.inputs)):
        offset = arx_order * (index + 1)
        b_high = np.concatenate([np.zeros(orders.delay), solution[offset : offset + arx_order]])
        simulated = lfilter(b_high, a, signal)
        reduce_start = max(orders.nf, orders.delay + orders.nb - 1)
        b_lags = range(orders.delay, orders.delay + orders.nb)
        reduce_columns = [_lagged(signal, b_lags, reduce_start)]
        if orders.nf:
            reduce_columns.insert(0, -_lagged(simulated, range(1, orders.nf + 1), reduce_start))
        reduced = _least_squares(simulated[reduce_start:], reduce_columns)
        f = project_monic(np.concatenate([[1.0], reduced[: orders.nf]]))
        b = reduced[orders.nf :]
        b_parts.append(b)
        f_parts.append(f)
        outputs.append(lfilter(np.concatenate([np.zeros(orders.delay), b]), f, signal))

    c = np.ones(1)
    d = np.ones(1)
    if structure.nc or structure.nd:
        noise = y - np.sum(outputs, axis=0)
        long_order = max(20, 2 * (structure.nc + structure.nd))
        ar_columns = [-_lagged(noise, range(1, long_order + 1), long_order)]
        ar = _least_squares(noise[long_order:], ar_columns)
        innovations = lfilter(np.concatenate([[1.0], ar]), [1.0], noise)
        noise_start = long_order + max(structure.nc, structure.nd)
        noise_columns = []
        if structure.nd:
            noise_columns.append(-_lagged(noise, range(1, structure.nd + 1), noise_start))
        if structure.nc:
            noise_columns.append(_lagged(innovations, range(1, structure.nc + 1), noise_start))
        arma = _least_squares(noise[noise_start:], noise_columns)
        d = project_monic(np.concatenate([[1.0], arma[: structure.nd]]))
        c = project_monic(np.concatenate([[1.0], arma[structure.nd :]]))
    return structure.pack(Polynomials(b=b_parts, f=f_parts, c=c, d=d))


@dataclass
class StartDiagnostics:
    """
    How one start of the optimization ended.
    """

    start: int
    cost: float = float("nan")
    iterations: int = 0
    converged: bool = False
    error: Optional[str] = None

    def __str__(self) -> str:
        if self.error is not None:
            return f"start {self.start}: {self.error}"
        return (
            f"start {self.start}: cost {self.cost:.6g} after {self.iterations} iterations"
            f"{'' if self.converged else ' (not converged)'}"
        )


@dataclass
class _Descent:
    theta: np.ndarray
    cost: float
    iterations: int
    converged: bool
    trace: List[float] = field(default_factory=list)
    prediction: Optional[Prediction] = None


def _evaluate(
    structure: BJStructure, theta: np.ndarray, y: np.ndarray, inputs: List[np.ndarray]
) -> Tuple[float, Prediction]:
    prediction = predict(structure, theta, y, inputs)
    return float(np.mean(prediction.residuals**2)), prediction


def _descend(
    structure: BJStructure,
    theta: np.ndarray,
    y: np.ndarray,
    inputs: List[np.ndarray],
    options: PEMOptions,
) -> _Descent:
    cost, prediction = _evaluate(structure, theta, y, inputs)
    if not np.isfinite(cost):
        raise NetVarianceError("initial cost is not finite")
    trace = [cost]
    damping = options.initial_damping
    for iteration in range(1, options.max_iterations + 1):
        psi = _psi(structure, theta, inputs, prediction)
        information = psi.T @ psi / y.size
        slope = psi.T @ prediction.residuals / y.size
        if np.linalg.norm(2.0 * slope) < options.gradient_tolerance:
            return _Descent(theta, cost, iteration - 1, True, trace, prediction)
        while True:
            lhs = information + damping * np.diag(np.diag(information))
            try:
                step = np.linalg.solve(lhs, -slope)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(lhs, -slope, rcond=None)[0]
            candidate = _project(structure, theta + step)
            try:
                candidate_cost, candidate_prediction = _evaluate(structure, candidate, y, inputs)
            except PredictorUnstableError:
                candidate_cost = np.inf
            if np.isfinite(candidate_cost) and candidate_cost < cost:
                break
            damping *= options.damping_factor
            if damping > DAMPING_LIMIT:
                logger.debug("damping exhausted after %d iterations", iteration)
                return _Descent(theta, cost, iteration, False, trace, prediction)
        decrease = (cost - candidate_cost) / cost if cost > 0.0 else 0.0
        theta, cost, prediction = candidate, candidate_cost, candidate_prediction
        trace.append(cost)
        damping /= options.damping_factor
        logger.debug("iteration %d: cost %.10g, damping %.3g", iteration, cost, damping)
        if decrease < options.cost_tolerance:
            return _Descent(theta, cost, iteration, True, trace, prediction)
    return _Descent(theta, cost, options.max_iterations, False, trace, prediction)


class FitResult:
    """
    Outcome of a prediction-error fit.

    Args:
        structure: the model structure.
        theta: the estimated parameter vector.
        variance: the residual variance `sigma^2 = mean(eps^2)`.
        covariance: the parameter covariance `P_theta`.
        iterations: the iterations of the winning start.
        converged: whether the winning start met a convergence criterion.
        trace: the cost after every accepted step of the winning start.
        psi: the gradient of the prediction error at `theta`.
        residuals: the prediction errors at `theta`.
        diagnostics: one entry per start.
    """

    def __init__(
        self,
        structure: BJStructure,
        theta: np.ndarray,
        variance: float,
        covariance: np.ndarray,
        iterations: int,
        converged: bool,
        trace: List[float],
        psi: np.ndarray,
        residuals: np.ndarray,
        diagnostics: List[StartDiagnostics],
    ) -> "FitResult":
        self.structure = structure
        self.theta = theta
        self.variance = variance
        self.covariance = covariance
        self.iterations = iterations
        self.converged = converged
        self.trace = trace
        self.psi = psi
        self.residuals = residuals
        self.diagnostics = diagnostics

    @property
    def sample_count(self) -> int:
        return self.psi.shape[0]

    def module_transfer(self, index: int) -> RationalTransfer:
        """
        The estimated `q^-d B / F` of input module `index` (0-based).
        """
        polynomials = self.structure.unpack(self.theta)
        return RationalTransfer(
            polynomials.b[index], polynomials.f[index], self.structure.inputs[index].delay
        )

    def module_response(self, index: int, grid: FrequencyGrid) -> np.ndarray:
        return self.module_transfer(index).freq_response(grid.points)

    def noise_transfer(self) -> RationalTransfer:
        polynomials = self.structure.unpack(self.theta)
        return RationalTransfer(polynomials.c, polynomials.d)

    def noise_spectrum(self, grid: FrequencyGrid) -> np.ndarray:
        """
        The estimated output noise spectrum `sigma^2 |C / D|^2`.
        """
        return self.variance * np.abs(self.noise_transfer().freq_response(grid.points)) ** 2

    def module_covariance_block(self, index: int) -> np.ndarray:
        block = self.structure.module_slice(index)
        return marginal_block(self.covariance, range(block.start, block.stop))

    def report(self) -> str:
        """
        A plain-text summary: estimates, residual variance, lower triangle of
        `P_theta` and the convergence trace.
        """
        lines = [
            "# P_theta = sigma^2 * [(1/N) sum psi psi^T]^-1 / N",
            f"N: {self.sample_count}",
            f"theta: {' '.join(f'{value:.10g}' for value in self.theta)}",
            f"sigma2: {self.variance:.10g}",
            f"converged: {self.converged} after {self.iterations} iterations",
            "P_theta:",
        ]
        for row in range(self.covariance.shape[0]):
            lines.append(
                "  " + " ".join(f"{value:.6e}" for value in self.covariance[row, : row + 1])
            )
        lines.append(f"trace: {' '.join(f'{value:.10g}' for value in self.trace)}")
        lines.extend(f"# {item}" for item in self.diagnostics)
        return "\n".join(lines) + "\n"

    def _resolve(self) -> Dict[str, Any]:
        return {
            "structure": self.structure._resolve(),
            "theta": [float(value) for value in self.theta],
            "variance": self.variance,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def gradient_covariance(psi: np.ndarray, variance: float) -> np.ndarray:
    """
    `P_theta = sigma^2 [(1/N) sum_t psi(t) psi(t)^T]^-1 / N`.

    Args:
        psi: the prediction-error gradient, shape `(N, n)`.
        variance: the residual variance `sigma^2`.

    Returns:
        The symmetric `(n, n)` parameter covariance.

    Throws:
        UnidentifiableError: if the information matrix is (numerically) singular.
    """
    samples = psi.shape[0]
    information = psi.T @ psi / samples
    eigenvalues, eigenvectors = np.linalg.eigh(information)
    if eigenvalues[0] <= SINGULARITY_TOLERANCE * max(eigenvalues[-1], 0.0):
        raise UnidentifiableError(eigenvectors[:, 0])
    inverse = (eigenvectors / eigenvalues) @ eigenvectors.T
    covariance = variance * inverse / samples
    return 0.5 * (covariance + covariance.T)


def param_covariance(fit: FitResult, y: Any, inputs: Any) -> np.ndarray:
    """
    The parameter covariance of a fit, recomputed from the data it was fitted on.

    Args:
        fit: the fit.
        y: the output samples.
        inputs: one sample sequence per input module.

    Returns:
        `gradient_covariance` of the gradient at `fit.theta` with the fit's residual
        variance.

    Throws:
        PredictorUnstableError: as `predict`.
        UnidentifiableError: if the information matrix is (numerically) singular.
    """
    return gradient_covariance(gradient(fit.structure, fit.theta, y, inputs), fit.variance)


def fit_pem(
    structure: BJStructure,
    y: Any,
    inputs: Any,
    options: Optional[PEMOptions] = None,
) -> FitResult:
    """
    Minimizes the mean squared prediction error over the Box-Jenkins parameters with
    damped Gauss-Newton steps, from several starts, and returns the best start.

    Args:
        structure: the model structure.
        y: the output samples.
        inputs: one sample sequence per input module.
        options: optimizer tuning (`PEMOptions()` by default).

    Returns:
        A `FitResult` including the parameter covariance.

    Throws:
        InvalidUsageError: if there are fewer than 20 samples per parameter.
        OptimizationError: if every start fails.
        UnidentifiableError: if the information matrix at the optimum is singular.
    """
    options = options or PEMOptions()
    y = as_signal(y, field_name="y")
    signals = _as_inputs(inputs, structure.input_count, y.size)
    if y.size < MIN_SAMPLES_PER_PARAMETER * structure.parameter_count:
        raise InvalidUsageError(
            f"{y.size} samples is too few for {structure.parameter_count} parameters "
            f"(at least {MIN_SAMPLES_PER_PARAMETER} per parameter required)."
        )
    if options.initial_theta is not None:
        initial = _project(structure, np.asarray(options.initial_theta, dtype=float))
    else:
        initial = initial_estimate(structure, y, signals, options.arx_order)
    rng = np.random.default_rng(options.seed)
    best: Optional[_Descent] = None
    diagnostics = []
    for start in range(options.restarts):
        theta = initial
        if start:
            noise = rng.standard_normal(initial.size)
            theta = _project(structure, initial + 0.1 * noise * (np.abs(initial) + 0.1))
        try:
            descent = _descend(structure, theta, y, signals, options)
        except (NetVarianceError, np.linalg.LinAlgError, FloatingPointError) as error:
            diagnostics.append(StartDiagnostics(start=start, error=str(error)))
            logger.debug("start %d failed: %s", start, error)
            continue
        diagnostics.append(
            StartDiagnostics(
                start=start,
                cost=descent.cost,
                iterations=descent.iterations,
                converged=descent.converged,
            )
        )
        if best is None or descent.cost < best.cost:
            best = descent
    if best is None:
        raise OptimizationError("optimization failed", diagnostics)
    psi = _psi(structure, best.theta, signals, best.prediction)
    return FitResult(
        structure=structure,
        theta=best.theta,
        variance=best.cost,
        covariance=gradient_covariance(psi, best.cost),
        iterations=best.iterations,
        converged=best.converged,
        trace=best.trace,
        psi=psi,
        residuals=best.prediction.residuals,
        diagnostics=diagnostics,
    )


def module_response_covariance(
    fit: FitResult, index: int, grid: FrequencyGrid
) -> CovarianceCurve:
    """
    Delta-method variance of the estimated response of input module `index`:
    `J(omega) P J(omega)^H` with `J` the Jacobian of `q^-d B / F` with respect to
    the module's own parameters.
    """
    orders = fit.structure.inputs[index]
    transfer = fit.module_transfer(index)
    z_inverse = np.exp(-1j * grid.points)
    polynomials = fit.structure.unpack(fit.theta)
    f_values = Polynomial(polynomials.f[index]).evaluate(z_inverse)
    response = transfer.freq_response(grid.points)
    columns = [z_inverse ** (orders.delay + lag) / f_values for lag in range(orders.nb)]
    columns += [-(z_inverse ** (lag + 1)) * response / f_values for lag in range(orders.nf)]
    jacobian = np.stack(columns, axis=1)
    block = fit.module_covariance_block(index)
    values = np.real(np.einsum("fp,pq,fq->f", jacobian, block, np.conj(jacobian)))
    return CovarianceCurve(
        grid=grid,
        values=np.maximum(values, 0.0),
        label=CurveLabel.DELTA_METHOD,
        n_params=fit.structure.module_parameter_count,
        sample_count=fit.sample_count,
    )


@dataclass
class WhitenessResult:
    """
    Normalized residual autocorrelations `rho(1..max_lag)` and the `3 / sqrt(N)`
    bound they are held against.
    """

    autocorrelations: np.ndarray
    bound: float

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.autocorrelations) < self.bound))


def residual_whiteness(residuals: Any, max_lag: int = 20) -> WhitenessResult:
    residuals = as_signal(residuals, field_name="residuals", min_length=2)
    max_lag = validate_int(max_lag, field_name="max_lag", min_value=1, max_value=residuals.size - 1)
    centred = residuals - np.mean(residuals)
    energy = float(np.dot(centred, centred))
    if energy == 0.0:
        raise InvalidUsageError("Residuals are identically zero.")
    rho = np.array(
        [np.dot(centred[lag:], centred[:-lag]) / energy for lag in range(1, max_lag + 1)]
    )
    return WhitenessResult(autocorrelations=rho, bound=3.0 / np.sqrt(residuals.size))
