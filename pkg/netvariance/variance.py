"""
Per-frequency asymptotic covariance of an estimated module response.

With the predictor vector `x = [w_1, e, w_2, ...]` (target input first, noise
second) the spectrum of `x` is split as

`[[Phi_w1, Gamma], [Gamma^H, Upsilon]]`

and the covariance of the estimated target module is

`(n / N) * Phi_v / (Phi_w1 - Gamma Upsilon^-1 Gamma^H)`.

The same expression with the immersed noise spectrum and immersed predictors gives
the covariance of the reduced setup; comparing the two gives a per-frequency
condition telling which setup is more accurate.
"""

from enum import Enum
from json import dumps
import logging
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.signal import csd

from .errors import InvalidUsageError, NoExcitationMarginError
from .network import FrequencyGrid, SignalRecord, SignalResponses, _split_tag
from .utils import as_signal, validate_float, validate_int

logger = logging.getLogger(__name__)

SIGN_TOLERANCE = 1e-9
DETERMINANT_TIE = 1e-12
LOEWNER_TOLERANCE = 1e-10
WELCH_SEGMENTS = 8

SignalSource = Union[SignalResponses, Mapping[str, np.ndarray]]


class CurveLabel(Enum):
    """
    Where the values of a `CovarianceCurve` come from.
    """

    FULL_MISO = "full-MISO"
    IMMERSED = "immersed"
    SAMPLE = "sample"
    DELTA_METHOD = "delta-method"


class CovarianceCurve:
    """
    A real, nonnegative covariance value per grid frequency.

    Args:
        grid: the frequency grid.
        values: the covariance values.
        label: see `CurveLabel`.
        n_params: the parameter count the curve was computed for.
        sample_count: the data length `N`.

    Throws:
        InvalidUsageError: if the values are negative, not finite or do not match
            the grid.
    """

    def __init__(
        self,
        grid: FrequencyGrid,
        values: np.ndarray,
        label: CurveLabel,
        n_params: int,
        sample_count: int,
    ) -> "CovarianceCurve":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.points.shape:
            raise InvalidUsageError("Curve values do not match the grid.")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidUsageError("Covariance values must be finite and nonnegative.")
        self.grid = grid
        self.values = values
        self.label = label
        self.n_params = validate_int(n_params, field_name="n_params", min_value=0)
        self.sample_count = validate_int(sample_count, field_name="sample_count", min_value=1)

    def value_at(self, omega: float) -> float:
        """
        The value at the grid point nearest to `omega`.
        """
        return float(self.values[int(np.argmin(np.abs(self.grid.points - omega)))])

    def _resolve(self) -> Dict[str, Any]:
        return {
            "label": self.label.value,
            "n_params": self.n_params,
            "N": self.sample_count,
            "points": self.grid.count,
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def three_valued_sign(values: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """
    `sign(values)` in `{-1, 0, +1}`, with 0 wherever `|values|` is within
    `SIGN_TOLERANCE * scale`.
    """
    values = np.asarray(values, dtype=float)
    signs = np.sign(values).astype(int)
    signs[np.abs(values) <= SIGN_TOLERANCE * np.abs(scale)] = 0
    return signs


class ConditionCurve:
    """
    The per-frequency comparison condition: positive where the reduced (immersed)
    setup has the larger asymptotic covariance.

    Args:
        grid: the frequency grid.
        values: `Phi_breve_v / Phi_v - (n_full S_immersed) / (n_immersed S_full)`.
        signs: the three-valued sign of every value.
    """

    def __init__(
        self, grid: FrequencyGrid, values: np.ndarray, signs: np.ndarray
    ) -> "ConditionCurve":
        self.grid = grid
        self.values = values
        self.signs = signs

    def fraction(self, sign: int, mask: Optional[np.ndarray] = None) -> float:
        """
        Share of the (masked) grid points with the given sign.
        """
        signs = self.signs if mask is None else self.signs[mask]
        return float(np.mean(signs == sign)) if signs.size else 0.0


class SpectralBlock:
    """
    The spectrum of the predictor vector `x = [w_1, e, w_2, ...]`, split into the
    target-input auto-spectrum, its cross-spectra `Gamma` with the other channels and
    the spectrum `Upsilon` of the other channels.

    Args:
        grid: the frequency grid.
        ordering: the signal tag of every channel of `x`.
        phi_w1: real array `(F,)`.
        gamma: complex array `(F, m)`.
        upsilon: complex Hermitian array `(F, m, m)`.
    """

    def __init__(
        self,
        grid: FrequencyGrid,
        ordering: List[str],
        phi_w1: np.ndarray,
        gamma: np.ndarray,
        upsilon: np.ndarray,
    ) -> "SpectralBlock":
        self.grid = grid
        self.ordering = list(ordering)
        self.phi_w1 = phi_w1
        self.gamma = gamma
        self.upsilon = upsilon

    @property
    def channel_count(self) -> int:
        return len(self.ordering)

    def full_matrix(self) -> np.ndarray:
        """
        The whole spectrum of `x`, shape `(F, m + 1, m + 1)`.
        """
        count = self.grid.count
        size = self.channel_count
        matrix = np.zeros((count, size, size), dtype=complex)
        matrix[:, 0, 0] = self.phi_w1
        matrix[:, 0, 1:] = self.gamma
        matrix[:, 1:, 0] = np.conj(self.gamma)
        matrix[:, 1:, 1:] = self.upsilon
        return matrix

    def without(self, tag: str) -> "SpectralBlock":
        """
        The block with one non-target channel removed.
        """
        if tag not in self.ordering[1:]:
            raise InvalidUsageError(f"`{tag}` is not a removable channel of this block.")
        position = self.ordering.index(tag) - 1
        keep = [index for index in range(self.channel_count - 1) if index != position]
        return SpectralBlock(
            grid=self.grid,
            ordering=[self.ordering[0]] + [self.ordering[index + 1] for index in keep],
            phi_w1=self.phi_w1,
            gamma=self.gamma[:, keep],
            upsilon=self.upsilon[:, keep][:, :, keep],
        )

    @staticmethod
    def from_matrix(
        grid: FrequencyGrid, ordering: List[str], matrix: np.ndarray
    ) -> "SpectralBlock":
        return SpectralBlock(
            grid=grid,
            ordering=ordering,
            phi_w1=np.real(matrix[:, 0, 0]),
            gamma=matrix[:, 0, 1:],
            upsilon=matrix[:, 1:, 1:],
        )


def predictor_ordering(inputs: Sequence[int], noise_tag: str) -> List[str]:
    """
    The channel tags `[w<first input>, noise, w<other inputs>...]`.
    """
    tags = [f"w{node}" for node in inputs]
    return tags[:1] + [noise_tag] + tags[1:]


def _check_ordering(ordering: Sequence[str]) -> None:
    if len(ordering) < 2:
        raise InvalidUsageError("A spectral block needs the target input and a noise channel.")
    if len(set(ordering)) != len(ordering):
        raise InvalidUsageError(f"Duplicate channels in {list(ordering)}.")
    kinds = [_split_tag(tag)[0] for tag in ordering]
    if kinds[0] != "w":
        raise InvalidUsageError(f"First channel must be a node signal, got `{ordering[0]}`.")
    if kinds[1] not in ("e", "be"):
        raise InvalidUsageError(f"Second channel must be a noise channel, got `{ordering[1]}`.")
    if any(kind != "w" for kind in kinds[2:]):
        raise InvalidUsageError(f"Channels after the noise must be node signals: {ordering}.")


def build_spectral_block(
    source: SignalSource,
    ordering: Sequence[str],
    grid: Optional[FrequencyGrid] = None,
    segment_length: Optional[int] = None,
) -> SpectralBlock:
    """
    Assembles the spectral block of the predictor vector.

    Args:
        source: either analytic `SignalResponses` (of the true network, possibly
            extended with the immersed noise rows) or a map tag -> samples, in which
            case every entry is a Welch estimate.
        ordering: channel tags, target input first and noise channel second
            (see `predictor_ordering`).
        grid: the frequency grid (required for sample data).
        segment_length: Welch segment length for sample data.

    Throws:
        InvalidUsageError: if the ordering is malformed or a tag is unknown.
    """
    _check_ordering(ordering)
    ordering = list(ordering)
    if isinstance(source, SignalResponses):
        if grid is not None:
            grid.require_same(source.grid)
        return SpectralBlock.from_matrix(source.grid, ordering, source.spectral_matrix(ordering))
    if grid is None:
        raise InvalidUsageError("A frequency grid is required for sample spectra.")
    missing = [tag for tag in ordering if tag not in source]
    if missing:
        raise InvalidUsageError(f"Unknown signal tags {missing}.")
    size = len(ordering)
    matrix = np.zeros((grid.count, size, size), dtype=complex)
    for row, a in enumerate(ordering):
        for column in range(row, size):
            estimate = welch_cross_spectrum(
                source[a], source[ordering[column]], grid, segment_length=segment_length
            )
            matrix[:, row, column] = estimate
            matrix[:, column, row] = np.conj(estimate)
    return SpectralBlock.from_matrix(grid, ordering, matrix)


def schur_complement(block: SpectralBlock) -> np.ndarray:
    """
    `S = Phi_w1 - Gamma Upsilon^-1 Gamma^H` per frequency (real).
    """
    solved = np.linalg.solve(block.upsilon, np.conj(block.gamma)[:, :, None])[:, :, 0]
    return block.phi_w1 - np.real(np.einsum("fm,fm->f", block.gamma, solved))


def _positive_schur(block: SpectralBlock) -> np.ndarray:
    schur = schur_complement(block)
    if np.any(~(schur > 0.0)):
        raise NoExcitationMarginError(float(block.grid.points[int(np.argmax(~(schur > 0.0)))]))
    return schur


def transfer_covariance_matrix(
    block: SpectralBlock, n_params: int, sample_count: int, phi_v: np.ndarray
) -> np.ndarray:
    """
    `(n / N) Phi_v M^-1` with `M` the full spectrum of the predictor vector, shape
    `(F, m + 1, m + 1)`. Its `(0, 0)` entry is the covariance of the target module.
    """
    scale = n_params / sample_count * np.asarray(phi_v, dtype=float)
    return scale[:, None, None] * np.linalg.inv(block.full_matrix())


def _covariance_curve(
    block: SpectralBlock,
    n_params: int,
    sample_count: int,
    noise_spectrum: np.ndarray,
    label: CurveLabel,
) -> CovarianceCurve:
    n_params = validate_int(n_params, field_name="n_params", min_value=1)
    sample_count = validate_int(sample_count, field_name="sample_count", min_value=1)
    schur = _positive_schur(block)
    values = n_params / sample_count * np.asarray(noise_spectrum, dtype=float) / schur
    return CovarianceCurve(block.grid, values, label, n_params, sample_count)


def asymptotic_cov_full(
    block: SpectralBlock, n_params: int, sample_count: int, phi_v: np.ndarray
) -> CovarianceCurve:
    """
    Asymptotic covariance of the target module for the full-MISO setup.

    Throws:
        NoExcitationMarginError: if the Schur complement is not positive somewhere.
    """
    return _covariance_curve(block, n_params, sample_count, phi_v, CurveLabel.FULL_MISO)


def asymptotic_cov_immersed(
    block: SpectralBlock, n_params: int, sample_count: int, phi_breve_v: np.ndarray
) -> CovarianceCurve:
    """
    Asymptotic covariance of the target module for an immersed setup; `block`
    uses the immersed innovation as its noise channel.

    Throws:
        NoExcitationMarginError: if the Schur complement is not positive somewhere.
    """
    return _covariance_curve(block, n_params, sample_count, phi_breve_v, CurveLabel.IMMERSED)


def comparison_condition(
    full: SpectralBlock,
    n_full: int,
    immersed: SpectralBlock,
    n_immersed: int,
    phi_v: np.ndarray,
    phi_breve_v: np.ndarray,
) -> ConditionCurve:
    """
    `Phi_breve_v / Phi_v - (n_full S_immersed) / (n_immersed S_full)` per frequency.

    The value is positive exactly where the immersed setup has the larger asymptotic
    covariance.

    Throws:
        InvalidUsageError: if the blocks live on different grids.
        NoExcitationMarginError: if a Schur complement is not positive somewhere.
    """
    full.grid.require_same(immersed.grid)
    schur_full = _positive_schur(full)
    schur_immersed = _positive_schur(immersed)
    noise_ratio = np.asarray(phi_breve_v, dtype=float) / np.asarray(phi_v, dtype=float)
    count_ratio = n_full * schur_immersed / (n_immersed * schur_full)
    values = noise_ratio - count_ratio
    signs = three_valued_sign(values, np.maximum(np.abs(noise_ratio), np.abs(count_ratio)))
    return ConditionCurve(full.grid, values, signs)


def sample_covariance(
    responses: np.ndarray, grid: FrequencyGrid, n_params: int = 0, sample_count: int = 1
) -> CovarianceCurve:
    """
    Per-frequency mean squared modulus of the deviation of estimated responses from
    their mean across runs.

    Args:
        responses: complex array `(runs, F)`.
        grid: the frequency grid.
        n_params: recorded in the curve.
        sample_count: recorded in the curve.

    Throws:
        InvalidUsageError: if there are fewer than 2 runs.
    """
    responses = np.asarray(responses, dtype=complex)
    if responses.ndim != 2 or responses.shape[0] < 2:
        raise InvalidUsageError("Sample covariance needs responses of at least 2 runs.")
    deviations = responses - responses.mean(axis=0)
    values = np.mean(np.abs(deviations) ** 2, axis=0)
    return CovarianceCurve(grid, values, CurveLabel.SAMPLE, n_params, sample_count)


def welch_cross_spectrum(
    x: Any,
    y: Any,
    grid: FrequencyGrid,
    segment_length: Optional[int] = None,
    overlap: float = 0.5,
    window: str = "hann",
) -> np.ndarray:
    """
    Welch estimate of `Phi_xy = E[conj(X) Y]` interpolated onto `grid`, normalized so
    that white noise of variance `v` has the flat level `v`.

    Args:
        x: first signal.
        y: second signal (same length).
        grid: the frequency grid.
        segment_length: samples per segment (`N / 8` by default).
        overlap: fraction of overlap between segments.
        window: window name understood by `scipy.signal.get_window`.

    Throws:
        InvalidUsageError: if the signals differ in length or are shorter than two
            segments.
    """
    x = as_signal(x, field_name="x")
    y = as_signal(y, field_name="y")
    if x.size != y.size:
        raise InvalidUsageError("Signals must have equal length.")
    segment_length = segment_length or x.size // WELCH_SEGMENTS
    validate_float(overlap, field_name="overlap", min_value=0.0, max_value=1.0)
    if segment_length < 2 or x.size < 2 * segment_length:
        raise InvalidUsageError(
            f"{x.size} samples is too short for segments of {segment_length} samples."
        )
    frequencies, spectrum = csd(
        x,
        y,
        fs=1.0,
        window=window,
        nperseg=segment_length,
        noverlap=int(overlap * segment_length),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    keep = frequencies >= 0.0
    omega = 2.0 * np.pi * frequencies[keep]
    order = np.argsort(omega)
    omega, spectrum = omega[order], spectrum[keep][order]
    real = np.interp(grid.points, omega, np.real(spectrum))
    imaginary = np.interp(grid.points, omega, np.imag(spectrum))
    return real + 1j * imaginary


def averaged_cross_spectrum(
    records: Iterable[SignalRecord],
    a: str,
    b: str,
    grid: FrequencyGrid,
    segment_length: Optional[int] = None,
) -> np.ndarray:
    """
    Mean of the Welch estimates of `Phi_ab` over several records.
    """
    estimates = [
        welch_cross_spectrum(
            record.signal(a), record.signal(b), grid, segment_length=segment_length
        )
        for record in records
    ]
    if not estimates:
        raise InvalidUsageError("No records to average.")
    return np.mean(estimates, axis=0)


class OptimalityVerdict(Enum):
    A_BETTER = "a_better"
    B_BETTER = "b_better"
    A_DOMINATES = "a_dominates"
    B_DOMINATES = "b_dominates"
    INCOMPARABLE = "incomparable"
    EQUAL = "equal"


class OptimalityComparison:
    """
    Outcome of comparing two parameter covariance matrices.

    Args:
        verdict: see `OptimalityVerdict`.
        values: the scalar measure of each matrix (the determinant of its inverse for
            D-optimality, the eigenvalues of the difference of inverses for
            E-optimality).
    """

    def __init__(self, verdict: OptimalityVerdict, values: List[float]) -> "OptimalityComparison":
        self.verdict = verdict
        self.values = values

    def _resolve(self) -> Dict[str, Any]:
        return {"verdict": self.verdict.value, "values": [float(v) for v in self.values]}

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def _check_pair(p_a: np.ndarray, p_b: np.ndarray) -> None:
    if p_a.ndim != 2 or p_a.shape[0] != p_a.shape[1] or p_a.shape != p_b.shape:
        raise InvalidUsageError(f"Cannot compare matrices of shapes {p_a.shape} and {p_b.shape}.")


def information_log_determinant(covariance: np.ndarray) -> float:
    """
    `log det(P^-1)` of a parameter covariance matrix `P`.

    Throws:
        InvalidUsageError: if `P` is not square and positive definite.
    """
    covariance = np.asarray(covariance, dtype=float)
    if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
        raise InvalidUsageError(f"Expected a square matrix, got shape {covariance.shape}.")
    sign, log_determinant = np.linalg.slogdet(covariance)
    if sign <= 0:
        raise InvalidUsageError("Covariance matrices must be positive definite.")
    return float(-log_determinant)


def d_optimality_compare(p_a: np.ndarray, p_b: np.ndarray) -> OptimalityComparison:
    """
    Compares `det(P_a^-1)` with `det(P_b^-1)`; the larger one is better (smaller
    confidence ellipsoid). Relative ties within `1e-12` are equal.

    Throws:
        InvalidUsageError: if the shapes differ or a matrix is singular.
    """
    p_a, p_b = np.asarray(p_a, dtype=float), np.asarray(p_b, dtype=float)
    _check_pair(p_a, p_b)
    log_a, log_b = information_log_determinant(p_a), information_log_determinant(p_b)
    values = [float(np.exp(log_a)), float(np.exp(log_b))]
    if abs(log_a - log_b) <= DETERMINANT_TIE:
        verdict = OptimalityVerdict.EQUAL
    elif log_a > log_b:
        verdict = OptimalityVerdict.A_BETTER
    else:
        verdict = OptimalityVerdict.B_BETTER
    return OptimalityComparison(verdict, values)


def e_optimality_compare(p_a: np.ndarray, p_b: np.ndarray) -> OptimalityComparison:
    """
    Loewner-order comparison of `P_a^-1` and `P_b^-1`: `a` dominates when the
    difference is positive semidefinite (its confidence ellipsoid lies inside `b`'s).

    Throws:
        InvalidUsageError: if the shapes differ or a matrix is singular.
    """
    p_a, p_b = np.asarray(p_a, dtype=float), np.asarray(p_b, dtype=float)
    _check_pair(p_a, p_b)
    try:
        inverse_a, inverse_b = np.linalg.inv(p_a), np.linalg.inv(p_b)
    except np.linalg.LinAlgError:
        raise InvalidUsageError("Covariance matrices must be nonsingular.")
    difference = inverse_a - inverse_b
    eigenvalues = np.linalg.eigvalsh(0.5 * (difference + difference.T))
    scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(inverse_a)))))
    tolerance = LOEWNER_TOLERANCE * scale
    if np.all(np.abs(eigenvalues) <= tolerance):
        verdict = OptimalityVerdict.EQUAL
    elif np.all(eigenvalues >= -tolerance):
        verdict = OptimalityVerdict.A_DOMINATES
    elif np.all(eigenvalues <= tolerance):
        verdict = OptimalityVerdict.B_DOMINATES
    else:
        verdict = OptimalityVerdict.INCOMPARABLE
    return OptimalityComparison(verdict, [float(value) for value in eigenvalues])


def marginal_block(covariance: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """
    The covariance of a subset of the parameters, the other parameters being
    marginalized out.
    """
    indices = list(indices)
    return np.asarray(covariance)[np.ix_(indices, indices)]
