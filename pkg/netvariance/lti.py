"""
Discrete-time polynomials and rational transfer functions in the delay operator
`q^-1` (so that `q^-1 u(t) = u(t - 1)`).

Every object in this module is an immutable value: arithmetic returns new,
canonicalized objects and nothing is ever modified in place.
"""

from enum import Enum
from json import dumps
import re
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npp
from scipy.signal import lfilter

from .errors import (
    InvalidTransferError,
    InvalidUsageError,
    PoleOnUnitCircleError,
    UnstableFilterError,
)
from .utils import as_signal, parse_float_list, validate_float, validate_int

CANCELLATION_TOLERANCE = 1e-9
STABILITY_MARGIN = 1e-8
TRIM_TOLERANCE = 1e-14
POLE_TOLERANCE = 1e-12

_TEXT_FORM = re.compile(
    r"^\s*num=(\[[^\]]*\])\s+den=(\[[^\]]*\])\s+delay=(-?\d+)\s*$"
)

Coefficients = Union[Sequence[float], np.ndarray, "Polynomial"]


def _format_floats(values: Iterable[float]) -> str:
    return "[" + ",".join(repr(float(value)) for value in values) + "]"


class Polynomial:
    """
    A real polynomial in `q^-1`; coefficient `k` multiplies `q^-k`.

    Trailing (negligible) coefficients are trimmed on construction so that two
    polynomials describing the same function compare equal. The zero polynomial
    has no coefficients and degree -1.

    Args:
        coefficients: the coefficients, lowest power of `q^-1` first.

    Throws:
        InvalidUsageError: if a coefficient is not a finite real number.
    """

    def __init__(self, coefficients: Coefficients = ()) -> "Polynomial":
        if isinstance(coefficients, Polynomial):
            values = coefficients.coefficients
        else:
            values = np.atleast_1d(np.asarray(coefficients, dtype=float)).ravel()
        if not np.all(np.isfinite(values)):
            raise InvalidUsageError("Polynomial coefficients must be finite.")
        if values.size:
            scale = float(np.max(np.abs(values)))
            keep = np.nonzero(np.abs(values) > TRIM_TOLERANCE * scale)[0]
            values = values[: keep[-1] + 1] if keep.size else values[:0]
        values = values.copy()
        values.setflags(write=False)
        self.coefficients = values

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def is_zero(self) -> bool:
        return self.coefficients.size == 0

    def evaluate(self, z_inverse: Any) -> np.ndarray:
        """
        Evaluates the polynomial at `q^-1 = z_inverse` (scalar or array).
        """
        if self.is_zero():
            return np.zeros_like(np.asarray(z_inverse, dtype=complex))
        return npp.polyval(z_inverse, self.coefficients)

    def roots(self) -> np.ndarray:
        """
        Returns the roots in the z-plane, computed as companion-matrix eigenvalues.

        A root `p` corresponds to a factor `(1 - p q^-1)`.
        """
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.coefficients).astype(complex)

    def scaled(self, gain: float) -> "Polynomial":
        return Polynomial(self.coefficients * gain)

    def shifted(self, steps: int) -> "Polynomial":
        """
        Multiplies by `q^-steps` (prepends `steps` zero coefficients).
        """
        if self.is_zero():
            return self
        return Polynomial(np.concatenate([np.zeros(steps), self.coefficients]))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npp.polyadd(self.coefficients, other.coefficients))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scaled(-1.0)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if self.is_zero() or other.is_zero():
            return Polynomial()
        return Polynomial(np.convolve(self.coefficients, other.coefficients))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coefficients, other.coefficients)

    def __hash__(self) -> int:
        return hash(tuple(self.coefficients.tolist()))

    def __len__(self) -> int:
        return self.coefficients.size

    def __repr__(self) -> str:
        return f"Polynomial({_format_floats(self.coefficients)})"

    @staticmethod
    def from_roots(roots: Sequence[complex], gain: float = 1.0) -> "Polynomial":
        """
        Builds `gain * prod(1 - p q^-1)`; complex roots must come in conjugate pairs.
        """
        return Polynomial(gain * np.real(np.poly(np.asarray(roots, dtype=complex))))


class StabilityVerdict(Enum):
    """
    Outcome of a root-magnitude check against the unit circle.
    """

    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


class StabilityReport:
    """
    Verdict of a stability check together with the pole magnitudes behind it.

    Args:
        verdict: `STABLE` if every pole is inside `1 - margin`, `UNSTABLE` if one
            lies outside `1 + margin` and `MARGINAL` otherwise.
        magnitudes: the magnitudes of the denominator roots.
    """

    def __init__(self, verdict: StabilityVerdict, magnitudes: np.ndarray) -> "StabilityReport":
        self.verdict = verdict
        self.magnitudes = magnitudes

    @property
    def is_stable(self) -> bool:
        return self.verdict == StabilityVerdict.STABLE

    def _resolve(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "magnitudes": [float(value) for value in self.magnitudes],
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def _classify_roots(roots: np.ndarray, margin: float) -> StabilityReport:
    magnitudes = np.sort(np.abs(roots))[::-1]
    if magnitudes.size == 0 or magnitudes[0] < 1.0 - margin:
        verdict = StabilityVerdict.STABLE
    elif magnitudes[0] > 1.0 + margin:
        verdict = StabilityVerdict.UNSTABLE
    else:
        verdict = StabilityVerdict.MARGINAL
    return StabilityReport(verdict=verdict, magnitudes=magnitudes)


def _cancel_common_roots(
    numerator: Polynomial, denominator: Polynomial, tolerance: float
) -> Tuple[Polynomial, Polynomial]:
    zeros = list(numerator.roots())
    poles = list(denominator.roots())
    if not zeros or not poles:
        return numerator, denominator
    kept_zeros = []
    for zero in zeros:
        match = None
        for index, pole in enumerate(poles):
            if abs(zero - pole) <= tolerance * max(1.0, abs(pole)):
                match = index
                break
        if match is None:
            kept_zeros.append(zero)
        else:
            poles.pop(match)
    if len(kept_zeros) == len(zeros):
        return numerator, denominator
    gain = numerator.coefficients[0]
    return Polynomial.from_roots(kept_zeros, gain), Polynomial.from_roots(poles)


class RationalTransfer:
    """
    A proper rational transfer function `q^-delay * num(q^-1) / den(q^-1)`.

    The constructor brings the transfer into canonical form:

    - the denominator is scaled so its constant term is 1;
    - leading zero coefficients of the numerator are moved into `delay`;
    - numerator and denominator roots closer than `cancellation_tolerance`
        (relative) are cancelled pairwise;
    - the zero transfer is stored as `num=[] den=[1] delay=0`.

    Args:
        numerator: numerator coefficients in `q^-1` (or a `Polynomial`).
        denominator: denominator coefficients in `q^-1` (defaults to `[1]`).
        delay: pure input delay in samples (non-negative).
        cancellation_tolerance: relative root distance below which a pole and a
            zero cancel.

    Throws:
        InvalidTransferError: if the denominator is zero or has a zero constant
            term (the transfer would not be proper).
    """

    def __init__(
        self,
        numerator: Coefficients,
        denominator: Coefficients = (1.0,),
        delay: int = 0,
        cancellation_tolerance: float = CANCELLATION_TOLERANCE,
    ) -> "RationalTransfer":
        delay = validate_int(delay, field_name="delay", min_value=0)
        num = Polynomial(numerator)
        den = Polynomial(denominator)
        if den.is_zero():
            raise InvalidTransferError("invalid transfer: zero denominator")
        if den.coefficients[0] == 0.0:
            raise InvalidTransferError(
                "invalid transfer: denominator constant term is zero (not proper)"
            )
        lead = den.coefficients[0]
        num, den = num.scaled(1.0 / lead), den.scaled(1.0 / lead)
        if num.is_zero():
            num, den, delay = Polynomial(), Polynomial([1.0]), 0
        else:
            leading_zeros = int(np.argmax(num.coefficients != 0.0))
            if leading_zeros:
                num = Polynomial(num.coefficients[leading_zeros:])
                delay += leading_zeros
            num, den = _cancel_common_roots(num, den, cancellation_tolerance)
        self.numerator = num
        self.denominator = den
        self.delay = delay

    @property
    def num(self) -> np.ndarray:
        return self.numerator.coefficients

    @property
    def den(self) -> np.ndarray:
        return self.denominator.coefficients

    def is_zero(self) -> bool:
        return self.numerator.is_zero()

    def is_static(self) -> bool:
        return self.delay == 0 and len(self.numerator) <= 1 and len(self.denominator) == 1

    def is_strictly_proper(self) -> bool:
        return self.is_zero() or self.delay > 0

    def feedthrough(self) -> float:
        """
        The instantaneous gain (impulse response at `t = 0`).
        """
        if self.is_strictly_proper():
            return 0.0
        return float(self.num[0])

    def freq_response(self, omega: Any) -> np.ndarray:
        """
        Evaluates `G(e^{i omega})` on a scalar or an array of radian frequencies.

        Args:
            omega: radian frequencies.

        Returns:
            Complex values with the same shape as `omega`.

        Throws:
            PoleOnUnitCircleError: if the denominator vanishes at some frequency.
        """
        omega = np.asarray(omega, dtype=float)
        z_inverse = np.exp(-1j * omega)
        den = self.denominator.evaluate(z_inverse)
        small = np.atleast_1d(np.abs(den) < POLE_TOLERANCE)
        if np.any(small):
            raise PoleOnUnitCircleError(float(np.atleast_1d(omega)[np.argmax(small)]))
        return z_inverse**self.delay * self.numerator.evaluate(z_inverse) / den

    def poles(self) -> np.ndarray:
        return self.denominator.roots()

    def zeros(self) -> np.ndarray:
        return self.numerator.roots()

    def stability(self, margin: float = STABILITY_MARGIN) -> StabilityReport:
        """
        Classifies the transfer as stable, marginal or unstable from its pole magnitudes.
        """
        return _classify_roots(self.poles(), margin)

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        return self.stability(margin).is_stable

    def is_monic(self, tolerance: float = TRIM_TOLERANCE) -> bool:
        """
        Whether the numerator and denominator both start with 1 and there is no delay.
        """
        if self.is_zero() or self.delay != 0:
            return False
        return abs(self.num[0] - 1.0) <= tolerance and abs(self.den[0] - 1.0) <= tolerance

    def is_minimum_phase(self, margin: float = STABILITY_MARGIN) -> bool:
        """
        Whether the transfer has no delay and all of its zeros lie strictly inside the
        unit circle.
        """
        if self.is_zero() or self.delay != 0:
            return False
        return _classify_roots(self.zeros(), margin).is_stable

    def filter(
        self,
        signal: Any,
        initial_state: Optional[Sequence[float]] = None,
        long_simulation: bool = True,
    ) -> np.ndarray:
        """
        Runs a signal through the transfer, i.e. solves
        `den(q^-1) y(t) = num(q^-1) u(t - delay)`.

        Args:
            signal: the input samples `u`.
            initial_state: direct-form-II-transposed filter state (zero by default),
                as accepted by `scipy.signal.lfilter`.
            long_simulation: if `True`, refuse to run a filter that is not stable.

        Returns:
            The output samples, same length as `signal`.

        Throws:
            UnstableFilterError: if `long_simulation` is set and the transfer is not
                stable.
        """
        u = as_signal(signal, field_name="signal", min_length=0)
        if long_simulation and not self.is_stable():
            raise UnstableFilterError(
                f"unstable filter: pole magnitudes {self.stability().magnitudes.tolist()}"
            )
        if self.is_zero():
            return np.zeros_like(u)
        b = np.concatenate([np.zeros(self.delay), self.num])
        if initial_state is None:
            return lfilter(b, self.den, u)
        y, _ = lfilter(b, self.den, u, zi=np.asarray(initial_state, dtype=float))
        return y

    def impulse_response(self, length: int) -> np.ndarray:
        length = validate_int(length, field_name="length", min_value=1)
        impulse = np.zeros(length)
        impulse[0] = 1.0
        return self.filter(impulse, long_simulation=False)

    def scaled(self, gain: float) -> "RationalTransfer":
        gain = validate_float(gain, field_name="gain")
        return RationalTransfer(self.num * gain, self.den, self.delay)

    def inverse(self) -> "RationalTransfer":
        """
        Returns `1 / G`.

        Throws:
            InvalidTransferError: if `G` is strictly proper (its inverse is not proper).
        """
        if self.is_strictly_proper():
            raise InvalidTransferError(
                "invalid transfer: inverse of a strictly proper transfer is not proper"
            )
        return RationalTransfer(self.den, self.num, 0)

    def __add__(self, other: "RationalTransfer") -> "RationalTransfer":
        return tf_add(self, other)

    def __sub__(self, other: "RationalTransfer") -> "RationalTransfer":
        return tf_add(self, other.scaled(-1.0))

    def __neg__(self) -> "RationalTransfer":
        return self.scaled(-1.0)

    def __mul__(self, other: "RationalTransfer") -> "RationalTransfer":
        return tf_mul(self, other)

    def __truediv__(self, other: "RationalTransfer") -> "RationalTransfer":
        return tf_mul(self, other.inverse())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RationalTransfer):
            return NotImplemented
        return (
            self.delay == other.delay
            and self.numerator == other.numerator
            and self.denominator == other.denominator
        )

    def __hash__(self) -> int:
        return hash((self.delay, self.numerator, self.denominator))

    def isclose(self, other: "RationalTransfer", tolerance: float = 1e-10) -> bool:
        """
        Coefficient-wise comparison of two canonical transfers.
        """
        if self.delay != other.delay:
            return False
        for mine, theirs in ((self.num, other.num), (self.den, other.den)):
            if mine.shape != theirs.shape or not np.allclose(
                mine, theirs, rtol=tolerance, atol=tolerance
            ):
                return False
        return True

    def to_text(self) -> str:
        """
        Serializes to `num=[b0,b1,...] den=[1,a1,...] delay=k`; round-trips exactly
        through `RationalTransfer.from_text`.
        """
        return (
            f"num={_format_floats(self.num)} den={_format_floats(self.den)} "
            f"delay={self.delay}"
        )

    @staticmethod
    def from_text(text: str) -> "RationalTransfer":
        """
        Parses the text form written by `to_text`.

        Throws:
            InvalidUsageError: if `text` does not have the expected shape.
        """
        match = _TEXT_FORM.match(text)
        if match is None:
            raise InvalidUsageError(f"Not a transfer description: {text!r}")
        return RationalTransfer(
            parse_float_list(match.group(1), "num"),
            parse_float_list(match.group(2), "den"),
            int(match.group(3)),
        )

    @staticmethod
    def zero() -> "RationalTransfer":
        return RationalTransfer([])

    @staticmethod
    def unit() -> "RationalTransfer":
        return RationalTransfer([1.0])

    def _resolve(self) -> Dict[str, Any]:
        return {
            "num": [float(value) for value in self.num],
            "den": [float(value) for value in self.den],
            "delay": self.delay,
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)

    def __str__(self) -> str:
        return self.to_text()


def tf_add(a: RationalTransfer, b: RationalTransfer) -> RationalTransfer:
    """
    Exact sum of two transfers by cross-multiplication, then canonicalization.

    When both transfers share a denominator it is kept as is rather than squared.
    """
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    delay = min(a.delay, b.delay)
    a_num = a.numerator.shifted(a.delay - delay)
    b_num = b.numerator.shifted(b.delay - delay)
    if a.denominator == b.denominator:
        return RationalTransfer(a_num + b_num, a.denominator, delay)
    numerator = a_num * b.denominator + b_num * a.denominator
    return RationalTransfer(numerator, a.denominator * b.denominator, delay)


def tf_mul(a: RationalTransfer, b: RationalTransfer) -> RationalTransfer:
    """
    Exact product of two transfers by convolution, then canonicalization.
    """
    if a.is_zero() or b.is_zero():
        return RationalTransfer.zero()
    return RationalTransfer(
        a.numerator * b.numerator, a.denominator * b.denominator, a.delay + b.delay
    )


class NoiseShape:
    """
    A white noise of a given variance shaped by a monic, stable and minimum-phase
    filter: `v(t) = H(q) e(t)` with `E[e^2] = variance`.

    Args:
        shaper: the noise filter `H`.
        variance: the variance of the driving white noise (may be zero).

    Throws:
        InvalidTransferError: if `shaper` is not monic, stable and minimum-phase.
        InvalidUsageError: if `variance` is negative.
    """

    def __init__(
        self, shaper: Optional[RationalTransfer] = None, variance: float = 1.0
    ) -> "NoiseShape":
        shaper = RationalTransfer.unit() if shaper is None else shaper
        if not isinstance(shaper, RationalTransfer):
            raise InvalidUsageError(f"`shaper` must be a RationalTransfer, not {type(shaper)}.")
        self.variance = validate_float(variance, field_name="variance", min_value=0.0)
        problems = noise_shape_violations(shaper)
        if problems:
            raise InvalidTransferError(
                f"invalid noise shaper {shaper.to_text()}: {', '.join(problems)}"
            )
        self.shaper = shaper

    def spectrum(self, omega: Any) -> np.ndarray:
        """
        `variance * |H(e^{i omega})|^2` on the given frequencies.
        """
        return self.variance * np.abs(self.shaper.freq_response(omega)) ** 2

    def _resolve(self) -> Dict[str, Any]:
        return {"shaper": self.shaper._resolve(), "variance": self.variance}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NoiseShape):
            return NotImplemented
        return self.shaper == other.shaper and self.variance == other.variance

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def noise_shape_violations(shaper: RationalTransfer) -> List[str]:
    """
    Lists the ways in which `shaper` fails to be monic, stable and minimum-phase.
    """
    problems = []
    if not shaper.is_monic():
        problems.append("not monic")
    if not shaper.is_stable():
        problems.append("not stable")
    if not shaper.is_minimum_phase():
        problems.append("not minimum phase")
    return problems


def noise_spectrum(shape: NoiseShape, omega: Any) -> np.ndarray:
    return shape.spectrum(omega)
