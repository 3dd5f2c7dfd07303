import numpy as np
import pytest

from netvariance.errors import (
    InvalidTransferError,
    InvalidUsageError,
    PoleOnUnitCircleError,
    UnstableFilterError,
)
from netvariance.lti import (
    NoiseShape,
    Polynomial,
    RationalTransfer,
    StabilityVerdict,
    noise_shape_violations,
    tf_add,
    tf_mul,
)

from .utils import fetch_sample


def test_polynomial_trims_trailing_zeros() -> None:
    polynomial = Polynomial([1.0, 2.0, 0.0, 0.0])
    assert polynomial.degree == 1
    assert polynomial == Polynomial([1.0, 2.0])


def test_polynomial_zero() -> None:
    assert Polynomial([0.0, 0.0]).is_zero()
    assert Polynomial().degree == -1


def test_polynomial_non_finite() -> None:
    with pytest.raises(InvalidUsageError):
        Polynomial([1.0, np.nan])


def test_polynomial_from_roots() -> None:
    assert np.allclose(Polynomial.from_roots([0.5, 0.2]).coefficients, [1.0, -0.7, 0.1])


def test_polynomial_shifted() -> None:
    assert Polynomial([1.0]).shifted(2) == Polynomial([0.0, 0.0, 1.0])


def test_transfer_canonical_form() -> None:
    transfer = RationalTransfer([0.0, 0.0, 0.5], [2.0, 1.0])
    assert transfer.delay == 2
    assert np.array_equal(transfer.num, [0.25])
    assert np.array_equal(transfer.den, [1.0, 0.5])


def test_transfer_cancels_common_roots() -> None:
    transfer = RationalTransfer([1.0, -0.5], [1.0, -0.7, 0.1])
    assert np.allclose(transfer.num, [1.0])
    assert np.allclose(transfer.den, [1.0, -0.2])


def test_transfer_zero_is_canonical() -> None:
    transfer = RationalTransfer([0.0, 0.0], [1.0, 0.5], 3)
    assert transfer.is_zero()
    assert transfer == RationalTransfer.zero()
    assert transfer.delay == 0
    assert np.array_equal(transfer.den, [1.0])


def test_transfer_zero_denominator() -> None:
    with pytest.raises(InvalidTransferError):
        RationalTransfer([1.0], [0.0])


def test_transfer_not_proper() -> None:
    with pytest.raises(InvalidTransferError):
        RationalTransfer([1.0], [0.0, 1.0])


def test_transfer_negative_delay() -> None:
    with pytest.raises(InvalidUsageError):
        RationalTransfer([1.0], [1.0], -1)


def test_transfer_freq_response() -> None:
    transfer = RationalTransfer([0.5], [1.0, -0.5], 1)
    assert np.isclose(transfer.freq_response(0.0), 1.0)
    omega = np.array([0.3, 1.2])
    expected = 0.5 * np.exp(-1j * omega) / (1.0 - 0.5 * np.exp(-1j * omega))
    assert np.allclose(transfer.freq_response(omega), expected)


def test_transfer_pole_on_unit_circle() -> None:
    integrator = RationalTransfer([1.0], [1.0, -1.0])
    with pytest.raises(PoleOnUnitCircleError) as error:
        integrator.freq_response(np.array([0.5, 0.0]))
    assert error.value.omega == 0.0


def test_transfer_text_round_trip() -> None:
    transfer = RationalTransfer([0.1, 1.0 / 3.0], [1.0, -0.7], 2)
    assert RationalTransfer.from_text(transfer.to_text()) == transfer


def test_transfer_text_format() -> None:
    transfer = RationalTransfer([0.5], [1.0, -0.5], 1)
    assert transfer.to_text() == "num=[0.5] den=[1.0,-0.5] delay=1"


def test_transfer_malformed_text() -> None:
    with pytest.raises(InvalidUsageError):
        RationalTransfer.from_text("num=0.5 den=[1.0]")


def test_transfer_repr() -> None:
    transfer = RationalTransfer([0.5], [1.0, -0.5], 1)
    assert fetch_sample(path="test/samples/transfers/first_order.json") == repr(transfer)


def test_transfer_impulse_response() -> None:
    transfer = RationalTransfer([1.0], [1.0, -0.5], 2)
    response = transfer.impulse_response(6)
    assert np.allclose(response, [0.0, 0.0, 1.0, 0.5, 0.25, 0.125])


def test_transfer_unstable_filter() -> None:
    transfer = RationalTransfer([1.0], [1.0, -1.5])
    with pytest.raises(UnstableFilterError):
        transfer.filter(np.ones(10))
    assert np.isclose(transfer.filter([1.0, 0.0, 0.0], long_simulation=False)[-1], 2.25)


def test_transfer_stability_verdicts() -> None:
    assert RationalTransfer([1.0], [1.0, -0.5]).stability().verdict == StabilityVerdict.STABLE
    assert RationalTransfer([1.0], [1.0, -1.0]).stability().verdict == StabilityVerdict.MARGINAL
    assert RationalTransfer([1.0], [1.0, -1.2]).stability().verdict == StabilityVerdict.UNSTABLE


def test_transfer_feedthrough() -> None:
    assert RationalTransfer([0.3, 0.1]).feedthrough() == 0.3
    assert RationalTransfer([0.3, 0.1], [1.0], 1).feedthrough() == 0.0
    assert RationalTransfer([0.3]).is_static()


def test_tf_add_keeps_shared_denominator() -> None:
    a = RationalTransfer([1.0], [1.0, -0.5])
    b = RationalTransfer([2.0], [1.0, -0.5], 1)
    total = tf_add(a, b)
    assert total.delay == 0
    assert np.allclose(total.num, [1.0, 2.0])
    assert np.allclose(total.den, [1.0, -0.5])


def test_tf_add_matches_frequency_response() -> None:
    a = RationalTransfer([0.4], [1.0, -0.5], 1)
    b = RationalTransfer([0.2, 0.1], [1.0, 0.3], 2)
    omega = np.linspace(0.0, 3.0, 7)
    expected = a.freq_response(omega) + b.freq_response(omega)
    assert np.allclose((a + b).freq_response(omega), expected)


def test_tf_add_with_negation_is_zero() -> None:
    a = RationalTransfer([0.4], [1.0, -0.5], 1)
    assert (a - a).is_zero()


def test_tf_mul_adds_delays() -> None:
    a = RationalTransfer([0.4], [1.0, -0.5], 1)
    b = RationalTransfer([0.8], [1.0], 2)
    product = tf_mul(a, b)
    assert product.delay == 3
    assert np.allclose(product.num, [0.32])
    assert np.allclose(product.den, [1.0, -0.5])


def test_tf_mul_by_zero() -> None:
    a = RationalTransfer([0.4], [1.0, -0.5], 1)
    assert tf_mul(a, RationalTransfer.zero()).is_zero()


def test_transfer_inverse() -> None:
    transfer = RationalTransfer([1.0, -0.5])
    assert transfer.inverse().isclose(RationalTransfer([1.0], [1.0, -0.5]))


def test_transfer_inverse_of_strictly_proper() -> None:
    with pytest.raises(InvalidTransferError):
        RationalTransfer([1.0], [1.0], 1).inverse()


def test_transfer_isclose_tolerance() -> None:
    a = RationalTransfer([0.5], [1.0, -0.5])
    assert a.isclose(RationalTransfer([0.5 + 1e-12], [1.0, -0.5]))
    assert not a.isclose(RationalTransfer([0.51], [1.0, -0.5]))
    assert not a.isclose(RationalTransfer([0.5], [1.0, -0.5], 1))


def test_noise_shape_spectrum() -> None:
    shape = NoiseShape(RationalTransfer([1.0, 0.5]), variance=2.0)
    assert np.isclose(shape.spectrum(0.0), 4.5)
    assert np.isclose(shape.spectrum(np.pi / 2), 2.0 * 1.25)


def test_noise_shape_default_is_white() -> None:
    shape = NoiseShape(variance=0.1)
    assert np.allclose(shape.spectrum(np.linspace(0.0, 3.0, 4)), 0.1)


def test_noise_shape_not_monic() -> None:
    with pytest.raises(InvalidTransferError):
        NoiseShape(RationalTransfer([2.0]))


def test_noise_shape_not_minimum_phase() -> None:
    assert noise_shape_violations(RationalTransfer([1.0, -2.0])) == ["not minimum phase"]
    with pytest.raises(InvalidTransferError):
        NoiseShape(RationalTransfer([1.0, -2.0]))


def test_noise_shape_unstable() -> None:
    with pytest.raises(InvalidTransferError):
        NoiseShape(RationalTransfer([1.0], [1.0, -1.5]))


def test_noise_shape_negative_variance() -> None:
    with pytest.raises(InvalidUsageError):
        NoiseShape(variance=-0.1)
