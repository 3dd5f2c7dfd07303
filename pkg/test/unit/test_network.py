import numpy as np
import pytest

from netvariance.errors import AlgebraicLoopError, IllPosedNetworkError, InvalidUsageError
from netvariance.lti import NoiseShape, RationalTransfer
from netvariance.network import (
    Excitation,
    FrequencyGrid,
    NetworkModel,
    SignalResponses,
    ViolationKind,
    analytic_cross_spectrum,
)

from .utils import case_study_model, chain_model, loop_model


def test_uniform_grid() -> None:
    grid = FrequencyGrid.uniform(512)
    assert grid.count == 512
    assert grid.points[0] == 0.0
    assert grid.points[-1] < np.pi
    assert np.isclose(grid.points[1], np.pi / 512)


def test_uniform_grid_exclude_dc() -> None:
    grid = FrequencyGrid.uniform(8, exclude_dc=True)
    assert grid.count == 8
    assert np.isclose(grid.points[0], np.pi / 8)


def test_grid_rejects_unordered_points() -> None:
    with pytest.raises(InvalidUsageError):
        FrequencyGrid([0.1, 0.1])
    with pytest.raises(InvalidUsageError):
        FrequencyGrid([0.1, np.pi])
    with pytest.raises(InvalidUsageError):
        FrequencyGrid([])


def test_grid_mid_band() -> None:
    grid = FrequencyGrid.uniform(10)
    assert np.array_equal(np.nonzero(grid.mid_band(0.12, 0.88))[0], [2, 3, 4, 5, 6, 7, 8])


def test_grid_equality() -> None:
    assert FrequencyGrid.uniform(16) == FrequencyGrid.uniform(16)
    with pytest.raises(InvalidUsageError):
        FrequencyGrid.uniform(16).require_same(FrequencyGrid.uniform(32))


def test_model_rejects_unknown_node() -> None:
    with pytest.raises(InvalidUsageError):
        NetworkModel(2, {(3, 1): RationalTransfer([0.5], [1.0], 1)})


def test_model_drops_zero_modules() -> None:
    model = NetworkModel(2, {(2, 1): RationalTransfer.zero()})
    assert not model.has_module(2, 1)
    assert model.module(2, 1).is_zero()


def test_empty_network_is_valid() -> None:
    assert NetworkModel(3).validate().is_valid


def test_in_neighbors() -> None:
    model = case_study_model()
    assert model.in_neighbors(2) == [1, 3, 4]
    assert model.in_neighbors(4) == [3]


def test_with_module_copies() -> None:
    model = case_study_model(gain=1.0)
    scaled = model.with_module(2, 4, RationalTransfer([0.5], [1.0], 1))
    assert np.allclose(model.module(2, 4).num, [1.0])
    assert np.allclose(scaled.module(2, 4).num, [0.5])
    assert not model.with_module(2, 4, RationalTransfer.zero()).has_module(2, 4)


def test_graph_edges_follow_signal_flow() -> None:
    graph = case_study_model().graph()
    assert graph.has_edge(1, 2)
    assert graph.has_edge(4, 2)
    assert not graph.has_edge(2, 4)


def test_validate_case_study() -> None:
    assert case_study_model().validate().is_valid


def test_validate_diagonal_module() -> None:
    model = NetworkModel(2, {(1, 1): RationalTransfer([0.5], [1.0], 1)})
    assert ViolationKind.DIAGONAL_MODULE in model.validate().kinds()


def test_validate_algebraic_loop() -> None:
    model = NetworkModel(
        2, {(2, 1): RationalTransfer([0.5]), (1, 2): RationalTransfer([0.5])}
    )
    report = model.validate()
    assert report.kinds() == [ViolationKind.ALGEBRAIC_LOOP]
    with pytest.raises(AlgebraicLoopError):
        report.raise_for_violations()
    with pytest.raises(AlgebraicLoopError):
        model.simulate(100, seed=0)


def test_validate_unstable_loop() -> None:
    model = NetworkModel(
        2,
        {(2, 1): RationalTransfer([1.2], [1.0], 1), (1, 2): RationalTransfer([1.0], [1.0], 1)},
    )
    report = model.validate()
    assert ViolationKind.UNSTABLE_LOOP in report.kinds()
    with pytest.raises(IllPosedNetworkError):
        model.simulate(100, seed=0)


def test_closed_loop_response_ill_posed() -> None:
    model = NetworkModel(
        2, {(2, 1): RationalTransfer([1.0]), (1, 2): RationalTransfer([1.0])}
    )
    with pytest.raises(IllPosedNetworkError):
        model.closed_loop_response(FrequencyGrid.uniform(8))


def test_simulate_is_deterministic() -> None:
    model = case_study_model()
    first = model.simulate(500, seed=7, burn_in=50)
    second = model.simulate(500, seed=7, burn_in=50)
    other = model.simulate(500, seed=8, burn_in=50)
    assert np.array_equal(first.w, second.w)
    assert first.digest() == second.digest()
    assert first.digest() != other.digest()


def test_simulate_shapes() -> None:
    record = case_study_model().simulate(300, sample_time=0.5, seed=1, burn_in=20)
    assert record.w.shape == (4, 300)
    assert record.sample_count == 300
    assert record.node_count == 4
    assert not np.any(record.signal("r2"))
    assert np.any(record.signal("r1"))
    assert np.isclose(record.times()[-1], 299 * 0.5)


def test_simulate_delay_chain() -> None:
    record = chain_model().simulate(200, seed=3)
    w1, w2 = record.signal("w1"), record.signal("w2")
    assert np.array_equal(w1, record.signal("r1"))
    assert w2[0] == 0.0
    assert np.allclose(w2[1:], 0.5 * w1[:-1])


def test_simulate_static_edge() -> None:
    record = chain_model(static=True).simulate(100, seed=3)
    assert np.allclose(record.signal("w2"), 2.0 * record.signal("w1"))


def test_simulate_feedback_loop_matches_recursion() -> None:
    record = loop_model().simulate(400, seed=11)
    r1, e1, e2 = record.signal("r1"), record.signal("e1"), record.signal("e2")
    w1, w2 = np.zeros(400), np.zeros(400)
    lumped = 0.0
    for t in range(400):
        previous_w1 = w1[t - 1] if t else 0.0
        lumped = 0.5 * lumped + 0.4 * previous_w1
        w2[t] = lumped + e2[t]
        w1[t] = 0.3 * w2[t] + r1[t] + e1[t]
    assert np.allclose(record.signal("w1"), w1)
    assert np.allclose(record.signal("w2"), w2)


def test_simulate_supplied_excitation() -> None:
    samples = np.linspace(-1.0, 1.0, 50)
    model = NetworkModel(
        2,
        {(2, 1): RationalTransfer([1.0], [1.0], 1)},
        excitations={1: Excitation.from_signal(samples)},
    )
    record = model.simulate(50, seed=0, burn_in=10)
    assert np.array_equal(record.signal("r1"), samples)
    with pytest.raises(InvalidUsageError):
        model.simulate(60, seed=0)


def test_record_unknown_tag() -> None:
    record = chain_model().simulate(10, seed=0)
    with pytest.raises(InvalidUsageError):
        record.signal("x1")
    with pytest.raises(InvalidUsageError):
        record.signal("w3")


def test_excitation_spectral_level() -> None:
    assert Excitation.white(0.3).spectral_level() == 0.3
    assert Excitation.none().spectral_level() == 0.0
    assert np.isclose(Excitation.from_signal([1.0, -1.0]).spectral_level(), 1.0)


def test_excitation_samples_only_for_signals() -> None:
    with pytest.raises(InvalidUsageError):
        Excitation(power=1.0, signal=[1.0, 2.0])


def test_node_spectrum_of_single_node() -> None:
    model = NetworkModel(
        1,
        noise={1: NoiseShape(RationalTransfer([1.0, 0.5]), variance=2.0)},
        excitations={1: Excitation.white(0.7)},
    )
    grid = FrequencyGrid.uniform(16)
    spectrum = analytic_cross_spectrum(model, grid, "w1", "w1")
    expected = 0.7 + 2.0 * np.abs(1.0 + 0.5 * np.exp(-1j * grid.points)) ** 2
    assert np.allclose(spectrum, expected)


def test_cross_spectrum_lag_convention() -> None:
    model = NetworkModel(
        2, {(2, 1): RationalTransfer([1.0], [1.0], 1)}, excitations={1: Excitation.white(1.0)}
    )
    grid = FrequencyGrid.uniform(16, exclude_dc=True)
    spectrum = analytic_cross_spectrum(model, grid, "w1", "w2")
    assert np.allclose(spectrum, np.exp(-1j * grid.points))


def test_spectral_matrix_is_hermitian_psd() -> None:
    grid = FrequencyGrid.uniform(32)
    responses = SignalResponses.from_model(case_study_model(), grid)
    matrix = responses.spectral_matrix(["w1", "w2", "w3", "w4", "e2"])
    assert np.allclose(matrix, np.conj(np.transpose(matrix, (0, 2, 1))))
    assert np.min(np.linalg.eigvalsh(matrix)) > -1e-12


def test_signal_responses_unknown_tag() -> None:
    responses = SignalResponses.from_model(chain_model(), FrequencyGrid.uniform(4))
    with pytest.raises(InvalidUsageError):
        responses.row("w9")


def test_closed_loop_response_of_loop() -> None:
    model = loop_model()
    grid = FrequencyGrid.uniform(16)
    response = model.closed_loop_response(grid)
    g21 = model.module(2, 1).freq_response(grid.points)
    g12 = model.module(1, 2).freq_response(grid.points)
    sensitivity = 1.0 / (1.0 - g12 * g21)
    assert np.allclose(response.entry(1, "r1"), sensitivity)
    assert np.allclose(response.entry(2, "r1"), g21 * sensitivity)
    assert np.allclose(response.entry(1, "e2"), g12 * sensitivity)
