import numpy as np
import pytest

from netvariance.errors import ConsistencyError, InvalidUsageError
from netvariance.immersion import (
    CONFOUNDING_NOTE,
    PredictorSet,
    check_consistency_conditions,
    enumerate_valid_predictor_sets,
    grid_spectral_factor,
    immerse,
    immersed_noise_spectrum,
    immersion_report_rows,
)
from netvariance.lti import RationalTransfer
from netvariance.network import FrequencyGrid, NetworkModel

from .utils import G21, G23, G43_TWO_PARAM, NOISE_VARIANCE, case_study_model, fetch_sample
from .utils import random_network

GRID = FrequencyGrid.uniform(64)


def _module(gain: float = 0.5, pole: float = 0.2) -> RationalTransfer:
    return RationalTransfer([gain], [1.0, -pole], 1)


def test_predictor_set_rejects_output_node() -> None:
    with pytest.raises(InvalidUsageError):
        PredictorSet(2, 1, [1, 2])


def test_predictor_set_rejects_empty() -> None:
    with pytest.raises(InvalidUsageError):
        PredictorSet(2, 1, [])


def test_predictor_set_orders_inputs() -> None:
    predictor_set = PredictorSet(2, 3, [4, 3, 1, 4])
    assert predictor_set.predictors == (1, 3, 4)
    assert predictor_set.ordered_inputs() == [3, 1, 4]


def test_predictor_set_repr() -> None:
    predictor_set = PredictorSet(2, 1, [3, 1])
    assert fetch_sample(path="test/samples/predictors/case_study_immersed.json") == repr(
        predictor_set
    )


def test_full_predictor_set() -> None:
    model = case_study_model()
    full = PredictorSet.full(model, 2, 1)
    assert full.predictors == (1, 3, 4)
    assert full.removed_inputs(model) == []
    assert PredictorSet(2, 1, [1, 3]).removed_inputs(model) == [4]
    assert PredictorSet(2, 1, [1, 3]).eliminated_nodes(model) == [4]


def test_case_study_sets_are_consistent() -> None:
    model = case_study_model()
    for predictors in ([1, 3, 4], [1, 3]):
        verdict = check_consistency_conditions(model, PredictorSet(2, 1, predictors))
        assert verdict.satisfied
        assert verdict.notes == [CONFOUNDING_NOTE]


def test_target_input_missing() -> None:
    verdict = check_consistency_conditions(case_study_model(), PredictorSet(2, 1, [3, 4]))
    assert not verdict.satisfied
    assert "target input is not a predictor" in [item.condition for item in verdict.violations]


def test_parallel_path_violation() -> None:
    model = NetworkModel(3, {(2, 1): _module(), (3, 1): _module(), (2, 3): _module()})
    verdict = check_consistency_conditions(model, PredictorSet(2, 1, [1]))
    assert [item.condition for item in verdict.violations] == [
        "parallel path avoids the predictors"
    ]
    assert verdict.violations[0].witness == [1, 3, 2]
    assert check_consistency_conditions(model, PredictorSet(2, 1, [1, 3])).satisfied


def test_loop_violation() -> None:
    model = NetworkModel(3, {(2, 1): _module(), (3, 2): _module(), (2, 3): _module()})
    verdict = check_consistency_conditions(model, PredictorSet(2, 1, [1]))
    assert [item.condition for item in verdict.violations] == ["loop avoids the predictors"]
    assert verdict.violations[0].witness == [2, 3, 2]
    with pytest.raises(ConsistencyError):
        verdict.raise_for_violations()


def test_missing_module() -> None:
    with pytest.raises(InvalidUsageError):
        check_consistency_conditions(case_study_model(), PredictorSet(4, 1, [1]))


def test_enumerate_valid_predictor_sets() -> None:
    found = enumerate_valid_predictor_sets(case_study_model(), 2, 1)
    assert [item.predictors for item in found] == [(1, 3), (1, 3, 4)]


def test_enumerate_keeps_full_set_when_capped() -> None:
    found = enumerate_valid_predictor_sets(case_study_model(), 2, 1, max_sets=1)
    assert [item.predictors for item in found] == [(1, 3), (1, 3, 4)]


def test_immerse_case_study_lumped_transfers() -> None:
    for gain in (0.05, 1.0):
        model = case_study_model(gain=gain, two_param=True)
        immersed = immerse(model, PredictorSet(2, 1, [1, 3]), GRID)
        expected = G23 + RationalTransfer([gain], [1.0], 1) * G43_TWO_PARAM
        assert immersed.lumped_transfers[1].isclose(G21)
        assert immersed.lumped_transfers[3].isclose(expected)
        assert np.allclose(immersed.lumped_values[3], expected.freq_response(GRID.points))


def test_immerse_case_study_noise_spectrum() -> None:
    gain = 0.5
    model = case_study_model(gain=gain)
    immersed = immerse(model, PredictorSet(2, 1, [1, 3]), GRID)
    assert np.allclose(immersed.noise_spectrum, NOISE_VARIANCE * (1.0 + gain**2))
    assert np.allclose(immersed.phi_v, NOISE_VARIANCE)
    assert sorted(immersed.noise_contributions()) == ["e2", "e4"]
    assert immersed.noise_tag() == "bv2"
    assert immersed.innovation_tag() == "be2"


def test_immerse_full_set_changes_nothing() -> None:
    model = case_study_model()
    immersed = immerse(model, PredictorSet.full(model, 2, 1), GRID)
    assert np.allclose(immersed.noise_spectrum, immersed.phi_v)
    for node in (1, 3, 4):
        assert immersed.lumped_transfers[node].isclose(model.module(2, node))


def test_immerse_rejects_inconsistent_set() -> None:
    model = case_study_model()
    with pytest.raises(ConsistencyError):
        immerse(model, PredictorSet(2, 1, [1]), GRID)


def test_immerse_force(caplog: pytest.LogCaptureFixture) -> None:
    model = case_study_model()
    immersed = immerse(model, PredictorSet(2, 1, [1]), GRID, force=True)
    assert "forcing immersion" in caplog.text
    g31, g24, g43 = model.module(3, 1), model.module(2, 4), model.module(4, 3)
    expected = G21 + G23 * g31 + g24 * g43 * g31
    assert immersed.lumped_transfers[1].isclose(expected, tolerance=1e-8)


def test_immerse_matches_kron_reduction() -> None:
    for seed in range(5):
        model, j, k = random_network(seed)
        predictor_set = PredictorSet(j, k, [k, 4])
        immersed = immerse(model, predictor_set, GRID, force=True)
        keep = [j, k, 4]
        drop = [node for node in model.nodes if node not in keep]
        reduction = np.eye(model.node_count) - model.module_matrix(GRID.points)
        kk = np.ix_(range(GRID.count), [n - 1 for n in keep], [n - 1 for n in keep])
        kz = np.ix_(range(GRID.count), [n - 1 for n in keep], [n - 1 for n in drop])
        zk = np.ix_(range(GRID.count), [n - 1 for n in drop], [n - 1 for n in keep])
        zz = np.ix_(range(GRID.count), [n - 1 for n in drop], [n - 1 for n in drop])
        reduced = reduction[kk] - reduction[kz] @ np.linalg.solve(reduction[zz], reduction[zk])
        for position, node in ((1, k), (2, 4)):
            expected = -reduced[:, 0, position] / reduced[:, 0, 0]
            assert np.allclose(immersed.lumped_values[node], expected)


def test_immersed_noise_spectrum_helper() -> None:
    model = case_study_model(gain=1.0)
    spectrum = immersed_noise_spectrum(model, PredictorSet(2, 1, [1, 3]), GRID)
    assert np.allclose(spectrum, 2.0 * NOISE_VARIANCE)


def test_signal_rows_whiten_the_noise() -> None:
    model = case_study_model(gain=0.5)
    immersed = immerse(model, PredictorSet(2, 1, [1, 3]), GRID)
    rows = immersed.signal_rows()
    innovation = np.sum(np.abs(rows["be2"]) ** 2 * immersed.powers, axis=1)
    assert np.allclose(innovation, innovation[0], rtol=1e-6)


def test_grid_spectral_factor_of_moving_average() -> None:
    grid = FrequencyGrid.uniform(512)
    shaper = 1.0 + 0.5 * np.exp(-1j * grid.points)
    factor = grid_spectral_factor(2.0 * np.abs(shaper) ** 2, grid)
    assert np.isclose(factor.variance, 2.0, rtol=1e-3)
    assert np.allclose(factor.values, shaper, rtol=1e-2, atol=1e-2)
    assert np.allclose(factor.spectrum(), 2.0 * np.abs(shaper) ** 2, rtol=1e-2)


def test_grid_spectral_factor_rejects_zero() -> None:
    with pytest.raises(InvalidUsageError):
        grid_spectral_factor(np.zeros(GRID.count), GRID)


def test_immersion_report_rows() -> None:
    immersed = immerse(case_study_model(), PredictorSet(2, 1, [1, 3]), GRID)
    header, rows = immersion_report_rows(immersed)
    assert header == ["omega", "phi_breve_v", "phi_v", "abs_G21", "abs_G23"]
    assert len(rows) == GRID.count
    assert np.isclose(rows[0][1], 2.0 * NOISE_VARIANCE)
