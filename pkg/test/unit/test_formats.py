from pathlib import Path

import numpy as np
import pytest

from netvariance.errors import InvalidUsageError
from netvariance.formats import (
    CASE_STUDY_FILES,
    case_study_text,
    format_network,
    grid_from_size,
    load_network,
    parse_config,
    parse_network,
    read_manifest,
    read_table,
    write_condition,
    write_curves,
    write_immersion_report,
    write_manifest,
    write_module_responses,
    write_signal_record,
    write_table,
)
from netvariance.immersion import PredictorSet, immerse
from netvariance.lti import NoiseShape, RationalTransfer
from netvariance.network import Excitation, FrequencyGrid, NetworkModel
from netvariance.variance import ConditionCurve, CovarianceCurve, CurveLabel

from .utils import case_study_model, fetch_sample

GRID = FrequencyGrid.uniform(4)


def _two_node_model() -> NetworkModel:
    return NetworkModel(
        2,
        {(2, 1): RationalTransfer([0.5], [1.0, -0.5], 1)},
        noise={
            1: NoiseShape(variance=0.1),
            2: NoiseShape(RationalTransfer([1.0, 0.5]), variance=0.2),
        },
        excitations={1: Excitation.white(1.0)},
    )


def test_format_network() -> None:
    assert fetch_sample(path="test/samples/networks/two_node.cfg") == format_network(
        _two_node_model()
    )


def test_parse_network_reads_formatted_model() -> None:
    model = parse_network(fetch_sample(path="test/samples/networks/two_node.cfg"))
    assert model.node_count == 2
    assert model.module(2, 1) == RationalTransfer([0.5], [1.0, -0.5], 1)
    assert model.noise[2] == NoiseShape(RationalTransfer([1.0, 0.5]), variance=0.2)
    assert model.excitations[1].power == 1.0
    assert format_network(model) == format_network(_two_node_model())


def test_load_network(tmp_path: Path) -> None:
    path = tmp_path / "network.cfg"
    path.write_text(format_network(_two_node_model()))
    assert load_network(path).has_module(2, 1)
    with pytest.raises(InvalidUsageError):
        load_network(tmp_path / "missing.cfg")


def test_parse_config_comments_and_defaults() -> None:
    document = parse_config(
        "# a comment\nnode 1\nnode 2  # trailing\nedge 1 2 num=[0.5] delay=1\n"
    )
    assert not document.has_experiment
    assert document.model.module(2, 1) == RationalTransfer([0.5], [1.0], 1)
    assert document.model.noise[1].variance == 0.0


def test_parse_config_experiment_lines() -> None:
    document = parse_config("node 1\n[experiment]\nN=500\ntarget 2 1\n")
    assert document.has_experiment
    keywords = [(line.keyword, line.tokens) for line in document.experiment]
    assert keywords == [("N", ["500"]), ("target", ["2", "1"])]


def test_parse_config_errors() -> None:
    with pytest.raises(InvalidUsageError):
        parse_config("")
    with pytest.raises(InvalidUsageError):
        parse_config("node 1\nnode 3\n")
    with pytest.raises(InvalidUsageError):
        parse_config("node 1\nedge 1 2 num=[0.5]\n")
    with pytest.raises(InvalidUsageError):
        parse_config("node 1\nnode 2\nedge 1 1 num=[0.5]\n")
    with pytest.raises(InvalidUsageError):
        parse_config("node 1\nbogus 1\n")
    with pytest.raises(InvalidUsageError):
        parse_config("node 1\nexcite 1 pink\n")
    with pytest.raises(InvalidUsageError):
        parse_config("node 1\nnoise 1 lambda=abc\n")
    with pytest.raises(InvalidUsageError):
        parse_config("node x\n")


def test_parse_config_reports_line_number() -> None:
    with pytest.raises(InvalidUsageError) as error:
        parse_config("node 1\n\nnoise 1 lambda=abc\n")
    assert "line 3" in str(error.value)


def test_case_study_files_match_builder() -> None:
    one = parse_network(case_study_text("one_param_g43"))
    two = parse_network(case_study_text("two_param_g43"))
    assert format_network(one) == format_network(case_study_model())
    assert format_network(two) == format_network(case_study_model(two_param=True))
    assert sorted(CASE_STUDY_FILES) == ["one_param_g43", "two_param_g43"]


def test_unknown_case_study() -> None:
    with pytest.raises(InvalidUsageError):
        case_study_text("three_param")


def test_format_network_rejects_supplied_signal() -> None:
    model = NetworkModel(1, excitations={1: Excitation.from_signal([1.0, 2.0])})
    with pytest.raises(InvalidUsageError):
        format_network(model)


def test_write_table_comments(tmp_path: Path) -> None:
    path = write_table(tmp_path / "sub" / "t.csv", ["a", "b"], [[0.1, 2]], comments=["note"])
    assert path.read_text() == "# note\na,b\n0.1,2\n"
    assert read_table(path) == (["a", "b"], [["0.1", "2"]])


def test_read_table_empty(tmp_path: Path) -> None:
    path = tmp_path / "empty.csv"
    path.write_text("# only a comment\n")
    with pytest.raises(InvalidUsageError):
        read_table(path)


def test_write_signal_record(tmp_path: Path) -> None:
    record = _two_node_model().simulate(5, sample_time=0.5, seed=0)
    header, rows = read_table(write_signal_record(record, tmp_path / "record.csv"))
    assert header == ["t", "w1", "w2", "r1", "r2"]
    assert len(rows) == 5
    assert float(rows[2][0]) == 1.0
    assert float(rows[3][1]) == record.w[0, 3]


def test_write_curves(tmp_path: Path) -> None:
    curves = [
        CovarianceCurve(GRID, np.full(4, 0.5), CurveLabel.FULL_MISO, 6, 100),
        CovarianceCurve(GRID, np.full(4, 0.25), CurveLabel.IMMERSED, 5, 100),
    ]
    header, rows = read_table(write_curves(curves, tmp_path / "curves.csv"))
    assert header == ["omega", "value", "label", "n_params", "N"]
    assert len(rows) == 8
    assert rows[4][1:] == ["0.25", "immersed", "5", "100"]


def test_write_condition(tmp_path: Path) -> None:
    condition = ConditionCurve(GRID, np.array([0.1, -0.1, 0.0, 0.2]), np.array([1, -1, 0, 1]))
    header, rows = read_table(write_condition(condition, tmp_path / "condition.csv"))
    assert header == ["omega", "condition_value", "sign"]
    assert [row[2] for row in rows] == ["1", "-1", "0", "1"]


def test_write_immersion_report(tmp_path: Path) -> None:
    immersed = immerse(case_study_model(), PredictorSet(2, 1, [1, 3]), GRID)
    header, rows = read_table(write_immersion_report(immersed, tmp_path / "immersion.csv"))
    assert header[:3] == ["omega", "phi_breve_v", "phi_v"]
    assert len(rows) == GRID.count


def test_write_module_responses(tmp_path: Path) -> None:
    responses = {"G21": np.array([1.0 + 2.0j, 0.5, 0.0, -1.0j])}
    header, rows = read_table(write_module_responses(responses, GRID, tmp_path / "g.csv"))
    assert header == ["omega", "re_G21", "im_G21"]
    assert rows[0][1:] == ["1.0", "2.0"]


def test_manifest_round_trip(tmp_path: Path) -> None:
    path = write_manifest({"config": "node 1\n", "config_hash": "abc"}, tmp_path / "m.json")
    assert read_manifest(path)["config_hash"] == "abc"


def test_manifest_missing_keys(tmp_path: Path) -> None:
    path = tmp_path / "m.json"
    path.write_text('{"config": "node 1"}')
    with pytest.raises(InvalidUsageError):
        read_manifest(path)
    path.write_text("not json")
    with pytest.raises(InvalidUsageError):
        read_manifest(path)


def test_grid_from_size() -> None:
    assert grid_from_size(8).count == 8
    with pytest.raises(InvalidUsageError):
        grid_from_size(1)
