"""
Plain-text configuration dialect and the CSV / JSON exports.

A configuration is one stanza per line, `#` starts a comment:

    node <id>
    noise <id> num=[...] den=[...] lambda=<v>
    edge <from> <to> num=[...] den=[...] delay=<k>
    excite <id> white power=<v>
    [experiment]
    <key>=<value>
    <keyword> <tokens...>

Everything after the `[experiment]` header that is not a network stanza is kept
verbatim for `netvariance.experiment` to interpret.
"""

import csv
from importlib.resources import files
from json import dumps, loads
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidUsageError
from .immersion import ImmersedNetwork, immersion_report_rows
from .lti import NoiseShape, RationalTransfer
from .network import Excitation, ExcitationKind, FrequencyGrid, NetworkModel, SignalRecord
from .utils import parse_float_list, validate_float, validate_int
from .variance import ConditionCurve, CovarianceCurve

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EXPERIMENT_HEADER = "[experiment]"
NETWORK_KEYWORDS = ("node", "noise", "edge", "excite")
CASE_STUDY_FILES = {
    "one_param_g43": "case_study_one_param.cfg",
    "two_param_g43": "case_study_two_param.cfg",
}


class ConfigLine:
    """
    One meaningful line of a configuration file.

    Args:
        number: the 1-based line number (for error reporting).
        keyword: the first token (or the key of a `key=value` line).
        tokens: the remaining whitespace separated tokens.
    """

    def __init__(self, number: int, keyword: str, tokens: List[str]) -> "ConfigLine":
        self.number = number
        self.keyword = keyword
        self.tokens = tokens

    def options(self, start: int = 0) -> Dict[str, str]:
        """
        The `key=value` tokens from position `start` on.

        Throws:
            InvalidUsageError: if a token is not of the form `key=value`.
        """
        options = {}
        for token in self.tokens[start:]:
            key, separator, value = token.partition("=")
            if not separator or not key:
                raise self.error(f"expected key=value, got `{token}`")
            options[key] = value
        return options

    def integer(self, position: int, field_name: str) -> int:
        if position >= len(self.tokens):
            raise self.error(f"missing {field_name}")
        try:
            return int(self.tokens[position])
        except ValueError:
            raise self.error(f"{field_name} must be an integer, got `{self.tokens[position]}`")

    def real_at(self, position: int, field_name: str) -> float:
        if position >= len(self.tokens):
            raise self.error(f"missing {field_name}")
        return self.real({field_name: self.tokens[position]}, field_name, 0.0)

    def integer_options(
        self, start: int, allowed: Sequence[str], skip: Sequence[str] = ()
    ) -> Dict[str, int]:
        """
        The `key=value` tokens from position `start` on, restricted to `allowed` keys
        and converted to integers. Keys in `skip` are ignored.
        """
        values = {}
        for key, value in self.options(start).items():
            if key in skip:
                continue
            if key not in allowed:
                raise self.error(f"unknown option `{key}`, expected one of {list(allowed)}")
            try:
                values[key] = int(value)
            except ValueError:
                raise self.error(f"{key} must be an integer, got `{value}`")
        return values

    def real(self, options: Dict[str, str], key: str, default: float) -> float:
        if key not in options:
            return default
        try:
            return float(options[key])
        except ValueError:
            raise self.error(f"{key} must be a number, got `{options[key]}`")

    def error(self, message: str) -> InvalidUsageError:
        return InvalidUsageError(f"line {self.number} (`{self.keyword}`): {message}")


class ConfigDocument:
    """
    A parsed configuration: the network it describes and the raw experiment lines.
    """

    def __init__(self, model: NetworkModel, experiment: List[ConfigLine]) -> "ConfigDocument":
        self.model = model
        self.experiment = experiment

    @property
    def has_experiment(self) -> bool:
        return bool(self.experiment)


def _tokenize(text: str) -> Iterable[Tuple[int, List[str]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line.split()


def _transfer(
    line: ConfigLine, options: Dict[str, str], default_delay: int = 0
) -> RationalTransfer:
    numerator = parse_float_list(options.get("num", "[1.0]"), "num")
    denominator = parse_float_list(options.get("den", "[1.0]"), "den")
    try:
        delay = int(options.get("delay", default_delay))
    except ValueError:
        raise line.error(f"delay must be an integer, got `{options['delay']}`")
    return RationalTransfer(numerator, denominator, delay)


def parse_config(text: str) -> ConfigDocument:
    """
    Parses the network stanzas of a configuration and collects its experiment lines.

    Args:
        text: the configuration text.

    Returns:
        A `ConfigDocument`.

    Throws:
        InvalidUsageError: on an unknown stanza, a malformed value or a reference to
            an undeclared node.
    """
    declared: List[int] = []
    modules: Dict[Tuple[int, int], RationalTransfer] = {}
    noise: Dict[int, NoiseShape] = {}
    excitations: Dict[int, Excitation] = {}
    experiment: List[ConfigLine] = []
    referenced: List[Tuple[ConfigLine, int]] = []
    in_experiment = False
    for number, tokens in _tokenize(text):
        head = tokens[0]
        if head == EXPERIMENT_HEADER:
            in_experiment = True
            continue
        if "=" in head and head not in NETWORK_KEYWORDS:
            key, _, value = head.partition("=")
            line = ConfigLine(number, key, [value] + tokens[1:])
        else:
            line = ConfigLine(number, head, tokens[1:])
        if line.keyword == "node":
            declared.append(line.integer(0, "node id"))
        elif line.keyword == "noise":
            node = line.integer(0, "node id")
            options = line.options(1)
            variance = validate_float(
                line.real(options, "lambda", 1.0), field_name="lambda", min_value=0.0
            )
            noise[node] = NoiseShape(_transfer(line, options), variance)
            referenced.append((line, node))
        elif line.keyword == "edge":
            source, target = line.integer(0, "source node"), line.integer(1, "target node")
            if source == target:
                raise line.error("self-loops are not allowed")
            modules[(target, source)] = _transfer(line, line.options(2))
            referenced.extend([(line, source), (line, target)])
        elif line.keyword == "excite":
            node = line.integer(0, "node id")
            kind = line.tokens[1] if len(line.tokens) > 1 else ""
            if kind == "white":
                excitations[node] = Excitation.white(line.real(line.options(2), "power", 1.0))
            elif kind == "none":
                excitations[node] = Excitation.none()
            else:
                raise line.error(f"unknown excitation kind `{kind}`")
            referenced.append((line, node))
        elif in_experiment:
            experiment.append(line)
        else:
            raise line.error("unknown stanza")
    if not declared:
        raise InvalidUsageError("The configuration declares no nodes.")
    node_count = max(declared)
    if sorted(set(declared)) != list(range(1, node_count + 1)):
        raise InvalidUsageError(f"Nodes must be numbered 1..L, got {sorted(set(declared))}.")
    for line, node in referenced:
        if node not in declared:
            raise line.error(f"node {node} is not declared")
    model = NetworkModel(node_count, modules, noise, excitations)
    return ConfigDocument(model, experiment)


def parse_network(text: str) -> NetworkModel:
    return parse_config(text).model


def format_network(model: NetworkModel) -> str:
    """
    Writes a model in the configuration dialect; `parse_network` reads it back to an
    equal model.

    Throws:
        InvalidUsageError: if an excitation is an externally supplied signal.
    """
    lines = [f"node {node}" for node in model.nodes]
    for node in model.nodes:
        shape = model.noise[node]
        shaper = shape.shaper
        lines.append(
            f"noise {node} num={_floats(shaper.num)} den={_floats(shaper.den)} "
            f"lambda={shape.variance!r}"
        )
    by_source = sorted(model.modules.items(), key=lambda item: (item[0][1], item[0][0]))
    for (j, k), transfer in by_source:
        lines.append(f"edge {k} {j} {transfer.to_text()}")
    for node in model.nodes:
        excitation = model.excitations[node]
        if excitation.kind == ExcitationKind.WHITE:
            lines.append(f"excite {node} white power={excitation.power!r}")
        elif excitation.kind == ExcitationKind.SIGNAL:
            raise InvalidUsageError(
                f"Excitation of node {node} is an external signal and cannot be written."
            )
    return "\n".join(lines) + "\n"


def _floats(values: Sequence[float]) -> str:
    return "[" + ",".join(repr(float(value)) for value in values) + "]"


def read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise InvalidUsageError(f"Cannot read `{path}`: {error}")


def load_network(path: PathLike) -> NetworkModel:
    return parse_network(read_text(path))


def case_study_text(variant: str) -> str:
    """
    The checked-in configuration of a case-study variant (`one_param_g43` or
    `two_param_g43`).
    """
    if variant not in CASE_STUDY_FILES:
        raise InvalidUsageError(
            f"Unknown case-study variant `{variant}`; expected one of {sorted(CASE_STUDY_FILES)}."
        )
    return files("netvariance.data").joinpath(CASE_STUDY_FILES[variant]).read_text(
        encoding="utf-8"
    )


def write_table(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Optional[Sequence[str]] = None,
) -> Path:
    """
    Writes a UTF-8 CSV file, optionally preceded by `# ` comment lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for comment in comments or ():
            handle.write(f"# {comment}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logger.info("wrote %s", path)
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def read_table(path: PathLike) -> Tuple[List[str], List[List[str]]]:
    """
    Reads a CSV written by `write_table`, skipping comment lines.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    table = list(csv.reader(lines))
    if not table:
        raise InvalidUsageError(f"`{path}` is empty.")
    return table[0], table[1:]


def write_signal_record(record: SignalRecord, path: PathLike) -> Path:
    """
    `t,w1,...,wL,r1,...,rL`, one row per sample.
    """
    count = record.node_count
    nodes = range(1, count + 1)
    header = ["t"] + [f"w{node}" for node in nodes] + [f"r{node}" for node in nodes]
    columns = np.vstack([record.times()[None, :], record.w, record.r]).T
    return write_table(path, header, columns.tolist())


def write_curves(curves: Iterable[CovarianceCurve], path: PathLike) -> Path:
    """
    `omega,value,label,n_params,N`, curves one after the other.
    """
    rows = []
    for curve in curves:
        for omega, value in zip(curve.grid.points, curve.values):
            rows.append(
                [float(omega), float(value), curve.label.value, curve.n_params, curve.sample_count]
            )
    return write_table(path, ["omega", "value", "label", "n_params", "N"], rows)


def write_condition(condition: ConditionCurve, path: PathLike) -> Path:
    """
    `omega,condition_value,sign`.
    """
    rows = [
        [float(omega), float(value), int(sign)]
        for omega, value, sign in zip(condition.grid.points, condition.values, condition.signs)
    ]
    return write_table(path, ["omega", "condition_value", "sign"], rows)


def write_immersion_report(immersed: ImmersedNetwork, path: PathLike) -> Path:
    header, rows = immersion_report_rows(immersed)
    return write_table(path, header, rows)


def write_module_responses(
    responses: Dict[str, np.ndarray], grid: FrequencyGrid, path: PathLike
) -> Path:
    """
    `omega,re_<name>,im_<name>,...` for every named complex response on `grid`.
    """
    header = ["omega"]
    for name in responses:
        header += [f"re_{name}", f"im_{name}"]
    rows = []
    for index, omega in enumerate(grid.points):
        row = [float(omega)]
        for values in responses.values():
            row += [float(np.real(values[index])), float(np.imag(values[index]))]
        rows.append(row)
    return write_table(path, header, rows)


def write_text(text: str, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def write_manifest(manifest: Dict[str, Any], path: PathLike) -> Path:
    return write_text(dumps(manifest, indent=4, sort_keys=True) + "\n", path)


def read_manifest(path: PathLike) -> Dict[str, Any]:
    try:
        manifest = loads(read_text(path))
    except ValueError as error:
        raise InvalidUsageError(f"`{path}` is not a manifest: {error}")
    for key in ("config", "config_hash"):
        if key not in manifest:
            raise InvalidUsageError(f"Manifest `{path}` has no `{key}` entry.")
    return manifest


def grid_from_size(size: int, exclude_dc: bool = False) -> FrequencyGrid:
    return FrequencyGrid.uniform(validate_int(size, field_name="grid", min_value=2), exclude_dc)
