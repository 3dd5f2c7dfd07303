"""
Dynamic networks of LTI modules: `w = G w + r + v`, with `v_j = H_j e_j`.

Node ids are 1-based. A module `G_jk` describes the edge `k -> j` (node `k`
feeds node `j`), matching the usual row/column convention of the matrix form
`w = (I - G)^-1 (r + v)`.
"""

from enum import Enum
from hashlib import sha256
from json import dumps
import logging
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.linalg import block_diag, solve_triangular
from scipy.signal import dlsim, tf2ss

from .errors import (
    AlgebraicLoopError,
    IllPosedNetworkError,
    InvalidUsageError,
    PoleOnUnitCircleError,
)
from .lti import STABILITY_MARGIN, NoiseShape, RationalTransfer, noise_shape_violations
from .utils import as_signal, validate_float, validate_int

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 512
MID_BAND = (0.1, 0.9)
CONDITION_LIMIT = 1e10
DETERMINANT_FLOOR = 1e-8


class FrequencyGrid:
    """
    A strictly increasing set of radian frequencies in `[0, pi)`.

    Args:
        points: the frequencies.

    Throws:
        InvalidUsageError: if the points are empty, out of range or not strictly
            increasing.
    """

    def __init__(self, points: Sequence[float]) -> "FrequencyGrid":
        points = np.asarray(points, dtype=float).ravel()
        if points.size == 0:
            raise InvalidUsageError("A frequency grid needs at least one point.")
        if points[0] < 0.0 or points[-1] >= np.pi:
            raise InvalidUsageError("Grid frequencies must lie in [0, pi).")
        if np.any(np.diff(points) <= 0.0):
            raise InvalidUsageError("Grid frequencies must be strictly increasing.")
        points.setflags(write=False)
        self.points = points

    @staticmethod
    def uniform(count: int = DEFAULT_GRID_SIZE, exclude_dc: bool = False) -> "FrequencyGrid":
        """
        `count` uniformly spaced points from 0 (or from `pi / count` when `exclude_dc`
        is set, for formulas that divide by a spectrum vanishing at DC).
        """
        count = validate_int(count, field_name="count", min_value=1)
        if exclude_dc:
            return FrequencyGrid(np.linspace(np.pi / count, np.pi, count, endpoint=False))
        return FrequencyGrid(np.pi * np.arange(count) / count)

    @property
    def count(self) -> int:
        return self.points.size

    def mid_band(self, low: float = MID_BAND[0], high: float = MID_BAND[1]) -> np.ndarray:
        """
        Boolean mask of the points in `[low * pi, high * pi]`.
        """
        return (self.points >= low * np.pi) & (self.points <= high * np.pi)

    def require_same(self, other: "FrequencyGrid") -> None:
        if self != other:
            raise InvalidUsageError("Frequency grids do not match.")

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"FrequencyGrid(count={self.count}, first={self.points[0]:.6g})"


class ExcitationKind(Enum):
    """
    How an external excitation `r_j` is provided.

    NONE: node `j` is not excited.
    WHITE: white noise of a given power, drawn at simulation time.
    SIGNAL: an externally supplied sequence.
    """

    NONE = "none"
    WHITE = "white"
    SIGNAL = "signal"


class Excitation:
    """
    Descriptor of the external excitation of one node.

    Args:
        kind: see `ExcitationKind`.
        power: the variance of a `WHITE` excitation.
        signal: the samples of a `SIGNAL` excitation.
    """

    def __init__(
        self,
        kind: ExcitationKind = ExcitationKind.NONE,
        power: float = 0.0,
        signal: Optional[Sequence[float]] = None,
    ) -> "Excitation":
        self.kind = kind
        self.power = validate_float(power, field_name="power", min_value=0.0)
        self.signal = None
        if kind == ExcitationKind.SIGNAL:
            self.signal = as_signal(signal, field_name="signal")
        elif signal is not None:
            raise InvalidUsageError("Only SIGNAL excitations carry samples.")

    @staticmethod
    def none() -> "Excitation":
        return Excitation()

    @staticmethod
    def white(power: float) -> "Excitation":
        return Excitation(kind=ExcitationKind.WHITE, power=power)

    @staticmethod
    def from_signal(samples: Sequence[float]) -> "Excitation":
        return Excitation(kind=ExcitationKind.SIGNAL, signal=samples)

    def spectral_level(self) -> float:
        """
        Flat spectral level used for analytic spectra. Supplied signals are
        approximated as white at their sample variance.
        """
        if self.kind == ExcitationKind.WHITE:
            return self.power
        if self.kind == ExcitationKind.SIGNAL:
            return float(np.var(self.signal))
        return 0.0

    def _resolve(self) -> Dict[str, Any]:
        excitation = {"kind": self.kind.value}
        if self.kind == ExcitationKind.WHITE:
            excitation["power"] = self.power
        elif self.kind == ExcitationKind.SIGNAL:
            excitation["samples"] = int(self.signal.size)
        return excitation

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


class ViolationKind(Enum):
    DIAGONAL_MODULE = "diagonal module"
    INVALID_NOISE = "invalid noise shape"
    ALGEBRAIC_LOOP = "algebraic loop"
    UNSTABLE_LOOP = "closed loop unstable"
    ILL_POSED = "ill-posed interconnection"


class Violation:
    def __init__(self, kind: ViolationKind, message: str, detail: Any = None) -> "Violation":
        self.kind = kind
        self.message = message
        self.detail = detail

    def __repr__(self) -> str:
        return f"{self.kind.value}: {self.message}"


class ValidationReport:
    """
    The list of invariants a `NetworkModel` violates. An empty report means the
    model can be simulated and analysed.
    """

    def __init__(self, violations: Optional[List[Violation]] = None) -> "ValidationReport":
        self.violations = violations or []

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def kinds(self) -> List[ViolationKind]:
        return [violation.kind for violation in self.violations]

    def raise_for_violations(self) -> None:
        """
        Throws:
            AlgebraicLoopError: if the network has a delay-free cycle.
            IllPosedNetworkError: for any other violation.
        """
        for violation in self.violations:
            if violation.kind == ViolationKind.ALGEBRAIC_LOOP:
                raise AlgebraicLoopError(violation.detail)
        if self.violations:
            raise IllPosedNetworkError("; ".join(repr(item) for item in self.violations))

    def __repr__(self) -> str:
        return dumps([repr(item) for item in self.violations], indent=4)


def _realize(transfer: RationalTransfer) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    b = np.concatenate([np.zeros(transfer.delay), transfer.num])
    a = np.asarray(transfer.den)
    size = max(b.size, a.size)
    if size == 1:
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), float(b[0])
    b = np.pad(b, (0, size - b.size))
    a = np.pad(a, (0, size - a.size))
    a_ss, b_ss, c_ss, d_ss = tf2ss(b, a)
    order = size - 1
    return (
        np.asarray(a_ss, dtype=float).reshape(order, order),
        np.asarray(b_ss, dtype=float).reshape(order, 1),
        np.asarray(c_ss, dtype=float).reshape(1, order),
        float(np.asarray(d_ss).ravel()[0]),
    )


class NetworkModel:
    """
    A dynamic network `w_j = sum_k G_jk w_k + r_j + H_j e_j`.

    Args:
        node_count: the number of nodes `L`; nodes are numbered `1..L`.
        modules: map `(j, k) -> G_jk`; zero transfers are dropped.
        noise: map `j -> NoiseShape`; nodes without an entry carry no noise.
        excitations: map `j -> Excitation`; nodes without an entry are not excited.

    Throws:
        InvalidUsageError: if a node id is out of range or a value has the wrong type.
    """

    def __init__(
        self,
        node_count: int,
        modules: Optional[Mapping[Tuple[int, int], RationalTransfer]] = None,
        noise: Optional[Mapping[int, NoiseShape]] = None,
        excitations: Optional[Mapping[int, Excitation]] = None,
    ) -> "NetworkModel":
        self.node_count = validate_int(node_count, field_name="node_count", min_value=1)
        self.modules: Dict[Tuple[int, int], RationalTransfer] = {}
        for (j, k), transfer in sorted((modules or {}).items()):
            self._check_node(j)
            self._check_node(k)
            if not isinstance(transfer, RationalTransfer):
                raise InvalidUsageError(f"Module G{j}{k} must be a RationalTransfer.")
            if not transfer.is_zero():
                self.modules[(j, k)] = transfer
        self.noise: Dict[int, NoiseShape] = {}
        for node in self.nodes:
            shape = (noise or {}).get(node, NoiseShape(variance=0.0))
            if not isinstance(shape, NoiseShape):
                raise InvalidUsageError(f"Noise of node {node} must be a NoiseShape.")
            self.noise[node] = shape
        for node in noise or {}:
            self._check_node(node)
        self.excitations: Dict[int, Excitation] = {}
        for node in self.nodes:
            excitation = (excitations or {}).get(node, Excitation.none())
            if not isinstance(excitation, Excitation):
                raise InvalidUsageError(f"Excitation of node {node} must be an Excitation.")
            self.excitations[node] = excitation
        for node in excitations or {}:
            self._check_node(node)

    def _check_node(self, node: int) -> None:
        validate_int(node, field_name="node", min_value=1, max_value=self.node_count)

    @property
    def nodes(self) -> List[int]:
        return list(range(1, self.node_count + 1))

    def module(self, j: int, k: int) -> RationalTransfer:
        return self.modules.get((j, k), RationalTransfer.zero())

    def has_module(self, j: int, k: int) -> bool:
        return (j, k) in self.modules

    def in_neighbors(self, j: int) -> List[int]:
        """
        The nodes `k` with a module `G_jk`, in increasing order.
        """
        self._check_node(j)
        return sorted(k for (row, k) in self.modules if row == j and k != j)

    def with_module(self, j: int, k: int, transfer: RationalTransfer) -> "NetworkModel":
        """
        A copy of this model with `G_jk` replaced (or removed if `transfer` is zero).
        """
        modules = dict(self.modules)
        modules[(j, k)] = transfer
        return NetworkModel(self.node_count, modules, self.noise, self.excitations)

    def graph(self) -> nx.DiGraph:
        """
        The module graph, with an edge `k -> j` (attribute `transfer`) per module.
        """
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        for (j, k), transfer in self.modules.items():
            graph.add_edge(k, j, transfer=transfer)
        return graph

    def module_matrix(self, omega: Any) -> np.ndarray:
        """
        `G(e^{i omega})` stacked over frequencies, shape `(F, L, L)`.
        """
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        matrix = np.zeros((omega.size, self.node_count, self.node_count), dtype=complex)
        for (j, k), transfer in self.modules.items():
            matrix[:, j - 1, k - 1] = transfer.freq_response(omega)
        return matrix

    def noise_shaper_values(self, omega: Any) -> np.ndarray:
        """
        `H_k(e^{i omega})` for every node, shape `(F, L)`.
        """
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        return np.stack(
            [self.noise[node].shaper.freq_response(omega) for node in self.nodes], axis=1
        )

    def delay_free_cycle(self) -> Optional[List[int]]:
        """
        A cycle made only of modules with direct feedthrough, if there is one.
        """
        try:
            edges = nx.find_cycle(self._feedthrough_graph())
        except nx.NetworkXNoCycle:
            return None
        return [edge[0] for edge in edges] + [edges[-1][1]]

    def state_space(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        A state-space realization `(A, B, C, D)` of the closed loop from `s = r + v`
        to `w`, built from one `tf2ss` realization per module.

        Throws:
            AlgebraicLoopError: if the network has a delay-free cycle.
        """
        cycle = self.delay_free_cycle()
        if cycle is not None:
            raise AlgebraicLoopError(cycle)
        size = self.node_count
        edges = list(self.modules.items())
        realizations = [_realize(transfer) for _, transfer in edges]
        states = sum(r[0].shape[0] for r in realizations)
        if states:
            a = block_diag(*[r[0] for r in realizations]).reshape(states, states)
            b = block_diag(*[r[1] for r in realizations]).reshape(states, len(edges))
            c = block_diag(*[r[2] for r in realizations]).reshape(len(edges), states)
        else:
            a = np.zeros((0, 0))
            b = np.zeros((0, len(edges)))
            c = np.zeros((len(edges), 0))
        d = np.array([r[3] for r in realizations])
        into = np.zeros((size, len(edges)))
        out_of = np.zeros((len(edges), size))
        for index, ((j, k), _) in enumerate(edges):
            into[j - 1, index] = 1.0
            out_of[index, k - 1] = 1.0
        feedthrough = into @ np.diag(d) @ out_of
        order = list(nx.topological_sort(self._feedthrough_graph()))
        perm = np.array(order) - 1
        permuted = np.eye(size) - feedthrough[np.ix_(perm, perm)]
        inverse_permuted = solve_triangular(
            permuted, np.eye(size), lower=True, unit_diagonal=True
        )
        restore = np.argsort(perm)
        interconnect = inverse_permuted[np.ix_(restore, restore)]
        b_in = b @ out_of @ interconnect
        return (
            a + b_in @ into @ c,
            b_in,
            interconnect @ into @ c,
            interconnect,
        )

    def _feedthrough_graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(
            (k, j) for (j, k), transfer in self.modules.items() if transfer.feedthrough() != 0.0
        )
        return graph

    def closed_loop_poles(self) -> np.ndarray:
        a = self.state_space()[0]
        if a.size == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(a)

    def validate(self, grid: Optional[FrequencyGrid] = None) -> ValidationReport:
        """
        Checks every structural and well-posedness invariant of the model.

        Args:
            grid: frequencies on which `det(I - G)` is checked (512 uniform points by
                default).

        Returns:
            A `ValidationReport`; it is empty iff the model can be simulated.
        """
        grid = grid or FrequencyGrid.uniform()
        violations = []
        for j, k in self.modules:
            if j == k:
                violations.append(
                    Violation(ViolationKind.DIAGONAL_MODULE, f"G{j}{k} is on the diagonal")
                )
        for node in self.nodes:
            problems = noise_shape_violations(self.noise[node].shaper)
            if problems:
                violations.append(
                    Violation(ViolationKind.INVALID_NOISE, f"H{node}: {', '.join(problems)}")
                )
        cycle = self.delay_free_cycle()
        if cycle is not None:
            path = " -> ".join(str(node) for node in cycle)
            violations.append(Violation(ViolationKind.ALGEBRAIC_LOOP, path, cycle))
            return ValidationReport(violations)
        poles = self.closed_loop_poles()
        if poles.size and np.max(np.abs(poles)) >= 1.0 - STABILITY_MARGIN:
            violations.append(
                Violation(
                    ViolationKind.UNSTABLE_LOOP,
                    f"largest closed-loop pole magnitude {np.max(np.abs(poles)):.6g}",
                )
            )
        try:
            matrix = np.eye(self.node_count) - self.module_matrix(grid.points)
        except PoleOnUnitCircleError as error:
            violations.append(Violation(ViolationKind.ILL_POSED, str(error), error.omega))
            return ValidationReport(violations)
        determinants = np.abs(np.linalg.det(matrix))
        if np.min(determinants) < DETERMINANT_FLOOR:
            index = int(np.argmin(determinants))
            violations.append(
                Violation(
                    ViolationKind.ILL_POSED,
                    f"det(I - G) = {determinants[index]:.3g} at omega={grid.points[index]:.6g}",
                    float(grid.points[index]),
                )
            )
        return ValidationReport(violations)

    def simulate(
        self,
        sample_count: int,
        sample_time: float = 1.0,
        seed: Optional[int] = None,
        burn_in: int = 0,
    ) -> "SignalRecord":
        """
        Simulates the network from zero initial conditions.

        White noises `e_1..e_L` are drawn first (one row per node, scaled by
        `sqrt(lambda_j)`), then the white excitations in node order, all from
        `numpy.random.default_rng(seed)`. The first `burn_in` samples are discarded.

        Args:
            sample_count: the number of recorded samples `N`.
            sample_time: the sample time `T_s` in seconds.
            seed: seed of the random generator.
            burn_in: the number of leading samples to drop.

        Returns:
            A `SignalRecord` holding `w`, `r` and `e`.

        Throws:
            AlgebraicLoopError: if the network has a delay-free cycle.
            IllPosedNetworkError: if any other invariant is violated.
        """
        sample_count = validate_int(sample_count, field_name="sample_count", min_value=1)
        burn_in = validate_int(burn_in, field_name="burn_in", min_value=0)
        sample_time = validate_float(
            sample_time, field_name="sample_time", min_value=0.0, strict=True
        )
        self.validate().raise_for_violations()
        total = sample_count + burn_in
        rng = np.random.default_rng(seed)
        variances = np.array([self.noise[node].variance for node in self.nodes])
        e = rng.standard_normal((self.node_count, total)) * np.sqrt(variances)[:, None]
        r = np.zeros((self.node_count, total))
        for node in self.nodes:
            excitation = self.excitations[node]
            if excitation.kind == ExcitationKind.WHITE:
                r[node - 1] = rng.standard_normal(total) * np.sqrt(excitation.power)
            elif excitation.kind == ExcitationKind.SIGNAL:
                if excitation.signal.size != sample_count:
                    raise InvalidUsageError(
                        f"Excitation of node {node} has {excitation.signal.size} samples, "
                        f"expected {sample_count}."
                    )
                r[node - 1, burn_in:] = excitation.signal
        v = np.stack(
            [self.noise[node].shaper.filter(e[node - 1]) for node in self.nodes], axis=0
        )
        a, b, c, d = self.state_space()
        drive = (r + v).T
        if a.size == 0:
            w = drive @ d.T
        else:
            _, w = dlsim((a, b, c, d, sample_time), drive)[:2]
        logger.debug(
            "simulated %d samples (burn-in %d) with seed %s", sample_count, burn_in, seed
        )
        return SignalRecord(
            w=np.ascontiguousarray(w.T[:, burn_in:]),
            r=np.ascontiguousarray(r[:, burn_in:]),
            e=np.ascontiguousarray(e[:, burn_in:]),
            sample_time=sample_time,
            seed=seed,
        )

    def closed_loop_response(self, grid: FrequencyGrid) -> "ClosedLoopResponse":
        """
        `T(omega) = (I - G)^-1 [diag(H), I]`, mapping the sources
        `e_1..e_L, r_1..r_L` to the node signals.

        Throws:
            IllPosedNetworkError: if `I - G` is numerically singular at a grid point.
        """
        matrix = np.eye(self.node_count) - self.module_matrix(grid.points)
        conditions = np.linalg.cond(matrix)
        bad = ~np.isfinite(conditions) | (conditions > CONDITION_LIMIT)
        if np.any(bad):
            raise IllPosedNetworkError(
                "I - G is near-singular", float(grid.points[int(np.argmax(bad))])
            )
        inverse = np.linalg.inv(matrix)
        shapers = self.noise_shaper_values(grid.points)
        transfer = np.concatenate([inverse * shapers[:, None, :], inverse], axis=2)
        return ClosedLoopResponse(grid=grid, matrix=transfer, sources=self.source_tags())

    def source_tags(self) -> List[str]:
        return [f"e{node}" for node in self.nodes] + [f"r{node}" for node in self.nodes]

    def source_powers(self) -> np.ndarray:
        """
        Flat spectral levels of the independent sources `e_1..e_L, r_1..r_L`.
        """
        for node in self.nodes:
            if self.excitations[node].kind == ExcitationKind.SIGNAL:
                logger.warning(
                    "excitation of node %d is a supplied signal; treating it as white "
                    "at its sample variance for analytic spectra",
                    node,
                )
        return np.array(
            [self.noise[node].variance for node in self.nodes]
            + [self.excitations[node].spectral_level() for node in self.nodes]
        )

    def signal_responses(self, grid: FrequencyGrid) -> "SignalResponses":
        return SignalResponses.from_model(self, grid)

    def _resolve(self) -> Dict[str, Any]:
        return {
            "node_count": self.node_count,
            "modules": {f"G{j}{k}": tf._resolve() for (j, k), tf in self.modules.items()},
            "noise": {f"H{node}": shape._resolve() for node, shape in self.noise.items()},
            "excitations": {
                f"r{node}": excitation._resolve()
                for node, excitation in self.excitations.items()
                if excitation.kind != ExcitationKind.NONE
            },
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


class ClosedLoopResponse:
    """
    Per-frequency map from the independent sources to the node signals.

    Args:
        grid: the frequency grid.
        matrix: complex array of shape `(F, L, 2L)`.
        sources: the source tag of every column (`e1..eL, r1..rL`).
    """

    def __init__(
        self, grid: FrequencyGrid, matrix: np.ndarray, sources: List[str]
    ) -> "ClosedLoopResponse":
        self.grid = grid
        self.matrix = matrix
        self.sources = sources

    def column(self, source: str) -> np.ndarray:
        if source not in self.sources:
            raise InvalidUsageError(f"Unknown source `{source}`.")
        return self.matrix[:, :, self.sources.index(source)]

    def entry(self, node: int, source: str) -> np.ndarray:
        return self.column(source)[:, node - 1]


class SignalRecord:
    """
    One simulated realization of a network.

    Args:
        w: node signals, shape `(L, N)`.
        r: excitations, shape `(L, N)` (zero rows for unexcited nodes).
        e: the white noises that drove the simulation, shape `(L, N)`.
        sample_time: `T_s` in seconds.
        seed: the seed the record was generated with.
    """

    def __init__(
        self,
        w: np.ndarray,
        r: np.ndarray,
        e: np.ndarray,
        sample_time: float = 1.0,
        seed: Optional[int] = None,
    ) -> "SignalRecord":
        if not (w.shape == r.shape == e.shape) or w.ndim != 2:
            raise InvalidUsageError("w, r and e must all have shape (L, N).")
        self.w = w
        self.r = r
        self.e = e
        self.sample_time = sample_time
        self.seed = seed

    @property
    def node_count(self) -> int:
        return self.w.shape[0]

    @property
    def sample_count(self) -> int:
        return self.w.shape[1]

    def signal(self, tag: str) -> np.ndarray:
        """
        The samples of a node signal (`w<k>`), excitation (`r<k>`) or white noise
        (`e<k>`).
        """
        kind, node = _split_tag(tag)
        if kind not in ("w", "r", "e") or not 1 <= node <= self.node_count:
            raise InvalidUsageError(f"Unknown signal tag `{tag}`.")
        return getattr(self, kind)[node - 1]

    def times(self) -> np.ndarray:
        return np.arange(self.sample_count) * self.sample_time

    def digest(self) -> str:
        """
        SHA-256 of the recorded node signals and excitations.
        """
        hasher = sha256()
        hasher.update(np.ascontiguousarray(self.w).tobytes())
        hasher.update(np.ascontiguousarray(self.r).tobytes())
        return hasher.hexdigest()


def _split_tag(tag: str) -> Tuple[str, int]:
    head = tag.rstrip("0123456789")
    digits = tag[len(head):]
    if not head or not digits:
        raise InvalidUsageError(f"Unknown signal tag `{tag}`.")
    return head, int(digits)


class SignalResponses:
    """
    Per-frequency responses of named signals to the independent white sources of a
    network, with the flat source powers. Every cross-spectrum follows the
    convention `Phi_ab(omega) = E[conj(A(omega)) B(omega)]`.

    Args:
        grid: the frequency grid.
        rows: map tag -> complex array of shape `(F, S)`.
        sources: the `S` source tags.
        powers: the `S` flat source powers.
    """

    def __init__(
        self,
        grid: FrequencyGrid,
        rows: Mapping[str, np.ndarray],
        sources: List[str],
        powers: np.ndarray,
    ) -> "SignalResponses":
        self.grid = grid
        self.rows = dict(rows)
        self.sources = list(sources)
        self.powers = np.asarray(powers, dtype=float)
        for tag, row in self.rows.items():
            if row.shape != (grid.count, len(self.sources)):
                raise InvalidUsageError(f"Row `{tag}` has shape {row.shape}.")

    @staticmethod
    def from_model(model: NetworkModel, grid: FrequencyGrid) -> "SignalResponses":
        """
        Rows for every `w<k>`, `e<k>`, `r<k>` and `v<k>` of a model.
        """
        response = model.closed_loop_response(grid)
        sources = response.sources
        count = grid.count
        rows = {}
        shapers = model.noise_shaper_values(grid.points)
        for node in model.nodes:
            rows[f"w{node}"] = response.matrix[:, node - 1, :]
            unit_e = np.zeros((count, len(sources)), dtype=complex)
            unit_e[:, sources.index(f"e{node}")] = 1.0
            rows[f"e{node}"] = unit_e
            rows[f"v{node}"] = unit_e * shapers[:, node - 1][:, None]
            unit_r = np.zeros((count, len(sources)), dtype=complex)
            unit_r[:, sources.index(f"r{node}")] = 1.0
            rows[f"r{node}"] = unit_r
        return SignalResponses(grid, rows, sources, model.source_powers())

    def row(self, tag: str) -> np.ndarray:
        if tag not in self.rows:
            raise InvalidUsageError(f"Unknown signal tag `{tag}`.")
        return self.rows[tag]

    def with_rows(self, extra: Mapping[str, np.ndarray]) -> "SignalResponses":
        rows = dict(self.rows)
        rows.update(extra)
        return SignalResponses(self.grid, rows, self.sources, self.powers)

    def cross_spectrum(self, a: str, b: str) -> np.ndarray:
        return np.sum(np.conj(self.row(a)) * self.row(b) * self.powers, axis=1)

    def spectral_matrix(self, tags: Iterable[str]) -> np.ndarray:
        """
        `Phi[f, p, q] = Phi_{tag_p tag_q}(omega_f)`; Hermitian positive semidefinite
        at every frequency.
        """
        stacked = np.stack([self.row(tag) for tag in tags], axis=1)
        return np.einsum("fas,fbs,s->fab", np.conj(stacked), stacked, self.powers)


def analytic_cross_spectrum(
    model: NetworkModel, grid: FrequencyGrid, a: str, b: str
) -> np.ndarray:
    """
    The exact cross-spectrum `Phi_ab` of two signals of the true network.

    Args:
        model: the network.
        grid: the frequencies.
        a: tag of the first signal (`w<k>`, `e<k>`, `r<k>` or `v<k>`).
        b: tag of the second signal.

    Throws:
        InvalidUsageError: if a tag is unknown.
    """
    return SignalResponses.from_model(model, grid).cross_spectrum(a, b)
