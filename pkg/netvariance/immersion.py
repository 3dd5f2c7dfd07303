"""
Predictor-input selection and network immersion.

Identifying `G_jk` with only a subset `D` of the in-neighbours of `j` as
predictor inputs amounts to eliminating every other node from the network. The
retained modules turn into lumped transfers and the noise of node `j` collects
the contributions of the eliminated sources.
"""

from itertools import combinations
from json import dumps
import logging
from typing import Any, Dict, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from .errors import ConsistencyError, IllPosedNetworkError, InvalidTransferError, InvalidUsageError
from .lti import RationalTransfer
from .network import CONDITION_LIMIT, FrequencyGrid, NetworkModel
from .utils import coerce_to_list, validate_int

logger = logging.getLogger(__name__)

EXACT_ELIMINATION_LIMIT = 3
CONFOUNDING_NOTE = "absence of confounding variables is NOT verified"


class PredictorSet:
    """
    The predictor inputs `D` chosen to identify the module `G_jk`.

    Args:
        target_output: the output node `j`.
        target_input: the input node `k` of the target module.
        predictors: the node ids used as predictor inputs.

    Throws:
        InvalidUsageError: if `j` is among the predictors or the set is empty.
    """

    def __init__(
        self, target_output: int, target_input: int, predictors: Iterable[int]
    ) -> "PredictorSet":
        self.target_output = validate_int(target_output, field_name="target_output", min_value=1)
        self.target_input = validate_int(target_input, field_name="target_input", min_value=1)
        predictors = coerce_to_list(list(predictors), (int, np.integer), min_size=1)
        self.predictors = tuple(sorted(int(node) for node in set(predictors)))
        if self.target_output in self.predictors:
            raise InvalidUsageError(
                f"Output node {self.target_output} cannot be its own predictor input."
            )

    @staticmethod
    def full(model: NetworkModel, j: int, k: int) -> "PredictorSet":
        """
        The full-MISO predictor set: every in-neighbour of `j`.
        """
        return PredictorSet(j, k, model.in_neighbors(j))

    def removed_inputs(self, model: NetworkModel) -> List[int]:
        """
        The in-neighbours of `j` left out of the predictor set.
        """
        return [node for node in model.in_neighbors(self.target_output) if node not in self]

    def eliminated_nodes(self, model: NetworkModel) -> List[int]:
        keep = set(self.predictors) | {self.target_output}
        return [node for node in model.nodes if node not in keep]

    def ordered_inputs(self) -> List[int]:
        """
        The predictors with the target input first, then the rest in increasing order.
        """
        rest = [node for node in self.predictors if node != self.target_input]
        return [self.target_input] + rest if self.target_input in self else rest

    def __contains__(self, node: int) -> bool:
        return node in self.predictors

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PredictorSet):
            return NotImplemented
        return (self.target_output, self.target_input, self.predictors) == (
            other.target_output,
            other.target_input,
            other.predictors,
        )

    def __hash__(self) -> int:
        return hash((self.target_output, self.target_input, self.predictors))

    def _resolve(self) -> Dict[str, Any]:
        return {
            "target": [self.target_output, self.target_input],
            "predictors": list(self.predictors),
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


class ConsistencyViolation:
    """
    A failed condition together with a witness path in the module graph.
    """

    def __init__(self, condition: str, witness: List[int]) -> "ConsistencyViolation":
        self.condition = condition
        self.witness = witness

    def __repr__(self) -> str:
        path = " -> ".join(str(node) for node in self.witness)
        return f"{self.condition}: {path}" if path else self.condition


class ConsistencyVerdict:
    """
    Outcome of the predictor-set conditions. The confounding-variable condition has
    no graph procedure here and is listed in `notes` as unverified.
    """

    def __init__(
        self, predictor_set: PredictorSet, violations: List[ConsistencyViolation]
    ) -> "ConsistencyVerdict":
        self.predictor_set = predictor_set
        self.violations = violations
        self.notes = [CONFOUNDING_NOTE]

    @property
    def satisfied(self) -> bool:
        return not self.violations

    def raise_for_violations(self) -> None:
        if self.violations:
            raise ConsistencyError(
                f"predictor set {list(self.predictor_set.predictors)} for "
                f"G{self.predictor_set.target_output}{self.predictor_set.target_input}: "
                + "; ".join(repr(item) for item in self.violations)
            )

    def _resolve(self) -> Dict[str, Any]:
        return {
            "satisfied": self.satisfied,
            "violations": [repr(item) for item in self.violations],
            "notes": self.notes,
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def check_consistency_conditions(
    model: NetworkModel, predictor_set: PredictorSet
) -> ConsistencyVerdict:
    """
    Checks the graph conditions under which the direct method with predictor inputs
    `D` consistently estimates `G_jk`:

    - `k` is a predictor input;
    - every path from `k` to `j` other than the direct edge passes through a node of
        `D \\ {k}`;
    - every loop through `j` passes through a node of `D`.

    Args:
        model: the network.
        predictor_set: the target and predictor inputs.

    Returns:
        A `ConsistencyVerdict` listing each violation with a witness path.

    Throws:
        InvalidUsageError: if the module `G_jk` does not exist.
    """
    j, k = predictor_set.target_output, predictor_set.target_input
    if not model.has_module(j, k):
        raise InvalidUsageError(f"no such module G{j}{k}")
    graph = model.graph()
    violations = []
    if k not in predictor_set:
        violations.append(ConsistencyViolation("target input is not a predictor", [k]))

    parallel = graph.copy()
    parallel.remove_nodes_from(node for node in predictor_set.predictors if node != k)
    parallel.remove_edge(k, j)
    if nx.has_path(parallel, k, j):
        violations.append(
            ConsistencyViolation(
                "parallel path avoids the predictors", nx.shortest_path(parallel, k, j)
            )
        )

    loops = graph.copy()
    loops.remove_nodes_from(predictor_set.predictors)
    for node in sorted(loops.predecessors(j)):
        if nx.has_path(loops, j, node):
            witness = nx.shortest_path(loops, j, node) + [j]
            violations.append(ConsistencyViolation("loop avoids the predictors", witness))
            break
    return ConsistencyVerdict(predictor_set, violations)


def enumerate_valid_predictor_sets(
    model: NetworkModel, j: int, k: int, max_sets: Optional[int] = None
) -> List[PredictorSet]:
    """
    Every predictor set for `G_jk` that passes `check_consistency_conditions`,
    smallest first (ties in lexicographic order). The full in-neighbour set is
    always part of the result, also when `max_sets` cuts the search short.
    """
    if not model.has_module(j, k):
        raise InvalidUsageError(f"no such module G{j}{k}")
    others = [node for node in model.nodes if node not in (j, k)]
    found = []
    for size in range(len(others) + 1):
        for extra in combinations(others, size):
            candidate = PredictorSet(j, k, (k,) + extra)
            if check_consistency_conditions(model, candidate).satisfied:
                found.append(candidate)
            if max_sets is not None and len(found) >= max_sets:
                break
        if max_sets is not None and len(found) >= max_sets:
            break
    full = PredictorSet.full(model, j, k)
    if full not in found:
        found.append(full)
    return found


def _eliminate_exactly(
    model: NetworkModel, eliminated: List[int], j: int, inputs: List[int]
) -> Optional[Dict[int, RationalTransfer]]:
    modules = dict(model.modules)
    unit = RationalTransfer.unit()
    remaining = list(model.nodes)
    for z in eliminated:
        remaining.remove(z)
        loop = unit - modules.get((z, z), RationalTransfer.zero())
        try:
            gain = loop.inverse()
        except InvalidTransferError:
            return None
        for a in remaining:
            into_a = modules.get((a, z))
            if into_a is None:
                continue
            via = into_a * gain
            for b in remaining:
                from_b = modules.get((z, b))
                if from_b is not None:
                    modules[(a, b)] = modules.get((a, b), RationalTransfer.zero()) + via * from_b
        modules = {key: tf for key, tf in modules.items() if z not in key and not tf.is_zero()}
    self_loop = modules.get((j, j), RationalTransfer.zero())
    try:
        scale = (unit - self_loop).inverse()
    except InvalidTransferError:
        return None
    return {
        node: modules.get((j, node), RationalTransfer.zero()) * scale for node in inputs
    }


class ImmersedNetwork:
    """
    The identification problem of node `j` after eliminating every node outside
    `D` and `j`:

    `w_j - r_j = sum_{k in D} Ğ_jk w_k + breve v_j`.

    Args:
        predictor_set: the target and predictor inputs.
        grid: the frequency grid.
        lumped_values: map `k -> Ğ_jk(e^{i omega})`.
        lumped_transfers: map `k -> Ğ_jk` as exact rational transfers, or `None` when
            too many nodes were eliminated for exact elimination.
        noise_row: per-frequency transfer from every source into `breve v_j`,
            shape `(F, S)`.
        sources: the source tags.
        powers: the flat source powers.
        phi_v: the spectrum of the original noise `v_j`.
    """

    def __init__(
        self,
        predictor_set: PredictorSet,
        grid: FrequencyGrid,
        lumped_values: Dict[int, np.ndarray],
        lumped_transfers: Optional[Dict[int, RationalTransfer]],
        noise_row: np.ndarray,
        sources: List[str],
        powers: np.ndarray,
        phi_v: np.ndarray,
    ) -> "ImmersedNetwork":
        self.predictor_set = predictor_set
        self.grid = grid
        self.lumped_values = lumped_values
        self.lumped_transfers = lumped_transfers
        self.noise_row = noise_row
        self.sources = sources
        self.powers = powers
        self.phi_v = phi_v

    @property
    def noise_spectrum(self) -> np.ndarray:
        return np.sum(np.abs(self.noise_row) ** 2 * self.powers, axis=1)

    def noise_contributions(self) -> Dict[str, np.ndarray]:
        """
        The share of `Phi_breve_v` coming from each source, for sources that contribute.
        """
        shares = np.abs(self.noise_row) ** 2 * self.powers
        return {
            source: shares[:, index]
            for index, source in enumerate(self.sources)
            if np.any(shares[:, index] > 0.0)
        }

    def noise_tag(self) -> str:
        return f"bv{self.predictor_set.target_output}"

    def innovation_tag(self) -> str:
        return f"be{self.predictor_set.target_output}"

    def signal_rows(self) -> Dict[str, np.ndarray]:
        """
        Rows for `breve v_j` (`bv<j>`) and its normalized innovation `breve e_j`
        (`be<j>`), ready for `SignalResponses.with_rows`. The innovation is
        `breve v_j` filtered by the inverse of its minimum-phase spectral factor.
        """
        factor = grid_spectral_factor(self.noise_spectrum, self.grid)
        return {
            self.noise_tag(): self.noise_row,
            self.innovation_tag(): self.noise_row / factor.values[:, None],
        }

    def _resolve(self) -> Dict[str, Any]:
        return {
            "predictor_set": self.predictor_set._resolve(),
            "lumped_transfers": None
            if self.lumped_transfers is None
            else {
                f"G{self.predictor_set.target_output}{k}": tf._resolve()
                for k, tf in self.lumped_transfers.items()
            },
            "grid_points": self.grid.count,
        }

    def __repr__(self) -> str:
        return dumps(self._resolve(), indent=4)


def _check_conditioning(matrix: np.ndarray, grid: FrequencyGrid) -> None:
    conditions = np.linalg.cond(matrix)
    bad = ~np.isfinite(conditions) | (conditions > CONDITION_LIMIT)
    if np.any(bad):
        raise IllPosedNetworkError(
            "eliminated subnetwork ill-posed", float(grid.points[int(np.argmax(bad))])
        )


def immerse(
    model: NetworkModel,
    predictor_set: PredictorSet,
    grid: FrequencyGrid,
    force: bool = False,
) -> ImmersedNetwork:
    """
    Builds the immersed identification problem of `predictor_set`.

    With `Z` the nodes outside `D` and `j`, the lumped transfers are
    `Ğ_jD = (G_jD + G_jZ (I - G_ZZ)^-1 G_ZD) / (1 - s)` with the self-term
    `s = G_jZ (I - G_ZZ)^-1 G_Zj`, evaluated per frequency. When at most three
    nodes are eliminated the lumped transfers are also built as exact rational
    functions by sequential node elimination.

    Args:
        model: the network.
        predictor_set: the target and predictor inputs.
        grid: the frequency grid.
        force: immerse even if the consistency conditions fail (logs a warning).

    Returns:
        The `ImmersedNetwork`.

    Throws:
        ConsistencyError: if the conditions fail and `force` is not set.
        IllPosedNetworkError: if `I - G_ZZ` or `1 - s` is singular on the grid.
    """
    verdict = check_consistency_conditions(model, predictor_set)
    if not verdict.satisfied:
        if not force:
            verdict.raise_for_violations()
        logger.warning("forcing immersion of an inconsistent predictor set: %s", verdict.violations)
    j = predictor_set.target_output
    inputs = list(predictor_set.predictors)
    eliminated = predictor_set.eliminated_nodes(model)
    count = grid.count
    matrix = model.module_matrix(grid.points)
    d_index = np.array(inputs) - 1
    z_index = np.array(eliminated, dtype=int) - 1
    row_j = matrix[:, j - 1, :]
    shapers = model.noise_shaper_values(grid.points)
    node_count = model.node_count
    if eliminated:
        loop = np.eye(len(eliminated)) - matrix[:, z_index[:, None], z_index[None, :]]
        _check_conditioning(loop, grid)
        # K = G_jZ (I - G_ZZ)^-1, solved as (I - G_ZZ)^T K^T = G_jZ^T
        gain = np.linalg.solve(
            np.transpose(loop, (0, 2, 1)), row_j[:, z_index][:, :, None]
        )[:, :, 0]
        self_term = np.einsum("fz,fz->f", gain, matrix[:, z_index, j - 1])
        through = matrix[:, z_index][:, :, d_index]
        direct = row_j[:, d_index] + np.einsum("fz,fzd->fd", gain, through)
    else:
        gain = np.zeros((count, 0), dtype=complex)
        self_term = np.zeros(count, dtype=complex)
        direct = row_j[:, d_index]
    divisor = 1.0 - self_term
    if np.any(np.abs(divisor) < 1.0 / CONDITION_LIMIT):
        bad = int(np.argmax(np.abs(divisor) < 1.0 / CONDITION_LIMIT))
        raise IllPosedNetworkError("self-loop of the output node", float(grid.points[bad]))
    lumped = direct / divisor[:, None]

    sources = model.source_tags()
    noise_row = np.zeros((count, len(sources)), dtype=complex)
    noise_row[:, j - 1] = shapers[:, j - 1] / divisor
    noise_row[:, node_count + j - 1] = 1.0 / divisor - 1.0
    for position, z in enumerate(eliminated):
        share = gain[:, position] / divisor
        noise_row[:, z - 1] = share * shapers[:, z - 1]
        noise_row[:, node_count + z - 1] = share

    exact = None
    if len(eliminated) <= EXACT_ELIMINATION_LIMIT:
        exact = _eliminate_exactly(model, eliminated, j, inputs)
    logger.debug("immersed node %d onto predictors %s (eliminated %s)", j, inputs, eliminated)
    return ImmersedNetwork(
        predictor_set=predictor_set,
        grid=grid,
        lumped_values={node: lumped[:, index] for index, node in enumerate(inputs)},
        lumped_transfers=exact,
        noise_row=noise_row,
        sources=sources,
        powers=model.source_powers(),
        phi_v=model.noise[j].spectrum(grid.points),
    )


def immersed_noise_spectrum(
    model: NetworkModel, predictor_set: PredictorSet, grid: FrequencyGrid, force: bool = False
) -> np.ndarray:
    """
    `Phi_breve_v(omega)`: the spectrum of the output noise of the immersed problem.
    """
    return immerse(model, predictor_set, grid, force=force).noise_spectrum


class SpectralFactor:
    """
    A monic minimum-phase factor sampled on a grid: `Phi = variance * |values|^2`.
    """

    def __init__(
        self, grid: FrequencyGrid, values: np.ndarray, variance: float
    ) -> "SpectralFactor":
        self.grid = grid
        self.values = values
        self.variance = variance

    def spectrum(self) -> np.ndarray:
        return self.variance * np.abs(self.values) ** 2


def grid_spectral_factor(
    spectrum: np.ndarray, grid: FrequencyGrid, fft_size: Optional[int] = None
) -> SpectralFactor:
    """
    Factors a positive spectrum sampled on `grid` as `variance * |H|^2` with `H`
    monic and minimum-phase, via the real cepstrum of the log-spectrum.

    Args:
        spectrum: strictly positive spectrum values on `grid`.
        grid: the frequencies of `spectrum`.
        fft_size: size of the dense FFT grid (at least `max(4096, 8 * len(grid))`).

    Returns:
        A `SpectralFactor`.

    Throws:
        InvalidUsageError: if a spectrum value is not strictly positive.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != grid.points.shape:
        raise InvalidUsageError("Spectrum and grid sizes differ.")
    if np.any(~(spectrum > 0.0)):
        bad = int(np.argmax(~(spectrum > 0.0)))
        raise InvalidUsageError(
            f"nonpositive spectrum value {spectrum[bad]:.3g} at omega={grid.points[bad]:.6g}"
        )
    size = fft_size or max(4096, 8 * grid.count)
    size += size % 2
    dense = 2.0 * np.pi * np.arange(size // 2 + 1) / size
    half = np.interp(dense, grid.points, np.log(spectrum))
    log_spectrum = np.concatenate([half, half[-2:0:-1]])
    cepstrum = np.real(np.fft.ifft(log_spectrum))
    lags = np.arange(1, size // 2)
    exponent = np.exp(-1j * np.outer(grid.points, lags)) @ cepstrum[1 : size // 2]
    return SpectralFactor(grid, np.exp(exponent), float(np.exp(cepstrum[0])))


def immersion_report_rows(immersed: ImmersedNetwork) -> Tuple[List[str], List[List[float]]]:
    """
    Header and rows of the immersion report:
    `omega,phi_breve_v,phi_v,abs_G<j><k>...`.
    """
    j = immersed.predictor_set.target_output
    inputs = list(immersed.predictor_set.predictors)
    header = ["omega", "phi_breve_v", "phi_v"] + [f"abs_G{j}{k}" for k in inputs]
    spectrum = immersed.noise_spectrum
    rows = []
    for index, omega in enumerate(immersed.grid.points):
        rows.append(
            [float(omega), float(spectrum[index]), float(immersed.phi_v[index])]
            + [float(np.abs(immersed.lumped_values[k][index])) for k in inputs]
        )
    return header, rows
