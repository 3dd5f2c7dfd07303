from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from netvariance.identify import InputOrders
from netvariance.lti import NoiseShape, RationalTransfer
from netvariance.network import Excitation, NetworkModel

NOISE_VARIANCE = 0.1
EXCITATION_POWER = 0.1

G21 = RationalTransfer([0.4], [1.0, -0.5], 1)
G12 = RationalTransfer([0.3], [1.0, -0.4], 1)
G31 = RationalTransfer([0.35], [1.0, -0.3], 1)
G23 = RationalTransfer([0.4, 0.2, 0.1], [1.0], 1)
G43_ONE_PARAM = RationalTransfer([0.8], [1.0], 1)
G43_TWO_PARAM = RationalTransfer([0.6], [1.0, -0.25], 1)

FULL_INPUTS = {
    1: InputOrders(nb=1, nf=1, delay=1),
    3: InputOrders(nb=3, nf=0, delay=1),
    4: InputOrders(nb=1, nf=0, delay=1),
}


def fetch_sample(path: Union[Path, str]) -> str:
    with open(path, "r") as file_:
        return file_.read()


def case_study_model(gain: float = 1.0, two_param: bool = False) -> NetworkModel:
    """
    The four-node case-study network with `G24 = gain * q^-1`.
    """
    modules = {
        (2, 1): G21,
        (1, 2): G12,
        (3, 1): G31,
        (2, 3): G23,
        (2, 4): RationalTransfer([gain], [1.0], 1),
        (4, 3): G43_TWO_PARAM if two_param else G43_ONE_PARAM,
    }
    noise = {node: NoiseShape(variance=NOISE_VARIANCE) for node in range(1, 5)}
    excitations = {
        1: Excitation.white(EXCITATION_POWER),
        3: Excitation.white(EXCITATION_POWER),
    }
    return NetworkModel(4, modules, noise, excitations)


def immersed_inputs(two_param: bool = False) -> Dict[int, InputOrders]:
    if two_param:
        return {1: InputOrders(1, 1, 1), 3: InputOrders(4, 1, 1)}
    return {1: InputOrders(1, 1, 1), 3: InputOrders(3, 0, 1)}


def chain_model(static: bool = False) -> NetworkModel:
    """
    `w1 = r1`, `w2 = G21 w1` without any noise.
    """
    transfer = RationalTransfer([2.0]) if static else RationalTransfer([0.5], [1.0], 1)
    return NetworkModel(2, {(2, 1): transfer}, excitations={1: Excitation.white(1.0)})


def loop_model() -> NetworkModel:
    """
    A two-node feedback loop with white noise at both nodes and `r1` white.
    """
    return NetworkModel(
        2,
        {
            (2, 1): RationalTransfer([0.4], [1.0, -0.5], 1),
            (1, 2): RationalTransfer([0.3], [1.0], 1),
        },
        noise={1: NoiseShape(variance=0.5), 2: NoiseShape(variance=0.2)},
        excitations={1: Excitation.white(1.0)},
    )


def random_network(seed: int, node_count: int = 5) -> Tuple[NetworkModel, int, int]:
    """
    A random, stable network of strictly proper first-order modules on a ring plus
    chords. Returns the model and the target module `(j, k)` (always the edge
    `1 -> 2`).
    """
    rng = np.random.default_rng(seed)
    modules = {}
    for k in range(1, node_count + 1):
        j = k % node_count + 1
        modules[(j, k)] = _random_module(rng)
    for _ in range(node_count):
        j, k = (int(node) for node in rng.choice(np.arange(1, node_count + 1), 2, replace=False))
        modules[(j, k)] = _random_module(rng)
    noise = {
        node: NoiseShape(variance=float(rng.uniform(0.05, 0.2)))
        for node in range(1, node_count + 1)
    }
    excitations = {1: Excitation.white(1.0), 3: Excitation.white(0.5)}
    return NetworkModel(node_count, modules, noise, excitations), 2, 1


def _random_module(rng: np.random.Generator) -> RationalTransfer:
    # |G| <= 0.16, so every row of G sums to less than 1 for up to five nodes
    gain = float(rng.uniform(0.02, 0.08)) * float(rng.choice([-1.0, 1.0]))
    pole = float(rng.uniform(-0.5, 0.5))
    return RationalTransfer([gain], [1.0, -pole], 1)
