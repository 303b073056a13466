"""
State and unitary constructors: GHZ/W mixtures, the chessboard state and its
noisy family, and the hyper-entangled source with its preparation unitaries.

Qutrit labels follow the photonic encoding |H_u> -> |0>, |V_l> -> |1>,
|V_u> -> |2>; only the logical labels are modeled.
"""

import logging
from itertools import permutations
from typing import Sequence, Tuple

import numpy as np

from tensor_linalg import (
    DensityMatrix,
    PureState,
    SubsystemShape,
    as_shape,
    kron,
    mix,
    projector,
)

logger = logging.getLogger(__name__)

QUBITS3 = SubsystemShape((2, 2, 2))
QUTRITS2 = SubsystemShape((3, 3))

# Noise levels of the experimental chessboard data
MEASURED_NOISE_LEVELS = (0.0, 0.052, 0.0991, 0.1291, 0.1573, 0.2158)


def _check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def ghz3() -> PureState:
    """(|000> + |111>)/sqrt(2)"""
    v = np.zeros(8, dtype=complex)
    v[0b000] = v[0b111] = 1 / np.sqrt(2)
    return PureState(v, QUBITS3)


def w3() -> PureState:
    """(|001> + |010> + |100>)/sqrt(3)"""
    v = np.zeros(8, dtype=complex)
    v[0b001] = v[0b010] = v[0b100] = 1 / np.sqrt(3)
    return PureState(v, QUBITS3)


def ghzw_mix(g: float) -> DensityMatrix:
    """g |GHZ><GHZ| + (1 - g) |W><W|"""
    g = _check_unit_interval('g', g)
    return mix([projector(ghz3()), projector(w3())], [g, 1.0 - g])


def ghzw_mix_from(rho_ghz: DensityMatrix, rho_w: DensityMatrix, g: float) -> DensityMatrix:
    """Same mixture built from arbitrary (e.g. reconstructed) GHZ and W estimates."""
    g = _check_unit_interval('g', g)
    return mix([rho_ghz, rho_w], [g, 1.0 - g])


def flip_operator(parties: Tuple[int, int], shape) -> np.ndarray:
    """Permutation matrix swapping two subsystems of equal dimension."""
    shape = as_shape(shape)
    x, y = (shape.check_party(p) for p in parties)
    if x == y:
        raise ValueError("flip_operator needs two distinct parties")
    if shape.dims[x] != shape.dims[y]:
        raise ValueError(f"Cannot swap parties of dimension {shape.dims[x]} and {shape.dims[y]}")

    n = shape.total_dim
    flip = np.zeros((n, n))
    for index in np.ndindex(*shape.dims):
        swapped = list(index)
        swapped[x], swapped[y] = swapped[y], swapped[x]
        flip[np.ravel_multi_index(swapped, shape.dims), np.ravel_multi_index(index, shape.dims)] = 1.0
    return flip


def chessboard_vectors() -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The four kets V_1..V_4 on two qutrits (each of unit norm)."""
    k = 1 / np.sqrt(6)

    def ket(entries):
        v = np.zeros(9, dtype=complex)
        for (a, b), c in entries.items():
            v[3 * a + b] = c * k
        return v

    v1 = ket({(0, 0): 1, (2, 0): 2, (1, 1): 1})
    v2 = ket({(0, 1): -1, (2, 1): 2, (1, 0): 1})
    v3 = ket({(0, 0): -1, (0, 2): 2, (1, 1): 1})
    v4 = ket({(1, 0): 1, (1, 2): 2, (0, 1): 1})
    return v1, v2, v3, v4


def chessboard_state() -> DensityMatrix:
    """rho_ch = N sum_i |V_i><V_i| with N = 1/4."""
    vectors = chessboard_vectors()
    norm = 1.0 / sum(np.vdot(v, v).real ** 2 for v in vectors)
    matrix = norm * sum(np.outer(v, v.conj()) for v in vectors)
    return DensityMatrix(matrix, QUTRITS2)


def white_noise(state: DensityMatrix, p: float) -> DensityMatrix:
    """(1 - p) rho + p I/D"""
    p = _check_unit_interval('p', p)
    return mix([state, DensityMatrix.maximally_mixed(state.shape)], [1.0 - p, p])


def noisy_chessboard(p: float) -> DensityMatrix:
    """(1 - p) rho_ch + p I/9; I/16 would not be trace-normalized on two qutrits."""
    return white_noise(chessboard_state(), p)


def max_entangled_qutrits() -> PureState:
    v = np.zeros(9, dtype=complex)
    v[[0, 4, 8]] = 1 / np.sqrt(3)
    return PureState(v, QUTRITS2)


def source_state() -> PureState:
    """Hyper-entangled source sqrt(5/6)|00> + sqrt(1/6)|11>."""
    v = np.zeros(9, dtype=complex)
    v[0] = np.sqrt(5 / 6)
    v[4] = np.sqrt(1 / 6)
    return PureState(v, QUTRITS2)


def prep_unitaries() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, b = np.sqrt(1 / 5), np.sqrt(4 / 5)
    u1 = np.array([[0, 1, 0],
                   [1, 0, 0],
                   [0, 0, 1]], dtype=complex)
    u2 = np.array([[a, 0, b],
                   [0, 1, 0],
                   [b, 0, -a]], dtype=complex)
    u3 = np.array([[-a, 0, b],
                   [0, 1, 0],
                   [b, 0, a]], dtype=complex)
    return u1, u2, u3


def preparation_recipe(i: int) -> Tuple[np.ndarray, np.ndarray]:
    """Local operations (left, right) taking the source to V_i."""
    u1, u2, u3 = prep_unitaries()
    identity = np.eye(3, dtype=complex)
    recipes = {
        1: (u2, identity),
        2: (u3, u1),
        3: (identity, u3),
        4: (u1, u2),
    }
    if i not in recipes:
        raise ValueError(f"Chessboard vector index must be in 1..4, got {i}")
    return recipes[i]


def vi_from_source(i: int) -> PureState:
    left, right = preparation_recipe(i)
    psi = kron(left, right) @ source_state().amplitudes
    return PureState(psi, QUTRITS2)


def same_up_to_phase(a: PureState, b: PureState, tol: float = 1e-10) -> bool:
    return abs(abs(a.overlap(b)) - 1.0) <= tol


def symmetric_pairs(num_parties: int) -> Sequence[Tuple[int, int]]:
    return [pair for pair in permutations(range(num_parties), 2) if pair[0] < pair[1]]
