"""
Operator-basis decompositions: Pauli coefficients of three qubits and the
generalized Bloch decomposition (local vectors alpha, beta and correlation
matrix T) of two qudits in the Gell-Mann basis.

Gell-Mann ordering: symmetric off-diagonal pairs first (lexicographic), then
antisymmetric pairs, then the diagonal matrices. The basis is scaled so that
tr(lambda_i lambda_j) = d delta_ij. T's entries depend on this ordering, its
invariants do not.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
import logging
from typing import NamedTuple

import numpy as np

from tensor_linalg import DensityMatrix, SubsystemShape, partial_trace

logger = logging.getLogger(__name__)

PAULI = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


class SectorLengths(NamedTuple):
    A1: float
    A2: float
    A3: float


@dataclass(frozen=True, eq=False)
class PauliCoefficients:
    """alpha_ijk = tr(rho sigma_i x sigma_j x sigma_k), indexed by (i, j, k) in {0..3}^3."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        if alpha.shape != (4, 4, 4):
            raise ValueError(f"Expected a 4x4x4 coefficient array, got {alpha.shape}")
        if abs(alpha[0, 0, 0] - 1.0) > 1e-10:
            raise ValueError(f"alpha_000 must be 1 (unit trace), got {alpha[0, 0, 0]}")
        if np.max(np.abs(alpha)) > 1.0 + 1e-10:
            raise ValueError("Pauli coefficients of a state are bounded by 1 in magnitude")
        alpha.setflags(write=False)
        object.__setattr__(self, 'alpha', alpha)


@lru_cache(maxsize=None)
def _weight_mask(weight: int) -> np.ndarray:
    idx = np.indices((4, 4, 4))
    mask = (idx != 0).sum(axis=0) == weight
    mask.setflags(write=False)
    return mask


def _require_shape(rho: DensityMatrix, dims, what: str):
    if rho.shape.dims != tuple(dims):
        raise ValueError(f"{what} requires shape {tuple(dims)}, got {rho.shape.dims}")


def pauli_coeffs(rho: DensityMatrix) -> PauliCoefficients:
    _require_shape(rho, (2, 2, 2), "pauli_coeffs")
    tensor = rho.matrix.reshape((2,) * 6)
    alpha = np.einsum('abcxyz,ixa,jyb,kzc->ijk', tensor, PAULI, PAULI, PAULI)
    return PauliCoefficients(alpha.real)


def rho_from_pauli(coeffs: PauliCoefficients) -> DensityMatrix:
    matrix = np.einsum('ijk,iax,jby,kcz->abcxyz', coeffs.alpha, PAULI, PAULI, PAULI)
    return DensityMatrix(matrix.reshape(8, 8) / 8, SubsystemShape((2, 2, 2)))


def sector_lengths_from_pauli(coeffs: PauliCoefficients) -> SectorLengths:
    squares = coeffs.alpha ** 2
    return SectorLengths(*(float(squares[_weight_mask(k)].sum()) for k in (1, 2, 3)))


def sector_lengths(rho: DensityMatrix) -> SectorLengths:
    return sector_lengths_from_pauli(pauli_coeffs(rho))


@dataclass(frozen=True, eq=False)
class GellMannBasis:
    d: int
    lambdas: np.ndarray

    def __len__(self) -> int:
        return len(self.lambdas)

    def components(self, operator: np.ndarray) -> np.ndarray:
        """Real coefficients x_i = tr(O lambda_i)/d of a Hermitian operator."""
        return np.einsum('ij,kji->k', operator, self.lambdas).real / self.d


def gell_mann_basis(d: int) -> GellMannBasis:
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError(f"Gell-Mann basis needs d >= 2, got {d}")
    return _gell_mann_basis(int(d))


@lru_cache(maxsize=None)
def _gell_mann_basis(d: int) -> GellMannBasis:
    pairs = list(combinations(range(d), 2))
    lambdas = []

    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1
        lambdas.append(m)

    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        lambdas.append(m)

    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        lambdas.append(np.diag(np.sqrt(2 / (l * (l + 1))) * diag).astype(complex))

    # textbook normalization tr = 2 delta -> tr = d delta
    stack = np.array(lambdas) * np.sqrt(d / 2)
    stack.setflags(write=False)
    return GellMannBasis(d, stack)


@dataclass(frozen=True, eq=False)
class BlochDecomposition:
    d: int
    alpha: np.ndarray
    beta: np.ndarray
    T: np.ndarray

    def reconstruct(self) -> DensityMatrix:
        lam = gell_mann_basis(self.d).lambdas
        eye = np.eye(self.d)
        matrix = np.kron(eye, eye).astype(complex)
        matrix += np.einsum('i,iab,xy->axby', self.alpha, lam, eye).reshape(self.d ** 2, self.d ** 2)
        matrix += np.einsum('i,ab,ixy->axby', self.beta, eye, lam).reshape(self.d ** 2, self.d ** 2)
        matrix += np.einsum('ij,iab,jxy->axby', self.T, lam, lam).reshape(self.d ** 2, self.d ** 2)
        return DensityMatrix(matrix / self.d ** 2, SubsystemShape((self.d, self.d)))

    def purity(self) -> float:
        """(1 + |alpha|^2 + |beta|^2 + ||T||_F^2)/d^2"""
        total = 1 + self.alpha @ self.alpha + self.beta @ self.beta + np.sum(self.T ** 2)
        return float(total / self.d ** 2)


def bloch_decompose(rho: DensityMatrix) -> BlochDecomposition:
    dims = rho.shape.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValueError(f"bloch_decompose requires two parties of equal dimension, got {dims}")
    d = dims[0]
    lam = gell_mann_basis(d).lambdas

    alpha = np.einsum('ab,iba->i', partial_trace(rho, [0]).matrix, lam).real
    beta = np.einsum('ab,iba->i', partial_trace(rho, [1]).matrix, lam).real
    tensor = rho.matrix.reshape(d, d, d, d)
    T = np.einsum('axby,iba,jyx->ij', tensor, lam, lam).real
    return BlochDecomposition(d, alpha, beta, T)


def correlation_matrix(rho: DensityMatrix) -> np.ndarray:
    return bloch_decompose(rho).T
