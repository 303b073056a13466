"""
Dense complex linear algebra for multi-qudit systems.

Index convention: party 0 is the leftmost tensor factor and the basis index of
the composite system is the mixed-radix number over ``shape.dims``.
"""

from dataclasses import dataclass, field
from functools import reduce
import logging
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12

ComplexMatrix = np.ndarray


@dataclass(frozen=True)
class SubsystemShape:
    """Ordered local dimensions of a composite system."""

    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("SubsystemShape needs at least one party")
        if any(d < 2 for d in dims):
            raise ValueError(f"Every local dimension must be >= 2, got {dims}")
        object.__setattr__(self, 'dims', dims)

    @property
    def num_parties(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def check_party(self, party: int) -> int:
        if not isinstance(party, (int, np.integer)) or not 0 <= party < self.num_parties:
            raise ValueError(f"Invalid party index {party} for shape {self.dims}")
        return int(party)

    def sub_shape(self, parties: Iterable[int]) -> 'SubsystemShape':
        return SubsystemShape(tuple(self.dims[p] for p in parties))


def as_shape(shape: Union[SubsystemShape, Sequence[int]]) -> SubsystemShape:
    return shape if isinstance(shape, SubsystemShape) else SubsystemShape(tuple(shape))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix over a declared subsystem shape."""

    matrix: ComplexMatrix
    shape: SubsystemShape
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        shape = as_shape(self.shape)
        object.__setattr__(self, 'shape', shape)
        matrix = _frozen(self.matrix)
        object.__setattr__(self, 'matrix', matrix)

        n = shape.total_dim
        if matrix.shape != (n, n):
            raise ValueError(f"Matrix shape {matrix.shape} does not match subsystem dims {shape.dims}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("Density matrix contains NaN or Inf entries")
        if self.validate:
            self._check_invariants()

    def _check_invariants(self):
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("Density matrix is not Hermitian")
        trace = np.trace(m).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"Density matrix trace is {trace}, expected 1")
        min_eig = eigvals_hermitian(m)[0]
        if min_eig < -PSD_TOL:
            raise ValueError(f"Density matrix has negative eigenvalue {min_eig:.3e}")

    @property
    def dim(self) -> int:
        return self.shape.total_dim

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def evolve(self, unitary: ComplexMatrix) -> 'DensityMatrix':
        """U rho U^dagger."""
        return DensityMatrix(unitary @ self.matrix @ unitary.conj().T, self.shape, validate=False)

    @classmethod
    def maximally_mixed(cls, shape: Union[SubsystemShape, Sequence[int]]) -> 'DensityMatrix':
        shape = as_shape(shape)
        return cls(np.eye(shape.total_dim) / shape.total_dim, shape)


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector over a declared subsystem shape."""

    amplitudes: np.ndarray
    shape: SubsystemShape

    def __post_init__(self):
        shape = as_shape(self.shape)
        object.__setattr__(self, 'shape', shape)
        amps = _frozen(np.ravel(self.amplitudes))
        object.__setattr__(self, 'amplitudes', amps)
        if amps.size != shape.total_dim:
            raise ValueError(f"{amps.size} amplitudes do not match subsystem dims {shape.dims}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"State vector has squared norm {norm}, expected 1")

    def density_matrix(self) -> DensityMatrix:
        return projector(self)

    def overlap(self, other: 'PureState') -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    @classmethod
    def from_unnormalized(cls, vector: np.ndarray, shape) -> 'PureState':
        vector = np.asarray(vector, dtype=complex)
        return cls(vector / np.linalg.norm(vector), shape)

    @classmethod
    def basis(cls, index: Sequence[int], shape) -> 'PureState':
        """Product basis ket |i_0 i_1 ...>."""
        shape = as_shape(shape)
        vector = np.zeros(shape.total_dim, dtype=complex)
        vector[np.ravel_multi_index(tuple(index), shape.dims)] = 1.0
        return cls(vector, shape)


def projector(psi: PureState) -> DensityMatrix:
    a = psi.amplitudes
    return DensityMatrix(np.outer(a, a.conj()), psi.shape, validate=False)


def kron(a: ComplexMatrix, b: ComplexMatrix, *more: ComplexMatrix) -> ComplexMatrix:
    """Kronecker product; the first factor is the leftmost party."""
    return reduce(np.kron, (b,) + more, np.asarray(a))


def kron_all(factors: Sequence[ComplexMatrix]) -> ComplexMatrix:
    if not factors:
        raise ValueError("kron_all needs at least one factor")
    return reduce(np.kron, factors)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the parties in ``keep`` (kept in ascending order)."""
    shape = rho.shape
    keep = sorted({shape.check_party(p) for p in keep})
    if not keep:
        raise ValueError("partial_trace needs at least one party to keep")

    n = shape.num_parties
    if len(keep) == n:
        return rho

    tensor = rho.matrix.reshape(shape.dims + shape.dims)
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = keep + [n + i for i in keep]
    reduced = np.einsum(tensor, row + col, out)

    sub = shape.sub_shape(keep)
    return DensityMatrix(reduced.reshape(sub.total_dim, sub.total_dim), sub, validate=False)


def partial_transpose_matrix(matrix: ComplexMatrix, shape, party: int) -> ComplexMatrix:
    shape = as_shape(shape)
    party = shape.check_party(party)
    n = shape.num_parties
    tensor = np.asarray(matrix).reshape(shape.dims + shape.dims)
    tensor = np.swapaxes(tensor, party, n + party)
    return tensor.reshape(shape.total_dim, shape.total_dim)


def partial_transpose(rho: DensityMatrix, party: int) -> ComplexMatrix:
    """Transpose on one party; the result need not be PSD."""
    return partial_transpose_matrix(rho.matrix, rho.shape, party)


def is_hermitian(h: ComplexMatrix, tol: float = 1e-8) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and np.max(np.abs(h - h.conj().T)) <= tol


def eigvals_hermitian(h: ComplexMatrix, tol: float = 1e-8) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol):
        raise ValueError("eigvals_hermitian requires a Hermitian matrix")
    return np.linalg.eigvalsh((h + h.conj().T) / 2)


def min_eigenvalue(h: ComplexMatrix) -> float:
    return float(eigvals_hermitian(h)[0])


def singular_values(m: ComplexMatrix) -> np.ndarray:
    """Singular values in descending order."""
    return np.linalg.svd(np.asarray(m), compute_uv=False)


def trace_norm(m: ComplexMatrix) -> float:
    return float(np.sum(singular_values(m)))


def sqrtm_psd(h: ComplexMatrix) -> ComplexMatrix:
    """Square root of a Hermitian PSD matrix; negative eigenvalues are clipped to 0."""
    h = np.asarray(h, dtype=complex)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Root fidelity tr sqrt(sqrt(rho) sigma sqrt(rho))."""
    if rho.shape.dims != sigma.shape.dims:
        raise ValueError(f"Shape mismatch: {rho.shape.dims} vs {sigma.shape.dims}")
    root = sqrtm_psd(rho.matrix)
    inner = root @ sigma.matrix @ root
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return min(max(value, 0.0), 1.0)


def mix(states: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    """Convex combination of states with a common shape."""
    if len(states) != len(weights) or not states:
        raise ValueError("mix needs one weight per state")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"Mixing weights must be a probability vector, got {weights}")
    shape = states[0].shape
    if any(s.shape.dims != shape.dims for s in states):
        raise ValueError("Cannot mix states of different shapes")
    matrix = sum(w * s.matrix for w, s in zip(weights, states))
    return DensityMatrix(matrix, shape)


def random_density_matrix(shape, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    """Random state from a Ginibre matrix, G G^dagger / tr."""
    shape = as_shape(shape)
    n = shape.total_dim
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, shape)


def random_pure_state(shape, rng: np.random.Generator) -> PureState:
    shape = as_shape(shape)
    v = rng.standard_normal(shape.total_dim) + 1j * rng.standard_normal(shape.total_dim)
    return PureState.from_unnormalized(v, shape)
