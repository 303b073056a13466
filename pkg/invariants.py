"""
Analytic moment and entanglement-measure computations: Haar moments of two
qudits from their correlation matrix, sector lengths from second moments, Wootters
concurrence and the pure-state three-tangle.
"""

from dataclasses import dataclass
import logging
from typing import Dict, FrozenSet, Iterable, Mapping, Tuple, Union

import numpy as np

from bloch import PAULI, SectorLengths
from tensor_linalg import DensityMatrix, PureState, partial_trace, sqrtm_psd

logger = logging.getLogger(__name__)

# Published vanishing point of the mixed-state three-tangle of rho(g); the
# convex roof itself is not computed.
G_TAU = 0.627

MOMENT_FORMS = ('haar', 'literal')

PARTY_LABELS = 'ABC'
ALL_SUBSETS_3 = (
    (0,), (1,), (2,),
    (0, 1), (0, 2), (1, 2),
    (0, 1, 2),
)

SubsetKey = Union[str, Iterable[int], FrozenSet[int]]


@dataclass(frozen=True)
class MomentPair:
    r2: float
    r4: float

    def __post_init__(self):
        for name in ('r2', 'r4'):
            value = getattr(self, name)
            if not np.isfinite(value) or value < -1e-12:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


def subset_key(subset: SubsetKey) -> Tuple[int, ...]:
    """Normalize 'AB', {0, 1} or (1, 0) to the sorted tuple (0, 1)."""
    if isinstance(subset, str):
        try:
            parties = [PARTY_LABELS.index(c) for c in subset.upper()]
        except ValueError:
            raise ValueError(f"Unknown party label in {subset!r}") from None
    else:
        parties = [int(p) for p in subset]
    key = tuple(sorted(set(parties)))
    if not key:
        raise ValueError("Subsets must be non-empty")
    return key


def subset_label(subset: SubsetKey) -> str:
    return ''.join(PARTY_LABELS[p] for p in subset_key(subset))


def moment_normalization(d: int, t: int) -> float:
    """Scale from the raw Haar average E[E^t] to the two-qudit moment R^(t).

    Valid for d in {2, 3}, where the adjoint orbit of a traceless tau with
    tr(tau^2) = d has sphere-like second and fourth moments in R^(d^2 - 1).
    """
    D = d * d - 1
    if t == 2:
        return D ** 2 / (d - 1) ** 2
    if t == 4:
        return (D * (D + 2) / (3 * (d - 1) ** 2)) ** 2
    raise ValueError(f"Only t = 2 and t = 4 are supported, got {t}")


def _check_T(T: np.ndarray, d: int) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    size = d * d - 1
    if T.shape != (size, size):
        raise ValueError(f"Correlation matrix for d={d} must be {size}x{size}, got {T.shape}")
    return T


def moments_from_singular_values(sigma: np.ndarray, d: int, form: str = 'haar') -> MomentPair:
    sigma = np.asarray(sigma, dtype=float)
    s2 = float(np.sum(sigma ** 2))
    s4 = float(np.sum(sigma ** 4))
    return _moments(s2, s4, d, form)


def _moments(s2: float, s4: float, d: int, form: str) -> MomentPair:
    scale = (d - 1) ** 2
    r2 = s2 / scale
    if form == 'haar':
        r4 = (s2 ** 2 / 3 + 2 * s4 / 3) / scale ** 2
    elif form == 'literal':
        r4 = (s2 / scale / 3 + 2 * s4 / 3) / scale ** 2
    else:
        raise ValueError(f"Unknown moment form {form!r}; expected one of {MOMENT_FORMS}")
    return MomentPair(r2, r4)


def moments_from_T(T: np.ndarray, d: int, form: str = 'haar') -> MomentPair:
    """Second and fourth moments of a two-qudit state from its correlation matrix.

    ``form='haar'`` squares tr(TT^T) in the first term of R^(4), matching the
    Haar average; ``form='literal'`` keeps that term linear in tr(TT^T), which
    the Monte Carlo oracle rejects.
    """
    T = _check_T(T, d)
    TTt = T @ T.T
    return _moments(float(np.trace(TTt)), float(np.trace(TTt @ TTt)), d, form)


def sector_lengths_from_moments(r2_by_subset: Mapping[SubsetKey, float]) -> SectorLengths:
    """A1 = 3 sum R_i, A2 = 9 sum R_ij, A3 = 27 R_ABC."""
    moments: Dict[Tuple[int, ...], float] = {subset_key(k): float(v) for k, v in r2_by_subset.items()}
    missing = [subset_label(s) for s in ALL_SUBSETS_3 if s not in moments]
    if missing:
        raise ValueError(f"Missing second moments for subsets: {', '.join(missing)}")

    a1 = 3 * sum(moments[s] for s in ALL_SUBSETS_3 if len(s) == 1)
    a2 = 9 * sum(moments[s] for s in ALL_SUBSETS_3 if len(s) == 2)
    a3 = 27 * moments[(0, 1, 2)]
    return SectorLengths(a1, a2, a3)


def ghzw_sector_polynomials(g: float) -> SectorLengths:
    """Sector lengths of the ideal GHZ-W mixture."""
    return SectorLengths((1 - g) ** 2 / 3, 8 * g ** 2 - 8 * g + 3, 4 * g ** 2 + 11 * (1 - g) ** 2 / 3)


def _require_qubits(rho_or_psi, n: int, what: str):
    if rho_or_psi.shape.dims != (2,) * n:
        raise ValueError(f"{what} requires {n} qubits, got shape {rho_or_psi.shape.dims}")


def wootters_margin(rho: DensityMatrix) -> float:
    """lambda_1 - lambda_2 - lambda_3 - lambda_4 before clipping at 0."""
    _require_qubits(rho, 2, "concurrence")
    yy = np.kron(PAULI[2], PAULI[2])
    flipped = yy @ rho.matrix.conj() @ yy
    root = sqrtm_psd(rho.matrix)
    inner = root @ flipped @ root
    lam = np.sqrt(np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0.0, None))[::-1]
    return float(lam[0] - lam[1:].sum())


def concurrence(rho: DensityMatrix) -> float:
    return min(max(wootters_margin(rho), 0.0), 1.0)


def squared_concurrence_sum(rho: DensityMatrix) -> float:
    """C^2_{A|B} + C^2_{A|C}"""
    _require_qubits(rho, 3, "squared_concurrence_sum")
    return concurrence(partial_trace(rho, [0, 1])) ** 2 + concurrence(partial_trace(rho, [0, 2])) ** 2


def three_tangle_pure(psi: PureState) -> float:
    """Coffman-Kundu-Wootters tangle 4|Det(a)| from Cayley's hyperdeterminant."""
    _require_qubits(psi, 3, "three_tangle_pure")
    a = psi.amplitudes.reshape(2, 2, 2)

    d1 = (a[0, 0, 0] ** 2 * a[1, 1, 1] ** 2 + a[0, 0, 1] ** 2 * a[1, 1, 0] ** 2
          + a[0, 1, 0] ** 2 * a[1, 0, 1] ** 2 + a[1, 0, 0] ** 2 * a[0, 1, 1] ** 2)
    d2 = (a[0, 0, 0] * a[1, 1, 1] * a[0, 1, 1] * a[1, 0, 0]
          + a[0, 0, 0] * a[1, 1, 1] * a[1, 0, 1] * a[0, 1, 0]
          + a[0, 0, 0] * a[1, 1, 1] * a[1, 1, 0] * a[0, 0, 1]
          + a[0, 1, 1] * a[1, 0, 0] * a[1, 0, 1] * a[0, 1, 0]
          + a[0, 1, 1] * a[1, 0, 0] * a[1, 1, 0] * a[0, 0, 1]
          + a[1, 0, 1] * a[0, 1, 0] * a[1, 1, 0] * a[0, 0, 1])
    d3 = (a[0, 0, 0] * a[1, 1, 0] * a[1, 0, 1] * a[0, 1, 1]
          + a[1, 1, 1] * a[0, 0, 1] * a[0, 1, 0] * a[1, 0, 0])

    return float(min(4 * abs(d1 - 2 * d2 + 4 * d3), 1.0))
