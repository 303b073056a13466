"""
Two-qutrit state tomography over the 81 product settings |u_i> x |u_j>.

Count model: a setting collects ``shots`` signal events; white noise of level
p adds uniformly distributed events, so the exposure grows to shots/(1 - p)
and each of the ``exposure`` events is a click with probability
<u_i u_j| rho(p) |u_i u_j>. The projectors do not sum to the identity
(sum_k P_k = 9 I), so the likelihood is the Poisson one with rates e_k p_k.
Maximum likelihood defaults to accelerated projected-gradient ascent started
from the projected linear inversion; the R-rho-R iteration with
G = sum e_k P_k is kept as an alternative.
"""

from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import chardet
import numpy as np
import pandas as pd

from bloch import gell_mann_basis
from config import VALID_MLE_METHODS as MLE_METHODS
from performance_optimizer import ParallelTaskRunner
from states import QUTRITS2, white_noise
from tensor_linalg import DensityMatrix, ComplexMatrix

logger = logging.getLogger(__name__)

NUM_KETS = 9
RECORD_COLUMNS = ['setting_left', 'setting_right', 'count', 'exposure']
COMPUTATIONAL_KETS = (0, 1, 2)


@dataclass(frozen=True)
class TomographySetting:
    ket_left: int
    ket_right: int

    def __post_init__(self):
        for name in ('ket_left', 'ket_right'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value < NUM_KETS:
                raise ValueError(f"{name} must be an index in 0..8, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def index(self) -> int:
        return NUM_KETS * self.ket_left + self.ket_right

    @property
    def computational(self) -> bool:
        return self.ket_left in COMPUTATIONAL_KETS and self.ket_right in COMPUTATIONAL_KETS


@dataclass(frozen=True)
class CountRecord:
    setting: TomographySetting
    count: int
    exposure: Optional[float] = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be non-negative, got {self.count}")
        if self.exposure is not None:
            if self.exposure <= 0:
                raise ValueError(f"exposure must be positive, got {self.exposure}")
            if self.count > self.exposure:
                raise ValueError(f"count {self.count} exceeds exposure {self.exposure}")


@dataclass(frozen=True)
class ReconstructionResult:
    rho_hat: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    history: Tuple[float, ...] = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class BootstrapResult:
    """``mean``/``std`` are floats for a scalar statistic, arrays for a vector one."""

    mean: Union[float, np.ndarray]
    std: Union[float, np.ndarray]
    samples: np.ndarray = field(repr=False, compare=False)


def tomography_bases() -> np.ndarray:
    """The nine kets u_0..u_8 as rows."""
    r = 1 / np.sqrt(2)
    return np.array([
        [1, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
        [r, r, 0],
        [r, 1j * r, 0],
        [0, r, r],
        [0, r, 1j * r],
        [r, 0, r],
        [r, 0, 1j * r],
    ], dtype=complex)


def all_settings() -> List[TomographySetting]:
    return [TomographySetting(i, j) for i in range(NUM_KETS) for j in range(NUM_KETS)]


def measurement_projectors(settings: Sequence[TomographySetting]) -> np.ndarray:
    """Stack of rank-1 projectors |u_i u_j><u_i u_j|, shape (K, 9, 9)."""
    kets = tomography_bases()
    vectors = np.array([np.kron(kets[s.ket_left], kets[s.ket_right]) for s in settings])
    return np.einsum('ki,kj->kij', vectors, vectors.conj())


def _probabilities(projectors: np.ndarray, rho: ComplexMatrix) -> np.ndarray:
    return np.einsum('kij,ji->k', projectors, rho).real


def _check_noise(noise_p: float) -> float:
    noise_p = float(noise_p)
    if not 0.0 <= noise_p < 1.0:
        raise ValueError(f"noise_p must lie in [0, 1), got {noise_p}")
    return noise_p


def _require_qutrits(rho: DensityMatrix):
    if rho.shape.dims != (3, 3):
        raise ValueError(f"Tomography requires a two-qutrit state, got {rho.shape.dims}")


def simulate_tomography_counts(rho: DensityMatrix, shots_per_setting: int, noise_p: float = 0.0,
                               rng: Optional[np.random.Generator] = None) -> List[CountRecord]:
    _require_qutrits(rho)
    noise_p = _check_noise(noise_p)
    if shots_per_setting < 1:
        raise ValueError(f"shots_per_setting must be >= 1, got {shots_per_setting}")
    rng = rng if rng is not None else np.random.default_rng()

    settings = all_settings()
    noisy = white_noise(rho, noise_p)
    probs = np.clip(_probabilities(measurement_projectors(settings), noisy.matrix), 0.0, 1.0)
    exposure = int(round(shots_per_setting / (1.0 - noise_p)))
    counts = rng.binomial(exposure, probs)
    return [CountRecord(s, int(n), float(exposure)) for s, n in zip(settings, counts)]


def expected_count_records(rho: DensityMatrix, shots_per_setting: float,
                           noise_p: float = 0.0) -> List[CountRecord]:
    """Noise-free counts: the rounded expected value of every setting."""
    _require_qutrits(rho)
    noise_p = _check_noise(noise_p)
    settings = all_settings()
    probs = np.clip(_probabilities(measurement_projectors(settings), white_noise(rho, noise_p).matrix), 0.0, 1.0)
    exposure = float(round(shots_per_setting / (1.0 - noise_p)))
    return [CountRecord(s, int(round(exposure * q)), float(exposure)) for s, q in zip(settings, probs)]


def _arrays(records: Sequence[CountRecord]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not records:
        raise ValueError("No count records given")
    if any(r.exposure is None for r in records):
        raise ValueError("Reconstruction needs the exposure of every record")
    projectors = measurement_projectors([r.setting for r in records])
    counts = np.array([r.count for r in records], dtype=float)
    exposures = np.array([r.exposure for r in records], dtype=float)
    return projectors, counts, exposures


def _operator_basis() -> np.ndarray:
    """Identity plus the 80 Gell-Mann matrices of dimension 9."""
    return np.concatenate([np.eye(9, dtype=complex)[None], gell_mann_basis(9).lambdas])


def _design(projectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Projector expectations of the operator basis, checked for informational completeness."""
    basis = _operator_basis()
    design = np.einsum('kij,bji->kb', projectors, basis).real
    rank = np.linalg.matrix_rank(design)
    if rank < len(basis):
        raise ValueError(f"Measurement set is not informationally complete (rank {rank} < {len(basis)})")
    return design, basis


def _least_squares(projectors: np.ndarray, counts: np.ndarray, exposures: np.ndarray) -> ComplexMatrix:
    design, basis = _design(projectors)
    coeffs, *_ = np.linalg.lstsq(design, counts / exposures, rcond=None)
    rho = np.einsum('b,bij->ij', coeffs, basis)
    return (rho + rho.conj().T) / 2


def linear_inversion(records: Sequence[CountRecord]) -> ComplexMatrix:
    """Least-squares operator reproducing the measured frequencies.

    Hermitian with unit trace; positivity is not enforced.
    """
    rho = _least_squares(*_arrays(records))
    trace = np.trace(rho).real
    if trace <= 0:
        raise ValueError("Linear inversion produced a non-positive trace")
    return rho / trace


def _project_to_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    u = np.sort(values)[::-1]
    cumulative = np.cumsum(u) - 1.0
    k = np.arange(1, len(u) + 1)
    last = np.nonzero(u - cumulative / k > 0)[0][-1]
    return np.clip(values - cumulative[last] / (last + 1), 0.0, None)


def project_to_density_matrix(matrix: ComplexMatrix) -> ComplexMatrix:
    """Closest unit-trace PSD matrix in Frobenius norm (eigenvalues projected onto the simplex)."""
    h = np.asarray(matrix, dtype=complex)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    rho = (v * _project_to_simplex(w)) @ v.conj().T
    return (rho + rho.conj().T) / 2


def log_likelihood(rho: ComplexMatrix, records: Sequence[CountRecord]) -> float:
    """Poisson log-likelihood sum n_k log(lambda_k) - lambda_k with lambda_k = e_k p_k."""
    projectors, counts, exposures = _arrays(records)
    return _log_likelihood(rho, projectors, counts, exposures)


PROB_FLOOR = 1e-15


def _log_likelihood(rho: ComplexMatrix, projectors: np.ndarray, counts: np.ndarray,
                    exposures: np.ndarray) -> float:
    probs = _probabilities(projectors, np.asarray(rho))
    seen = counts > 0
    log_term = np.sum(counts[seen] * np.log(exposures[seen] * np.clip(probs[seen], PROB_FLOOR, None)))
    return float(log_term - np.sum(exposures * probs))


def _gradient(rho: ComplexMatrix, projectors: np.ndarray, counts: np.ndarray,
              exposures: np.ndarray) -> ComplexMatrix:
    probs = np.clip(_probabilities(projectors, rho), PROB_FLOOR, None)
    return np.einsum('k,kij->ij', counts / probs - exposures, projectors)


START_MIXING = 1e-9
INITIAL_DILUTION = 1e3
MIN_DILUTION = 1e-10
MIN_STEP_SCALE = 1e-24


def _linear_start(least_squares: ComplexMatrix) -> ComplexMatrix:
    """Projected linear inversion, mixed with a trace of I/9 so every p_k is positive."""
    eye = np.eye(9, dtype=complex)
    if np.trace(least_squares).real <= 0:
        return eye / 9
    return (1 - START_MIXING) * project_to_density_matrix(least_squares) + START_MIXING * eye / 9


def mle_reconstruct(records: Sequence[CountRecord], max_iter: int = 20000, tol: float = 1e-10,
                    damping: float = 0.5, initial: Optional[DensityMatrix] = None,
                    method: str = 'apg') -> ReconstructionResult:
    """Maximum-likelihood two-qutrit state from count records.

    ``method='apg'`` runs accelerated projected-gradient ascent over density
    matrices, starting from the projected linear-inversion estimate; the step
    is shrunk by ``damping`` until it satisfies the sufficient-ascent test, and
    momentum is dropped whenever it would lower the likelihood.
    ``method='rhr'`` runs the diluted R-rho-R iteration from I/9: each step
    applies A = G^-1 R through rho -> A_e rho A_e^+ / tr with
    A_e = (I + e A)/(1 + e), retrying with e scaled by ``damping`` when the
    likelihood would drop.

    Both stop once an accepted step moves rho by less than ``tol`` in
    Frobenius norm, or when no ascent step is left.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {damping}")
    if method not in MLE_METHODS:
        raise ValueError(f"Unknown MLE method {method!r}; expected one of {MLE_METHODS}")
    projectors, counts, exposures = _arrays(records)

    if initial is None and method == 'apg':
        rho = _linear_start(_least_squares(projectors, counts, exposures))
    else:
        _design(projectors)
        rho = np.eye(9, dtype=complex) / 9 if initial is None else np.array(initial.matrix, dtype=complex)

    iterate = _ascend_apg if method == 'apg' else _ascend_rhr
    rho, history, iterations, converged = iterate(rho, projectors, counts, exposures, max_iter, tol, damping)
    if not converged:
        logger.warning(f"MLE ({method}) did not converge within {max_iter} iterations "
                       f"(log-likelihood {history[-1]:.6f})")
    return ReconstructionResult(DensityMatrix(rho, QUTRITS2), history[-1], iterations, converged, tuple(history))


def _ascend_apg(rho, projectors, counts, exposures, max_iter, tol, damping):
    def ll(x):
        return _log_likelihood(x, projectors, counts, exposures)

    f = ll(rho)
    history = [f]
    step0 = 1.0 / max(counts.sum(), 1.0)
    step = step0
    y, theta = rho, 1.0
    converged = False

    iteration = 0
    for iteration in range(1, max_iter + 1):
        while True:
            if y is not rho and np.any(_probabilities(projectors, y)[counts > 0] <= 0):
                y, theta = rho, 1.0
            g = _gradient(y, projectors, counts, exposures)
            fy = ll(y)
            while step >= step0 * MIN_STEP_SCALE:
                z = project_to_density_matrix(y + step * g)
                d = z - y
                fz = ll(z)
                if fz >= fy + np.vdot(g, d).real - np.vdot(d, d).real / (2 * step):
                    break
                step *= damping
            else:
                fz = -np.inf
            if fz >= f:
                break
            if y is rho:
                # no ascent step left
                return rho, history, iteration, True
            y, theta = rho, 1.0
            step = max(step, step0)

        moved = float(np.linalg.norm(z - rho))
        theta_next = (1 + np.sqrt(1 + 4 * theta ** 2)) / 2
        y = z + ((theta - 1) / theta_next) * (z - rho)
        rho, f, theta = z, fz, theta_next
        history.append(f)
        step /= damping
        if moved < tol:
            converged = True
            break
    return rho, history, iteration, converged


def _ascend_rhr(rho, projectors, counts, exposures, max_iter, tol, damping):
    gram = np.einsum('k,kij->ij', exposures, projectors)
    try:
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as e:
        raise ValueError("Measurement operators do not span a full-rank G") from e

    eye = np.eye(9, dtype=complex)
    ll = _log_likelihood(rho, projectors, counts, exposures)
    history = [ll]
    dilution = INITIAL_DILUTION
    converged = False

    iteration = 0
    for iteration in range(1, max_iter + 1):
        probs = np.clip(_probabilities(projectors, rho), PROB_FLOOR, None)
        step = gram_inv @ np.einsum('k,kij->ij', counts / probs, projectors)

        while dilution >= MIN_DILUTION:
            a = (eye + dilution * step) / (1 + dilution)
            candidate = a @ rho @ a.conj().T
            candidate = (candidate + candidate.conj().T) / 2
            candidate /= np.trace(candidate).real
            new_ll = _log_likelihood(candidate, projectors, counts, exposures)
            if new_ll >= ll:
                break
            dilution *= damping
        else:
            # no ascent direction left
            converged = True
            break

        moved = float(np.linalg.norm(candidate - rho))
        rho, ll = candidate, new_ll
        history.append(ll)
        dilution = min(dilution / damping, INITIAL_DILUTION)
        if moved < tol:
            converged = True
            break
    return rho, history, iteration, converged


def noise_level_estimate(n_with_noise: float, n_without: float) -> float:
    """p = 1 - N_0/N_p from total counts without and with noise."""
    if n_with_noise <= 0 or n_without <= 0:
        raise ValueError(f"Counts must be positive, got N_p={n_with_noise}, N_0={n_without}")
    if n_without > n_with_noise:
        logger.warning(f"Noise-free total {n_without} exceeds noisy total {n_with_noise}; estimate is negative")
    return 1.0 - n_without / n_with_noise


def computational_total_counts(records: Sequence[CountRecord]) -> int:
    """Total counts over the nine computational-basis settings."""
    selected = [r.count for r in records if r.setting.computational]
    if len(selected) == 0:
        raise ValueError("No computational-basis settings among the records")
    return int(sum(selected))


def estimate_noise_from_records(noisy: Sequence[CountRecord], reference: Sequence[CountRecord]) -> float:
    return noise_level_estimate(computational_total_counts(noisy), computational_total_counts(reference))


def resample_records(records: Sequence[CountRecord], rng: np.random.Generator) -> List[CountRecord]:
    """Parametric resample: binomial on the exposure if known, Poisson otherwise."""
    resampled = []
    for r in records:
        if r.exposure is None:
            count = rng.poisson(r.count)
        else:
            trials = int(np.floor(r.exposure))
            count = rng.binomial(trials, min(r.count / r.exposure, 1.0))
        resampled.append(CountRecord(r.setting, int(count), r.exposure))
    return resampled


def bootstrap_errorbars(records: Sequence[CountRecord], replicas: int = 100,
                        statistic: Callable[[DensityMatrix], Any] = lambda rho: np.trace(rho.matrix).real,
                        seed: int = 0, runner: Optional[ParallelTaskRunner] = None,
                        max_iter: int = 20000, tol: float = 1e-10, damping: float = 0.5,
                        method: str = 'apg') -> BootstrapResult:
    """Spread of ``statistic`` over MLE reconstructions of resampled counts.

    Replica i draws from ``default_rng([seed, i])``. With ``method='rhr'``
    every replica starts from the reconstruction of the original counts,
    slightly mixed with I/9; APG replicas start from their own linear inversion.
    """
    if replicas < 2:
        raise ValueError(f"bootstrap needs at least 2 replicas, got {replicas}")
    start = None
    if method == 'rhr':
        start = white_noise(mle_reconstruct(records, max_iter, tol, damping, method=method).rho_hat, 0.01)

    def replica(i: int) -> np.ndarray:
        rng = np.random.default_rng([seed, i])
        result = mle_reconstruct(resample_records(records, rng), max_iter, tol, damping,
                                 initial=start, method=method)
        return np.asarray(statistic(result.rho_hat), dtype=float)

    runner = runner if runner is not None else ParallelTaskRunner(chunk_size=1)
    values = np.array(runner.map(replica, replicas, label="bootstrap replicas"))
    mean, std = values.mean(axis=0), values.std(axis=0, ddof=1)
    if values.ndim == 1:
        return BootstrapResult(float(mean), float(std), values)
    return BootstrapResult(mean, std, values)


def records_to_frame(records: Sequence[CountRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.setting.ket_left, r.setting.ket_right, r.count, r.exposure) for r in records],
        columns=RECORD_COLUMNS,
    )


def frame_to_records(df: pd.DataFrame) -> List[CountRecord]:
    missing = [c for c in RECORD_COLUMNS[:3] if c not in df.columns]
    if missing:
        raise ValueError(f"Missing required columns: {missing}")
    exposures = df['exposure'] if 'exposure' in df.columns else pd.Series([None] * len(df))
    return [
        CountRecord(TomographySetting(int(left), int(right)), int(count),
                    None if pd.isna(exposure) else float(exposure))
        for left, right, count, exposure in zip(df['setting_left'], df['setting_right'], df['count'], exposures)
    ]


def write_count_records(records: Sequence[CountRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    records_to_frame(records).to_csv(path, index=False)
    logger.info(f"Wrote {len(records)} count records to {path}")
    return path


def detect_encoding(path: Union[str, Path]) -> str:
    """chardet guess on the first 10KB, utf-8 when undecided."""
    try:
        with open(path, 'rb') as f:
            encoding = chardet.detect(f.read(10000))['encoding']
    except OSError as e:
        logger.warning(f"Encoding detection failed: {e}. Using utf-8")
        return 'utf-8'
    return encoding or 'utf-8'


def read_count_records(path: Union[str, Path]) -> List[CountRecord]:
    encoding = detect_encoding(path)
    try:
        df = pd.read_csv(path, encoding=encoding)
    except UnicodeDecodeError:
        logger.info(f"Decoding as {encoding} failed, falling back to utf-8")
        df = pd.read_csv(path, encoding='utf-8')
    records = frame_to_records(df)
    logger.info(f"Loaded {len(records)} count records from {path}")
    return records
