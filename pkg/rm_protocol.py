"""
Randomized-measurement engine.

Haar-random local unitaries are drawn per setting, finite-shot outcome counts
are sampled from the rotated state, and the moments R_S^(2) (and, for two
qudits, R^(4)) are estimated with unbiased estimators built from the counts.
Every setting i of repetition r draws from ``default_rng([seed, r, i])`` so
results are independent of scheduling.
"""

from dataclasses import dataclass, field, replace
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from bloch import pauli_coeffs, correlation_matrix, SectorLengths
from invariants import (
    ALL_SUBSETS_3,
    MomentPair,
    moment_normalization,
    moments_from_T,
    sector_lengths_from_moments,
    subset_key,
    subset_label,
)
from performance_optimizer import ParallelTaskRunner
from tensor_linalg import DensityMatrix, kron_all

logger = logging.getLogger(__name__)

PROB_TOL = 1e-10
NEGATIVE_PROB_TOL = 1e-12


class NumericalConsistencyError(RuntimeError):
    """A numerical self-check (e.g. the Haar moment oracle) failed."""


def default_observable(d: int) -> np.ndarray:
    """Eigenvalues of the traceless diagonal tau with tr(tau^2) = d.

    Evenly spaced, so d=2 gives sigma_z and d=3 gives diag(sqrt(3/2), 0, -sqrt(3/2)).
    """
    if d < 2:
        raise ValueError(f"Local dimension must be >= 2, got {d}")
    levels = np.linspace(1.0, -1.0, d)
    return levels * np.sqrt(d / np.sum(levels ** 2))


@dataclass(frozen=True)
class ProtocolConfig:
    num_unitaries: int = 4000
    shots_per_unitary: int = 5300
    subsets: Tuple[Tuple[int, ...], ...] = ALL_SUBSETS_3
    seed: int = 20240101
    local_observables: Optional[Mapping[int, Sequence[float]]] = field(default=None, compare=False)
    repetitions: int = 1

    def __post_init__(self):
        if int(self.num_unitaries) < 1:
            raise ValueError(f"num_unitaries must be >= 1, got {self.num_unitaries}")
        if int(self.shots_per_unitary) < 2:
            raise ValueError(f"shots_per_unitary must be >= 2, got {self.shots_per_unitary}")
        if int(self.repetitions) < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        subsets = tuple(subset_key(s) for s in self.subsets)
        if not subsets:
            raise ValueError("ProtocolConfig needs at least one subset")
        object.__setattr__(self, 'subsets', subsets)

    def observable(self, d: int) -> np.ndarray:
        """Diagonal of tau for local dimension d."""
        if self.local_observables and d in self.local_observables:
            tau = np.asarray(self.local_observables[d], dtype=float)
            if tau.shape != (d,):
                raise ValueError(f"Observable for d={d} must have {d} eigenvalues, got {tau.shape}")
            return tau
        return default_observable(d)

    @classmethod
    def from_config(cls, config, **overrides) -> 'ProtocolConfig':
        """Build from the ``protocol`` section of an RMToolboxConfig."""
        params = dict(
            num_unitaries=config.get('protocol.num_unitaries', 4000),
            shots_per_unitary=config.get('protocol.shots_per_unitary', 5300),
            seed=config.get('protocol.seed', 20240101),
            repetitions=config.get('protocol.repetitions', 1),
        )
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True, eq=False)
class ShotCounts:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("ShotCounts expects a 1-d integer array")
        if np.any(counts < 0):
            raise ValueError("Counts must be non-negative")
        object.__setattr__(self, 'counts', counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_error: float
    num_unitaries: int
    shots_per_unitary: int
    seed: int
    repetitions: int = 1

    def z_score(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.value == reference else float(np.sign(self.value - reference) * np.inf)
        return (self.value - reference) / self.std_error


@dataclass(frozen=True)
class SectorLengthEstimate:
    values: SectorLengths
    errors: SectorLengths
    moments: Dict[Tuple[int, ...], MomentEstimate] = field(compare=False)


@dataclass(frozen=True)
class BipartiteMomentEstimate:
    r2: MomentEstimate
    r4: MomentEstimate


@dataclass(frozen=True, eq=False)
class ProtocolRun:
    """Counts of every setting: ``counts[r, i]`` is the outcome histogram of
    setting i in repetition r over the full product basis."""

    counts: np.ndarray
    dims: Tuple[int, ...]
    config: ProtocolConfig


@dataclass(frozen=True)
class OracleCheck:
    expected: MomentPair
    r2: MomentEstimate
    r4: MomentEstimate
    form: str
    max_sigma: float

    @property
    def z2(self) -> float:
        return self.r2.z_score(self.expected.r2)

    @property
    def z4(self) -> float:
        return self.r4.z_score(self.expected.r4)

    @property
    def passed(self) -> bool:
        return abs(self.z2) <= self.max_sigma and abs(self.z4) <= self.max_sigma


def haar_unitary(d: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Haar-random d x d unitary (or a stack of ``size`` of them).

    Ginibre matrix, QR, then the phases of diag(R) are absorbed into Q.
    """
    if d < 2:
        raise ValueError(f"haar_unitary needs d >= 2, got {d}")
    shape = (d, d) if size is None else (size, d, d)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def outcome_probs(rho: DensityMatrix, unitaries: Sequence[np.ndarray]) -> np.ndarray:
    """Product-basis outcome distribution of (U_1 x ... x U_n) rho (...)^dagger."""
    dims = rho.shape.dims
    if len(unitaries) != len(dims):
        raise ValueError(f"Expected {len(dims)} local unitaries, got {len(unitaries)}")
    for k, (u, d) in enumerate(zip(unitaries, dims)):
        if np.shape(u) != (d, d):
            raise ValueError(f"Unitary {k} has shape {np.shape(u)}, party dimension is {d}")

    u = kron_all([np.asarray(x) for x in unitaries])
    probs = np.einsum('ij,jk,ik->i', u, rho.matrix, u.conj()).real
    if probs.min() < -1e-8:
        raise ValueError(f"Negative outcome probability {probs.min():.3e}")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> ShotCounts:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -NEGATIVE_PROB_TOL) or abs(probs.sum() - 1.0) > PROB_TOL:
        raise ValueError("probs must be a probability vector")
    return ShotCounts(rng.multinomial(int(shots), np.clip(probs, 0.0, None) / probs.sum()))


def outcome_values(dims: Sequence[int], subset: Iterable[int],
                   observable=default_observable) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """X values over the marginal outcomes of ``subset`` and the marginal dims.

    X is the product of tau eigenvalues of the parties in the subset.
    """
    subset = subset_key(subset)
    if subset[-1] >= len(dims):
        raise ValueError(f"Subset {subset} out of range for {len(dims)} parties")
    values = np.ones(1)
    for p in subset:
        values = np.multiply.outer(values, observable(dims[p])).ravel()
    return values, tuple(dims[p] for p in subset)


def marginalize_counts(counts: np.ndarray, dims: Sequence[int], subset: Iterable[int]) -> np.ndarray:
    """Sum counts over the parties outside ``subset``; works on stacked histograms."""
    subset = subset_key(subset)
    counts = np.asarray(counts)
    lead = counts.shape[:-1]
    tensor = counts.reshape(lead + tuple(dims))
    others = tuple(len(lead) + p for p in range(len(dims)) if p not in subset)
    marginal = tensor.sum(axis=others) if others else tensor
    return marginal.reshape(lead + (-1,))


def _power_sums(counts: np.ndarray, values: np.ndarray, kmax: int) -> List[np.ndarray]:
    counts = np.asarray(counts, dtype=float)
    return [counts @ values ** k for k in range(1, kmax + 1)]


def _e2(counts: np.ndarray, values: np.ndarray) -> np.ndarray:
    """[N (sum X p)^2 - sum X^2 p]/(N - 1), i.e. (S1^2 - S2)/(N(N-1))."""
    n = np.asarray(counts).sum(axis=-1).astype(float)
    s1, s2 = _power_sums(counts, values, 2)
    return (s1 ** 2 - s2) / (n * (n - 1))


def _e4(counts: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Mean of X_a X_b X_c X_d over ordered 4-tuples of distinct shots."""
    n = np.asarray(counts).sum(axis=-1).astype(float)
    s1, s2, s3, s4 = _power_sums(counts, values, 4)
    numerator = s1 ** 4 - 6 * s1 ** 2 * s2 + 3 * s2 ** 2 + 8 * s1 * s3 - 6 * s4
    return numerator / (n * (n - 1) * (n - 2) * (n - 3))


def _check_values(counts: ShotCounts, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != counts.counts.shape:
        raise ValueError(f"{values.size} outcome values for {counts.counts.size} outcomes")
    return values


def estimate_E2(counts: ShotCounts, values: np.ndarray) -> float:
    """Unbiased estimate of (sum_i X_i p_i)^2; can be negative for small N."""
    values = _check_values(counts, values)
    if counts.total < 2:
        raise ValueError(f"estimate_E2 needs N >= 2 shots, got {counts.total}")
    return float(_e2(counts.counts, values))


def estimate_E4(counts: ShotCounts, values: np.ndarray) -> float:
    """Unbiased estimate of (sum_i X_i p_i)^4."""
    values = _check_values(counts, values)
    if counts.total < 4:
        raise ValueError(f"estimate_E4 needs N >= 4 shots, got {counts.total}")
    return float(_e4(counts.counts, values))


def _make_runner(runner: Optional[ParallelTaskRunner]) -> ParallelTaskRunner:
    return runner if runner is not None else ParallelTaskRunner()


def simulate_protocol(rho: DensityMatrix, cfg: ProtocolConfig,
                      runner: Optional[ParallelTaskRunner] = None) -> ProtocolRun:
    """Draw M local-unitary settings per repetition and N shots for each."""
    runner = _make_runner(runner)
    dims = rho.shape.dims
    m = cfg.num_unitaries

    def setting(task: int) -> np.ndarray:
        rep, i = divmod(task, m)
        rng = np.random.default_rng([cfg.seed, rep, i])
        unitaries = [haar_unitary(d, rng) for d in dims]
        return sample_counts(outcome_probs(rho, unitaries), cfg.shots_per_unitary, rng).counts

    logger.debug(f"Simulating {cfg.repetitions} x {m} settings x {cfg.shots_per_unitary} shots on dims {dims}")
    results = runner.map(setting, cfg.repetitions * m, label="unitaries")
    counts = np.array(results).reshape(cfg.repetitions, m, -1)
    return ProtocolRun(counts, dims, cfg)


def _summarize(per_setting: np.ndarray, cfg: ProtocolConfig, scale: float = 1.0) -> MomentEstimate:
    """Mean over settings; error from the repetition spread if repeated, else
    from the per-setting spread."""
    per_setting = scale * per_setting
    if cfg.repetitions > 1:
        rep_means = per_setting.mean(axis=1)
        value = float(rep_means.mean())
        std_error = float(rep_means.std(ddof=1) / np.sqrt(cfg.repetitions))
    else:
        flat = per_setting.ravel()
        value = float(flat.mean())
        std_error = float(flat.std(ddof=1) / np.sqrt(flat.size)) if flat.size > 1 else 0.0
    return MomentEstimate(value, std_error, cfg.num_unitaries, cfg.shots_per_unitary, cfg.seed, cfg.repetitions)


def moments_from_run(run: ProtocolRun, subsets: Optional[Iterable] = None) -> Dict[Tuple[int, ...], MomentEstimate]:
    """R_S^(2) for each subset, all from the same settings."""
    cfg = run.config
    estimates = {}
    for subset in (cfg.subsets if subsets is None else subsets):
        key = subset_key(subset)
        values, _ = outcome_values(run.dims, key, cfg.observable)
        marginal = marginalize_counts(run.counts, run.dims, key)
        estimates[key] = _summarize(_e2(marginal, values), cfg)
    return estimates


def estimate_moments(rho: DensityMatrix, cfg: ProtocolConfig,
                     runner: Optional[ParallelTaskRunner] = None) -> Dict[Tuple[int, ...], MomentEstimate]:
    return moments_from_run(simulate_protocol(rho, cfg, runner))


def estimate_R2(rho: DensityMatrix, subset, cfg: ProtocolConfig,
                runner: Optional[ParallelTaskRunner] = None) -> MomentEstimate:
    key = subset_key(subset)
    cfg = replace(cfg, subsets=(key,))
    return moments_from_run(simulate_protocol(rho, cfg, runner))[key]


def analytic_R2(rho: DensityMatrix, subset) -> float:
    """3^-|S| times the squared Pauli coefficients supported exactly on S."""
    key = subset_key(subset)
    alpha = pauli_coeffs(rho).alpha
    idx = np.indices(alpha.shape)
    support = np.ones(alpha.shape, dtype=bool)
    for party in range(3):
        support &= (idx[party] != 0) == (party in key)
    return float(np.sum(alpha[support] ** 2) / 3 ** len(key))


def estimate_sector_lengths(rho: DensityMatrix, cfg: ProtocolConfig,
                            runner: Optional[ParallelTaskRunner] = None) -> SectorLengthEstimate:
    if rho.shape.dims != (2, 2, 2):
        raise ValueError(f"estimate_sector_lengths requires three qubits, got {rho.shape.dims}")
    cfg = replace(cfg, subsets=ALL_SUBSETS_3)
    moments = estimate_moments(rho, cfg, runner)

    values = sector_lengths_from_moments({k: v.value for k, v in moments.items()})
    errors = []
    for size, weight in ((1, 3), (2, 9), (3, 27)):
        variance = sum(m.std_error ** 2 for k, m in moments.items() if len(k) == size)
        errors.append(weight * np.sqrt(variance))
    logger.debug("Estimated sector lengths " + ", ".join(
        f"{subset_label(k)}={m.value:.4f}" for k, m in moments.items()))
    return SectorLengthEstimate(values, SectorLengths(*errors), moments)


def estimate_bipartite_moments(rho: DensityMatrix, cfg: ProtocolConfig,
                               runner: Optional[ParallelTaskRunner] = None) -> BipartiteMomentEstimate:
    """Finite-shot R^(2), R^(4) of two equal-dimension qudits, normalized like moments_from_T."""
    dims = rho.shape.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValueError(f"estimate_bipartite_moments requires two equal qudits, got {dims}")
    if cfg.shots_per_unitary < 4:
        raise ValueError("Fourth-moment estimation needs shots_per_unitary >= 4")
    d = dims[0]

    run = simulate_protocol(rho, cfg, runner)
    values, _ = outcome_values(dims, (0, 1), cfg.observable)
    counts = run.counts
    r2 = _summarize(_e2(counts, values), cfg, moment_normalization(d, 2))
    r4 = _summarize(_e4(counts, values), cfg, moment_normalization(d, 4))
    return BipartiteMomentEstimate(r2, r4)


def haar_moment_oracle(rho: DensityMatrix, samples: int = 100000, seed: int = 0,
                       observable: Optional[np.ndarray] = None, chunk: int = 5000,
                       runner: Optional[ParallelTaskRunner] = None) -> BipartiteMomentEstimate:
    """Monte Carlo Haar averages of exact correlations <U tau U^+ x V tau V^+>^t, t = 2, 4.

    No shot noise; normalized by moment_normalization so the results compare
    directly with moments_from_T.
    """
    dims = rho.shape.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValueError(f"haar_moment_oracle requires two equal qudits, got {dims}")
    if samples < 2:
        raise ValueError("haar_moment_oracle needs at least 2 samples")
    d = dims[0]
    tau = default_observable(d) if observable is None else np.asarray(observable, dtype=float)
    tensor = rho.matrix.reshape(d, d, d, d)
    num_chunks = -(-samples // chunk)

    def batch(c: int) -> np.ndarray:
        size = min(chunk, samples - c * chunk)
        rng = np.random.default_rng([seed, c])
        u = haar_unitary(d, rng, size)
        v = haar_unitary(d, rng, size)
        o1 = np.einsum('nij,j,nkj->nik', u, tau, u.conj())
        o2 = np.einsum('nij,j,nkj->nik', v, tau, v.conj())
        return np.einsum('axby,nba,nyx->n', tensor, o1, o2).real

    runner = runner if runner is not None else ParallelTaskRunner(chunk_size=1)
    e = np.concatenate(runner.map(batch, num_chunks, label="oracle batches"))

    def estimate(x: np.ndarray, scale: float) -> MomentEstimate:
        x = scale * x
        return MomentEstimate(float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)), samples, 0, seed)

    return BipartiteMomentEstimate(estimate(e ** 2, moment_normalization(d, 2)),
                                   estimate(e ** 4, moment_normalization(d, 4)))


def check_moment_normalization(rho: DensityMatrix, form: str = 'haar', samples: int = 100000,
                               seed: int = 0, max_sigma: float = 5.0,
                               runner: Optional[ParallelTaskRunner] = None) -> OracleCheck:
    """Compare moments_from_T against the Haar oracle; raise on disagreement."""
    d = rho.shape.dims[0]
    expected = moments_from_T(correlation_matrix(rho), d, form=form)
    oracle = haar_moment_oracle(rho, samples, seed, runner=runner)
    check = OracleCheck(expected, oracle.r2, oracle.r4, form, max_sigma)

    logger.info(f"Moment oracle ({form}): r2 {oracle.r2.value:.5f} vs {expected.r2:.5f} (z={check.z2:+.2f}), "
                f"r4 {oracle.r4.value:.5f} vs {expected.r4:.5f} (z={check.z4:+.2f})")
    if not check.passed:
        raise NumericalConsistencyError(
            f"Haar oracle disagrees with the '{form}' moment formula beyond {max_sigma} sigma: "
            f"z(r2)={check.z2:+.2f}, z(r4)={check.z4:+.2f}"
        )
    return check
