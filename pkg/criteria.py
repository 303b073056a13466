"""
Entanglement verdicts from sector lengths and moments.

Three-qubit criteria work on sector lengths (A1, A2, A3). For two qudits the
fourth moment R^(4) is compared with the smallest value compatible with the
measured R^(2) over all correlation matrices that satisfy the de Vicente
bound tr|T| <= d - 1; a PPT state below that bound is bound entangled.
"""

from dataclasses import dataclass
import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize

from bloch import correlation_matrix, sector_lengths
from invariants import G_TAU, moments_from_T, moments_from_singular_values, wootters_margin
from states import ghzw_mix
from tensor_linalg import DensityMatrix, min_eigenvalue, partial_trace, partial_transpose, trace_norm

logger = logging.getLogger(__name__)

STRONG_BISEP_WINDOW = (0.297, 0.612)

STRONG_BISEP_LABEL = "no fixed-partition biseparability (GME conjectured)"
DIRECTIONS = ('>', '<')
FEASIBILITY_TOL = 1e-8
MOMENT_TOL = 1e-12


@dataclass(frozen=True)
class CriterionResult:
    """A scalar test statistic against a threshold.

    ``direction='>'`` flags values strictly above the threshold,
    ``direction='<'`` values strictly below it.
    """

    name: str
    value: float
    threshold: float
    direction: str = '>'
    std_error: float = 0.0
    label: str = ''

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")

    @property
    def margin(self) -> float:
        """Distance past the threshold, positive when violated."""
        diff = self.value - self.threshold
        return diff if self.direction == '>' else -diff

    @property
    def violated(self) -> bool:
        return self.margin > 0

    @property
    def z_score(self) -> float:
        if self.std_error == 0:
            return float(np.sign(self.margin) * np.inf) if self.margin else 0.0
        return self.margin / self.std_error

    def significant(self, sigma: float = 3.0) -> bool:
        return self.violated and self.z_score >= sigma

    def verdict(self, sigma: float = 3.0) -> str:
        if self.significant(sigma):
            return self.label or 'violated'
        return 'violated (below significance)' if self.violated else 'not violated'


def criterion_a3(a3: float, err: float = 0.0) -> CriterionResult:
    """A3 > 3 implies genuine multipartite entanglement."""
    return CriterionResult('A3', float(a3), 3.0, '>', float(err), 'GME')


def criterion_strong_bisep(a1: float, a2: float, a3: float,
                           errs: Sequence[float] = (0.0, 0.0, 0.0)) -> CriterionResult:
    """A2 + A3 - 3(1 + A1) > 0 rules out biseparability for every fixed partition."""
    e1, e2, e3 = errs
    value = a2 + a3 - 3 * (1 + a1)
    err = float(np.sqrt(9 * e1 ** 2 + e2 ** 2 + e3 ** 2))
    return CriterionResult('strong_bisep', float(value), 0.0, '>', err, STRONG_BISEP_LABEL)


def _check_T(T: np.ndarray, d: int) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.shape != (d * d - 1, d * d - 1):
        raise ValueError(f"Correlation matrix for d={d} must be {d * d - 1}x{d * d - 1}, got {T.shape}")
    return T


def de_vicente_value(T: np.ndarray, d: int) -> float:
    """tr|T|; separable states satisfy tr|T| <= d - 1."""
    return trace_norm(_check_T(T, d))


def de_vicente_criterion(T: np.ndarray, d: int) -> CriterionResult:
    return CriterionResult('de_vicente', de_vicente_value(T, d), float(d - 1), '>', 0.0, 'entangled')


@dataclass(frozen=True, eq=False)
class FourthMomentBound:
    r2_input: float
    bound: float
    optimal_singular_values: np.ndarray
    d: int = 3
    solver: str = 'enumeration'

    def is_feasible(self, tol: float = FEASIBILITY_TOL) -> bool:
        sigma = self.optimal_singular_values
        c = self.d - 1
        return (bool(np.all(sigma >= -tol))
                and abs(np.sum(sigma ** 2) - self.r2_input * c ** 2) <= tol
                and np.sum(sigma) <= c + tol)


def _problem(r2: float, d: int) -> Tuple[float, float, int]:
    """(s, c, n): sum sigma^2 = s, sum sigma <= c, n singular values."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not np.isfinite(r2) or r2 < -MOMENT_TOL:
        raise ValueError(f"r2 must be a finite non-negative number, got {r2}")
    c = float(d - 1)
    s = max(float(r2), 0.0) * c ** 2
    if s > c ** 2 + MOMENT_TOL:
        raise ValueError(f"r2 = {r2} is infeasible: no T with tr|T| <= {d - 1} has tr(TT^T) = {s:.6g}")
    return s, c, d * d - 1


def _bound_from_sigma(r2: float, sigma: np.ndarray, d: int, solver: str) -> FourthMomentBound:
    sigma = np.sort(np.clip(sigma, 0.0, None))[::-1]
    r4 = moments_from_singular_values(sigma, d).r4
    return FourthMomentBound(float(r2), r4, sigma, d, solver)


def _two_value_candidates(s: float, c: float, n: int) -> List[np.ndarray]:
    """KKT points with the trace-norm constraint active: k entries a, m entries b."""
    candidates = []
    for k in range(1, n + 1):
        a = np.sqrt(s / k)
        if k * a <= c + FEASIBILITY_TOL:
            candidates.append(np.concatenate([np.full(k, a), np.zeros(n - k)]))
        for m in range(1, n - k + 1):
            disc = k * m * ((k + m) * s - c ** 2)
            if disc < 0:
                continue
            for sign in (1.0, -1.0):
                a = (k * c + sign * np.sqrt(disc)) / (k * (k + m))
                b = (c - k * a) / m
                if a < -FEASIBILITY_TOL or b < -FEASIBILITY_TOL:
                    continue
                candidates.append(np.concatenate([np.full(k, a), np.full(m, b), np.zeros(n - k - m)]))
    return candidates


def _enumeration_solver(s: float, c: float, n: int) -> np.ndarray:
    uniform = np.full(n, np.sqrt(s / n))
    if uniform.sum() <= c + FEASIBILITY_TOL:
        return uniform
    candidates = _two_value_candidates(s, c, n)
    return min(candidates, key=lambda x: float(np.sum(x ** 4)))


def _numeric_solver(s: float, c: float, n: int, starts: int = 24, seed: int = 0) -> np.ndarray:
    """Multistart SLSQP on sum sigma^4 with the two moment constraints."""
    if s == 0:
        return np.zeros(n)

    constraints = [
        {'type': 'eq', 'fun': lambda x: np.sum(x ** 2) - s, 'jac': lambda x: 2 * x},
        {'type': 'ineq', 'fun': lambda x: c - np.sum(x), 'jac': lambda x: -np.ones_like(x)},
    ]
    initial = [np.full(n, np.sqrt(s / n))]
    for j in range(starts - 1):
        rng = np.random.default_rng([seed, j])
        x = rng.random(n) ** (1 + j % 4)
        initial.append(x * np.sqrt(s / np.sum(x ** 2)))

    best = None
    for x0 in initial:
        res = minimize(lambda x: np.sum(x ** 4), x0, jac=lambda x: 4 * x ** 3, method='SLSQP',
                       bounds=[(0.0, c)] * n, constraints=constraints,
                       options={'ftol': 1e-15, 'maxiter': 1000})
        x = np.clip(res.x, 0.0, None)
        if abs(np.sum(x ** 2) - s) > 1e-9 or np.sum(x) > c + 1e-9:
            continue
        if best is None or np.sum(x ** 4) < np.sum(best ** 4):
            best = x
    if best is None:
        raise RuntimeError("Numeric fourth-moment solver found no feasible point")
    return best


def min_r4_given_r2(r2: float, d: int = 3, solver: str = 'enumeration') -> FourthMomentBound:
    """Smallest R^(4) compatible with R^(2) = r2 and tr|T| <= d - 1.

    R^(4) depends on T only through sum sigma^2 (fixed) and sum sigma^4, so the
    problem reduces to minimizing sum sigma^4 over singular values. The
    minimizer takes at most two distinct nonzero values, which
    ``solver='enumeration'`` enumerates in closed form; ``solver='numeric'``
    runs multistart SLSQP instead.
    """
    s, c, n = _problem(r2, d)
    if solver == 'enumeration':
        sigma = _enumeration_solver(s, c, n)
    elif solver == 'numeric':
        sigma = _numeric_solver(s, c, n)
    else:
        raise ValueError(f"Unknown solver {solver!r}; expected 'enumeration' or 'numeric'")
    return _bound_from_sigma(r2, sigma, d, solver)


def two_value_grid_search(r2: float, d: int = 3, step: float = 1e-3) -> FourthMomentBound:
    """Brute-force reference: scan a on a grid, solve b from the R^(2) equality."""
    s, c, n = _problem(r2, d)
    grid = np.arange(0.0, c + step / 2, step)
    best_sum4, best = np.inf, None

    for k in range(1, n + 1):
        for m in range(0, n - k + 1):
            if m == 0:
                a = np.array([np.sqrt(s / k)])
                b = np.zeros(1)
            else:
                a = grid[k * grid ** 2 <= s]
                b = np.sqrt((s - k * a ** 2) / m)
            feasible = k * a + m * b <= c + 1e-12
            if not np.any(feasible):
                continue
            sum4 = k * a ** 4 + m * b ** 4
            sum4 = np.where(feasible, sum4, np.inf)
            i = int(np.argmin(sum4))
            if sum4[i] < best_sum4:
                best_sum4 = sum4[i]
                best = np.concatenate([np.full(k, a[i]), np.full(m, b[i]), np.zeros(n - k - m)])

    if best is None:
        raise ValueError(f"Grid search found no feasible point for r2 = {r2}")
    return _bound_from_sigma(r2, best, d, 'grid')


@dataclass(frozen=True, eq=False)
class BoundEntanglementReport:
    r2: float
    r4: float
    bound: FourthMomentBound
    min_pt_eigenvalue: float
    de_vicente: float
    psd_tolerance: float = 1e-10

    @property
    def margin(self) -> float:
        """r4 - bound; negative means the moment criterion is violated."""
        return self.r4 - self.bound.bound

    @property
    def ppt(self) -> bool:
        return self.min_pt_eigenvalue >= -self.psd_tolerance

    @property
    def second_moment_excess(self) -> bool:
        """r2 > 1 is already incompatible with tr|T| <= d - 1."""
        return self.r2 > 1.0 + MOMENT_TOL

    @property
    def moment_violating(self) -> bool:
        return self.second_moment_excess or self.margin < -MOMENT_TOL

    @property
    def bound_entangled_evidence(self) -> bool:
        return self.ppt and self.moment_violating

    def criterion(self, std_error: float = 0.0) -> CriterionResult:
        return CriterionResult('fourth_moment', self.r4, self.bound.bound, '<', std_error, 'entangled')


def detect_bound_entanglement(rho: DensityMatrix, psd_tolerance: float = 1e-10,
                              form: str = 'haar') -> BoundEntanglementReport:
    dims = rho.shape.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValueError(f"detect_bound_entanglement requires two equal qudits, got {dims}")
    d = dims[0]

    T = correlation_matrix(rho)
    moments = moments_from_T(T, d, form=form)
    bound = min_r4_given_r2(min(moments.r2, 1.0), d)
    report = BoundEntanglementReport(
        r2=moments.r2,
        r4=moments.r4,
        bound=bound,
        min_pt_eigenvalue=min_eigenvalue(partial_transpose(rho, 1)),
        de_vicente=de_vicente_value(T, d),
        psd_tolerance=psd_tolerance,
    )
    logger.debug(f"r2={report.r2:.5f} r4={report.r4:.5f} bound={bound.bound:.5f} "
                 f"min PT eig={report.min_pt_eigenvalue:.3e}")
    return report


@dataclass(frozen=True)
class CriterionRoots:
    strong_bisep: Tuple[float, float]
    a3: Tuple[float, float]
    concurrence: float
    tangle: float = G_TAU


def strong_bisep_value(g: float) -> float:
    return criterion_strong_bisep(*sector_lengths(ghzw_mix(g))).value


def a3_value(g: float) -> float:
    return criterion_a3(sector_lengths(ghzw_mix(g)).A3).value


def pair_concurrence_margin(g: float) -> float:
    """Signed Wootters margin of the A|B reduction of rho(g); A|C is identical by symmetry."""
    return wootters_margin(partial_trace(ghzw_mix(g), [0, 1]))


def criterion_roots(xtol: float = 1e-12) -> CriterionRoots:
    """Boundaries of the criteria regions along the ideal GHZ-W family."""

    def roots(f) -> Tuple[float, float]:
        return (brentq(f, 0.0, 0.45, xtol=xtol), brentq(f, 0.45, 1.0, xtol=xtol))

    return CriterionRoots(
        strong_bisep=roots(strong_bisep_value),
        a3=roots(a3_value),
        concurrence=brentq(pair_concurrence_margin, 0.0, 0.5, xtol=xtol),
    )

