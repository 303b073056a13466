"""
Experiment runners for the RM toolbox.

Each runner returns an ``ExperimentResult``: a pandas table with a fixed
column order, a dict of scalar results for the JSON summary, and an
optional plot description for the SVG output.
"""

from dataclasses import dataclass, field
from datetime import datetime
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from bloch import correlation_matrix, sector_lengths
from config import ConfigError, get_config
from criteria import (STRONG_BISEP_WINDOW, criterion_a3, criterion_roots, criterion_strong_bisep,
                      de_vicente_value, detect_bound_entanglement, min_r4_given_r2)
from invariants import ALL_SUBSETS_3, G_TAU, moments_from_T, squared_concurrence_sum, subset_label
from performance_optimizer import ParallelTaskRunner, create_task_runner
from result_exporter import PlotSeries, PlotSpec
from rm_protocol import (ProtocolConfig, analytic_R2, check_moment_normalization,
                         estimate_bipartite_moments, estimate_moments, estimate_sector_lengths)
from states import MEASURED_NOISE_LEVELS, ghzw_mix, ghzw_mix_from, noisy_chessboard
from tensor_linalg import DensityMatrix, fidelity, min_eigenvalue, partial_transpose
from tomography import (bootstrap_errorbars, estimate_noise_from_records, expected_count_records,
                        mle_reconstruct, records_to_frame, simulate_tomography_counts)

EXPERIMENTS = ('ghzw-sweep', 'chessboard-sweep', 'estimate-moments', 'tomography-roundtrip', 'bound')

GHZW_COLUMNS = [
    'g', 'A1_exact', 'A2_exact', 'A3_exact', 'crit1_exact', 'crit2_exact', 'concurrence_sq_sum',
]
GHZW_ESTIMATE_COLUMNS = [
    'A1_est', 'A1_err', 'A2_est', 'A2_err', 'A3_est', 'A3_err',
    'crit1_est', 'crit1_err', 'crit1_z', 'crit1_significant',
    'crit2_est', 'crit2_err', 'crit2_z', 'crit2_significant',
]
GHZW_MIXTURE_COLUMNS = ['A1_mix', 'A2_mix', 'A3_mix', 'crit1_mix', 'crit2_mix']

CHESSBOARD_COLUMNS = ['p', 'min_pt_eig', 'r2', 'r4', 'bound', 'margin', 'detected', 'de_vicente']
CHESSBOARD_TOMOGRAPHY_COLUMNS = [
    'p_est', 'fidelity', 'fidelity_err', 'min_pt_eig_tomo', 'min_pt_eig_tomo_err',
    'r2_tomo', 'r4_tomo', 'margin_tomo', 'margin_tomo_err',
]


@dataclass
class ExperimentResult:
    name: str
    table: pd.DataFrame
    results: Dict[str, Any] = field(default_factory=dict)
    plot: Optional[PlotSpec] = None
    seed: Optional[int] = None


def parameter_grid(start: float, stop: float, step: float) -> np.ndarray:
    """start, start + step, ... up to stop inclusive, rounded so grid values print cleanly."""
    if step <= 0:
        raise ValueError(f"Grid step must be > 0, got {step}")
    if not 0.0 <= start <= stop <= 1.0:
        raise ValueError(f"Grid range must satisfy 0 <= start <= stop <= 1, got [{start}, {stop}]")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 10)


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for grid point ``index``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def find_detection_threshold(lo: float = 0.0, hi: float = 1.0, tol: float = 1e-3,
                             psd_tolerance: float = 1e-10) -> Optional[float]:
    """Largest noise level p for which the fourth-moment criterion still flags rho_ch(p).

    The detected set is an interval starting at ``lo``; bisection narrows its
    right end to ``tol``. Returns None when ``lo`` itself is not detected and
    ``hi`` when the whole range is.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    def detected(p: float) -> bool:
        return detect_bound_entanglement(noisy_chessboard(p), psd_tolerance).moment_violating

    if not detected(lo):
        return None
    if detected(hi):
        return hi
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if detected(mid):
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


class ExperimentRunner:
    """Runs the batch experiments with settings from an RMToolboxConfig."""

    def __init__(self, config=None, progress_callback: Optional[Callable[[str, float], None]] = None):
        self.config = config or get_config()
        self.progress_callback = progress_callback
        self.logger = logging.getLogger(__name__)
        self.processing_stats = {
            'experiment': None,
            'start_time': None,
            'end_time': None,
            'rows': 0,
        }

    def _update_progress(self, message: str, percentage: float):
        if self.progress_callback:
            self.progress_callback(message, percentage)
        self.logger.info(f"Progress: {percentage:.1f}% - {message}")

    def _grid_runner(self) -> ParallelTaskRunner:
        """Runs grid points concurrently, one task per point."""
        return create_task_runner(config=self.config, chunk_size=1)

    def _point_runner(self) -> ParallelTaskRunner:
        """Sequential runner for work inside a single grid point."""
        return create_task_runner(config=self.config, parallel=False)

    def protocol_config(self, **overrides) -> ProtocolConfig:
        return ProtocolConfig.from_config(self.config, **overrides)

    def run(self, experiment: str, **kwargs) -> ExperimentResult:
        """Dispatch by CLI experiment name."""
        runners = {
            'ghzw-sweep': self.run_ghzw_sweep,
            'chessboard-sweep': self.run_chessboard_sweep,
            'estimate-moments': self.run_estimate_moments,
            'tomography-roundtrip': self.run_tomography_roundtrip,
            'bound': self.run_bound,
        }
        if experiment not in runners:
            raise ConfigError(f"Unknown experiment {experiment!r}", [f"experiment must be one of {EXPERIMENTS}"])
        self.config.ensure_valid()

        stats = self.processing_stats
        stats.update(experiment=experiment, start_time=datetime.now())
        try:
            result = runners[experiment](**kwargs)
        except Exception as e:
            self.logger.error(f"Experiment {experiment} failed: {e}")
            raise

        stats['end_time'] = datetime.now()
        stats['rows'] = len(result.table)
        duration = (stats['end_time'] - stats['start_time']).total_seconds()
        self.logger.info(f"{experiment}: {stats['rows']} rows in {duration:.2f}s")
        return result

    # GHZ-W sweep

    def ghzw_grid(self) -> np.ndarray:
        return parameter_grid(self.config.get('ghzw_sweep.g_start'), self.config.get('ghzw_sweep.g_stop'),
                              self.config.get('ghzw_sweep.g_step'))

    def run_ghzw_sweep(self, rho_ghz: Optional[DensityMatrix] = None, rho_w: Optional[DensityMatrix] = None,
                       estimate: Optional[bool] = None) -> ExperimentResult:
        """Sector-length criteria along rho(g) = g GHZ + (1 - g) W.

        ``rho_ghz``/``rho_w`` add columns for the mixture of those two states
        (both or neither must be given).
        """
        if (rho_ghz is None) != (rho_w is None):
            raise ValueError("rho_ghz and rho_w must be given together")
        estimate = self.config.get('ghzw_sweep.estimate', True) if estimate is None else estimate
        sigma = self.config.get('criteria.sigma_threshold', 3.0)
        grid = self.ghzw_grid()
        base = self.protocol_config()
        self._update_progress(f"GHZ-W sweep over {len(grid)} values of g", 0)

        def point(j: int) -> Dict[str, Any]:
            g = float(grid[j])
            rho = ghzw_mix(g)
            exact = sector_lengths(rho)
            row = {
                'g': g,
                'A1_exact': exact.A1,
                'A2_exact': exact.A2,
                'A3_exact': exact.A3,
                'crit1_exact': criterion_strong_bisep(*exact).value,
                'crit2_exact': criterion_a3(exact.A3).margin,
                'concurrence_sq_sum': squared_concurrence_sum(rho),
            }
            if estimate:
                cfg = ProtocolConfig.from_config(self.config, seed=derive_seed(base.seed, j))
                est = estimate_sector_lengths(rho, cfg, self._point_runner())
                crit1 = criterion_strong_bisep(*est.values, errs=est.errors)
                crit2 = criterion_a3(est.values.A3, est.errors.A3)
                row.update({
                    'A1_est': est.values.A1, 'A1_err': est.errors.A1,
                    'A2_est': est.values.A2, 'A2_err': est.errors.A2,
                    'A3_est': est.values.A3, 'A3_err': est.errors.A3,
                    'crit1_est': crit1.value, 'crit1_err': crit1.std_error,
                    'crit1_z': crit1.z_score, 'crit1_significant': crit1.significant(sigma),
                    'crit2_est': crit2.margin, 'crit2_err': crit2.std_error,
                    'crit2_z': crit2.z_score, 'crit2_significant': crit2.significant(sigma),
                })
            if rho_ghz is not None:
                mixed = sector_lengths(ghzw_mix_from(rho_ghz, rho_w, g))
                row.update({
                    'A1_mix': mixed.A1, 'A2_mix': mixed.A2, 'A3_mix': mixed.A3,
                    'crit1_mix': criterion_strong_bisep(*mixed).value,
                    'crit2_mix': criterion_a3(mixed.A3).margin,
                })
            return row

        rows = self._grid_runner().map(point, len(grid), label="g grid points")
        columns = (GHZW_COLUMNS + (GHZW_ESTIMATE_COLUMNS if estimate else [])
                   + (GHZW_MIXTURE_COLUMNS if rho_ghz is not None else []))
        table = pd.DataFrame(rows, columns=columns)

        roots = criterion_roots()
        results = {
            'g_C': roots.concurrence,
            'g_tau': roots.tangle,
            'strong_bisep_roots': list(roots.strong_bisep),
            'a3_roots': list(roots.a3),
            'num_unitaries': base.num_unitaries if estimate else None,
            'shots_per_unitary': base.shots_per_unitary if estimate else None,
        }
        self._update_progress("GHZ-W sweep complete", 100)
        return ExperimentResult('ghzw-sweep', table, results, self._ghzw_plot(estimate, rho_ghz is not None, roots),
                                base.seed)

    @staticmethod
    def _ghzw_plot(estimate: bool, mixture: bool, roots) -> PlotSpec:
        series = [
            PlotSeries('crit1_exact', 'Criterion I (exact)', style='-'),
            PlotSeries('crit2_exact', 'Criterion II (exact)', style='--'),
        ]
        if estimate:
            series += [
                PlotSeries('crit1_est', 'Criterion I (estimated)', 'crit1_err', style='o'),
                PlotSeries('crit2_est', 'Criterion II (estimated)', 'crit2_err', style='s'),
            ]
        if mixture:
            series += [
                PlotSeries('crit1_mix', 'Criterion I (state mixture)', style=':'),
                PlotSeries('crit2_mix', 'Criterion II (state mixture)', style='-.'),
            ]
        series.append(PlotSeries('concurrence_sq_sum', 'C_AB^2 + C_AC^2', style='-', axis='right'))
        return PlotSpec(
            x='g', series=series,
            xlabel='g (GHZ weight)', ylabel='criterion value', right_ylabel='squared concurrence sum',
            title='GHZ-W mixtures',
            vlines=[(roots.concurrence, 'g_C'), (G_TAU, 'g_tau')],
            spans=[(STRONG_BISEP_WINDOW[0], STRONG_BISEP_WINDOW[1], 'Criterion I silent')],
        )

    # Chessboard sweep

    def chessboard_grid(self) -> np.ndarray:
        if self.config.get('chessboard_sweep.grid', 'uniform') == 'measured':
            return np.array(MEASURED_NOISE_LEVELS)
        return parameter_grid(self.config.get('chessboard_sweep.p_start'),
                              self.config.get('chessboard_sweep.p_stop'),
                              self.config.get('chessboard_sweep.p_step'))

    def run_chessboard_sweep(self, tomography: Optional[bool] = None) -> ExperimentResult:
        """Bound-entanglement detection along rho_ch(p) = (1 - p) rho_ch + p I/9."""
        tomography = self.config.get('chessboard_sweep.tomography', False) if tomography is None else tomography
        psd_tolerance = self.config.get('criteria.psd_tolerance', 1e-10)
        form = self.config.get('oracle.form', 'haar')
        seed = self.config.get('protocol.seed')
        grid = self.chessboard_grid()

        self._update_progress("Checking moment normalization against the Haar oracle", 0)
        oracle = self._oracle_check(noisy_chessboard(0.0), form)
        self._update_progress(f"Chessboard sweep over {len(grid)} noise levels", 10)

        def point(j: int) -> Dict[str, Any]:
            p = float(grid[j])
            report = detect_bound_entanglement(noisy_chessboard(p), psd_tolerance, form)
            row = {
                'p': p,
                'min_pt_eig': report.min_pt_eigenvalue,
                'r2': report.r2,
                'r4': report.r4,
                'bound': report.bound.bound,
                'margin': report.margin,
                'detected': report.moment_violating,
                'de_vicente': report.de_vicente,
            }
            if tomography:
                row.update(self._tomography_point(p, derive_seed(seed, j)))
            return row

        rows = self._grid_runner().map(point, len(grid), label="p grid points")
        columns = CHESSBOARD_COLUMNS + (CHESSBOARD_TOMOGRAPHY_COLUMNS if tomography else [])
        table = pd.DataFrame(rows, columns=columns)

        self._update_progress("Bisecting the detection threshold", 90)
        threshold = find_detection_threshold(psd_tolerance=psd_tolerance)
        results = {
            'detection_threshold': threshold,
            'all_ppt': bool((table['min_pt_eig'] >= -psd_tolerance).all()),
            'oracle': oracle,
        }
        self._update_progress("Chessboard sweep complete", 100)
        return ExperimentResult('chessboard-sweep', table, results, self._chessboard_plot(tomography, threshold),
                                seed)

    def _oracle_check(self, rho: DensityMatrix, form: str) -> Dict[str, float]:
        check = check_moment_normalization(
            rho, form,
            samples=self.config.get('oracle.samples', 100000),
            seed=self.config.get('protocol.seed'),
            max_sigma=self.config.get('oracle.max_sigma', 5.0),
            runner=self._grid_runner(),
        )
        return {
            'form': form,
            'r2_expected': check.expected.r2, 'r2_oracle': check.r2.value, 'r2_oracle_err': check.r2.std_error,
            'r4_expected': check.expected.r4, 'r4_oracle': check.r4.value, 'r4_oracle_err': check.r4.std_error,
            'z2': check.z2, 'z4': check.z4,
        }

    def _tomography_point(self, p: float, seed: int) -> Dict[str, float]:
        """Simulated tomography of rho_ch(p) with bootstrap error bars."""
        shots = self.config.get('chessboard_sweep.shots_per_setting', 900000)
        replicas = self.config.get('chessboard_sweep.bootstrap_replicas', 100)
        mle_args = self._mle_args()
        target = noisy_chessboard(p)
        rng = np.random.default_rng(seed)

        reference = simulate_tomography_counts(noisy_chessboard(0.0), shots, 0.0, rng)
        noisy = simulate_tomography_counts(noisy_chessboard(0.0), shots, p, rng)
        reconstruction = mle_reconstruct(noisy, **mle_args)

        def statistics(rho: DensityMatrix) -> List[float]:
            report = detect_bound_entanglement(rho, form=self.config.get('oracle.form', 'haar'))
            return [fidelity(rho, target), report.min_pt_eigenvalue, report.margin]

        boot = bootstrap_errorbars(noisy, replicas, statistics, seed=seed,
                                   runner=self._point_runner(), **mle_args)
        fid, eig, margin = statistics(reconstruction.rho_hat)
        moments = moments_from_T(correlation_matrix(reconstruction.rho_hat), 3)
        return {
            'p_est': estimate_noise_from_records(noisy, reference),
            'fidelity': fid, 'fidelity_err': float(boot.std[0]),
            'min_pt_eig_tomo': eig, 'min_pt_eig_tomo_err': float(boot.std[1]),
            'r2_tomo': moments.r2, 'r4_tomo': moments.r4,
            'margin_tomo': margin, 'margin_tomo_err': float(boot.std[2]),
        }

    def _mle_args(self) -> Dict[str, Any]:
        return {
            'max_iter': self.config.get('tomography.max_iter', 20000),
            'tol': self.config.get('tomography.tol', 1e-10),
            'damping': self.config.get('tomography.damping', 0.5),
            'method': self.config.get('tomography.method', 'apg'),
        }

    @staticmethod
    def _chessboard_plot(tomography: bool, threshold: Optional[float]) -> PlotSpec:
        series = [PlotSeries('min_pt_eig', 'min eigenvalue of rho^T_B', style='-o')]
        if tomography:
            series.append(PlotSeries('min_pt_eig_tomo', 'min eigenvalue (tomography)', 'min_pt_eig_tomo_err',
                                     style='s'))
        series.append(PlotSeries('margin', 'R4 - bound', style='--^', axis='right'))
        if tomography:
            series.append(PlotSeries('margin_tomo', 'R4 - bound (tomography)', 'margin_tomo_err',
                                     style='v', axis='right'))
        spec = PlotSpec(x='p', series=series, xlabel='noise level p', ylabel='min PT eigenvalue',
                        right_ylabel='R4 - bound', title='Noisy chessboard state')
        if threshold is not None:
            spec.spans.append((0.0, threshold, 'moment criterion detects'))
        return spec

    # Moment estimation

    def run_estimate_moments(self, state: str = 'chessboard', parameter: float = 0.0) -> ExperimentResult:
        """Finite-shot randomized moments next to their exact values.

        ``state='chessboard'`` estimates R2/R4 of rho_ch(parameter) after the
        Haar oracle check; ``state='ghzw'`` estimates R_S^(2) of rho(parameter)
        for all seven party subsets.
        """
        cfg = self.protocol_config()
        runner = create_task_runner(config=self.config)
        results: Dict[str, Any] = {'state': state, 'parameter': parameter}

        if state == 'chessboard':
            rho = noisy_chessboard(parameter)
            form = self.config.get('oracle.form', 'haar')
            self._update_progress("Checking moment normalization against the Haar oracle", 0)
            results['oracle'] = self._oracle_check(rho, form)
            exact = moments_from_T(correlation_matrix(rho), 3, form=form)
            self._update_progress(f"Simulating {cfg.num_unitaries} settings x {cfg.shots_per_unitary} shots", 30)
            est = estimate_bipartite_moments(rho, cfg, runner)
            rows = [('R2', exact.r2, est.r2), ('R4', exact.r4, est.r4)]
        elif state == 'ghzw':
            rho = ghzw_mix(parameter)
            self._update_progress(f"Simulating {cfg.num_unitaries} settings x {cfg.shots_per_unitary} shots", 0)
            est = estimate_moments(rho, cfg, runner)
            rows = [(f"R2_{subset_label(key)}", analytic_R2(rho, key), est[key]) for key in ALL_SUBSETS_3]
        else:
            raise ValueError(f"Unknown state {state!r}; expected 'chessboard' or 'ghzw'")

        table = pd.DataFrame(
            [(name, exact, m.value, m.std_error, m.z_score(exact)) for name, exact, m in rows],
            columns=['quantity', 'exact', 'estimate', 'std_error', 'z_score'],
        )
        if state == 'chessboard':
            report = detect_bound_entanglement(rho, self.config.get('criteria.psd_tolerance', 1e-10))
            r2, r4 = table['estimate']
            bound = min_r4_given_r2(min(max(r2, 0.0), 1.0)).bound
            results.update({
                'bound_exact': report.bound.bound,
                'bound_at_estimate': bound,
                'margin_estimate': r4 - bound,
                'margin_z': (r4 - bound) / table['std_error'].iloc[1] if table['std_error'].iloc[1] > 0 else None,
            })
        self._update_progress("Moment estimation complete", 100)
        return ExperimentResult('estimate-moments', table, results, self._moments_plot(state, parameter), cfg.seed)

    @staticmethod
    def _moments_plot(state: str, parameter: float) -> PlotSpec:
        return PlotSpec(
            x='quantity', series=[PlotSeries('z_score', '(estimate - exact) / std error', style='o')],
            xlabel='moment', ylabel='z-score', title=f'Randomized moments of {state} at {parameter}',
            hlines=[-2.0, 0.0, 2.0],
        )

    # Tomography

    def run_tomography_roundtrip(self, p: float = 0.1291, replicas: Optional[int] = None) -> ExperimentResult:
        """Simulate tomography of rho_ch at noise p, reconstruct, and compare.

        The table holds the per-setting counts (readable with
        read_count_records); the scalar comparison goes to ``results``.
        """
        shots = self.config.get('chessboard_sweep.shots_per_setting', 900000)
        replicas = self.config.get('chessboard_sweep.bootstrap_replicas', 100) if replicas is None else replicas
        seed = self.config.get('protocol.seed')
        mle_args = self._mle_args()
        rng = np.random.default_rng(seed)
        ideal = noisy_chessboard(0.0)
        target = noisy_chessboard(p)

        self._update_progress(f"Simulating {shots} shots per setting at p = {p}", 0)
        reference = simulate_tomography_counts(ideal, shots, 0.0, rng)
        noisy = simulate_tomography_counts(ideal, shots, p, rng)

        self._update_progress("Maximum-likelihood reconstruction", 20)
        reconstruction = mle_reconstruct(noisy, **mle_args)
        rho_hat = reconstruction.rho_hat
        report = detect_bound_entanglement(rho_hat, self.config.get('criteria.psd_tolerance', 1e-10))

        self._update_progress(f"Bootstrapping {replicas} replicas", 40)
        boot = bootstrap_errorbars(
            noisy, replicas,
            lambda rho: [fidelity(rho, target), min_eigenvalue(partial_transpose(rho, 1))],
            seed=seed, runner=self._grid_runner(), **mle_args,
        )

        table = records_to_frame(noisy)
        table['expected'] = [r.count for r in expected_count_records(ideal, shots, p)]
        table.insert(0, 'setting', [r.setting.index for r in noisy])

        results = {
            'noise_injected': p,
            'noise_estimate': estimate_noise_from_records(noisy, reference),
            'fidelity': fidelity(rho_hat, target),
            'fidelity_err': float(boot.std[0]),
            'min_pt_eigenvalue': report.min_pt_eigenvalue,
            'min_pt_eigenvalue_err': float(boot.std[1]),
            'r2': report.r2,
            'r4': report.r4,
            'bound': report.bound.bound,
            'margin': report.margin,
            'purity': rho_hat.purity(),
            'mle_iterations': reconstruction.iterations,
            'mle_converged': reconstruction.converged,
            'log_likelihood': reconstruction.log_likelihood,
            'replicas': replicas,
        }
        self.logger.info(f"Tomography at p={p}: fidelity {results['fidelity']:.5f} "
                         f"+/- {results['fidelity_err']:.5f}, noise estimate {results['noise_estimate']:.4f}")
        plot = PlotSpec(
            x='setting',
            series=[PlotSeries('count', 'simulated counts', style='o'),
                    PlotSeries('expected', 'expected counts', style='-')],
            xlabel='setting index 9i + j', ylabel='counts', title=f'Tomography counts at p = {p}',
            hlines=[],
        )
        self._update_progress("Tomography round trip complete", 100)
        return ExperimentResult('tomography-roundtrip', table, results, plot, seed)

    # Fourth-moment bound

    def bound_values(self) -> np.ndarray:
        points = self.config.get('bound.grid_points', 21)
        values = np.concatenate([np.linspace(0.0, 1.0, points) if points > 1 else [],
                                 self.config.get('bound.r2_values', [])])
        return np.unique(np.round(values, 10))

    def run_bound(self, r2_values: Optional[Sequence[float]] = None,
                  cross_check: Optional[bool] = None) -> ExperimentResult:
        """Minimal R4 at fixed R2 over separable two-qutrit correlation spectra."""
        values = self.bound_values() if r2_values is None else np.asarray(r2_values, dtype=float)
        if values.size == 0:
            raise ValueError("No r2 values to evaluate")
        cross_check = self.config.get('bound.cross_check', True) if cross_check is None else cross_check
        self._update_progress(f"Fourth-moment bound at {values.size} values of r2", 0)

        def point(r2: float) -> Dict[str, Any]:
            result = min_r4_given_r2(r2)
            sigma = np.sort(result.optimal_singular_values)[::-1]
            row = {
                'r2': r2,
                'bound': result.bound,
                'sigma_max': float(sigma[0]),
                'sigma_min_nonzero': float(sigma[sigma > 1e-12].min()) if np.any(sigma > 1e-12) else 0.0,
                'num_nonzero': int(np.sum(sigma > 1e-12)),
            }
            if cross_check:
                numeric = min_r4_given_r2(r2, solver='numeric')
                row['bound_numeric'] = numeric.bound
                row['abs_diff'] = abs(numeric.bound - result.bound)
            return row

        rows = self._grid_runner().map_items(point, values.tolist(), label="r2 values")
        table = pd.DataFrame(rows)
        results = {'max_abs_diff': float(table['abs_diff'].max())} if cross_check else {}
        plot = PlotSpec(x='r2', series=[PlotSeries('bound', 'min R4 over separable states', style='-o')],
                        xlabel='R2', ylabel='R4 lower bound', title='Fourth-moment separability bound', hlines=[])
        self._update_progress("Bound evaluation complete", 100)
        return ExperimentResult('bound', table, results, plot, None)


def create_experiment_runner(progress_callback: Callable = None, config=None) -> ExperimentRunner:
    """Factory function to create an experiment runner."""
    return ExperimentRunner(config, progress_callback)
