import numpy as np
import pandas as pd
import pytest

from states import chessboard_state, ghz3, noisy_chessboard
from tensor_linalg import DensityMatrix, fidelity, min_eigenvalue, projector
from tomography import (CountRecord, TomographySetting, all_settings, bootstrap_errorbars,
                        computational_total_counts, estimate_noise_from_records, expected_count_records,
                        frame_to_records, linear_inversion, log_likelihood, measurement_projectors, mle_reconstruct,
                        noise_level_estimate, project_to_density_matrix, read_count_records, records_to_frame,
                        resample_records, simulate_tomography_counts, tomography_bases, write_count_records)


@pytest.fixture(scope="module")
def chessboard_counts():
    return expected_count_records(chessboard_state(), 1e6)


class TestSettings:
    def test_bases_normalized(self):
        kets = tomography_bases()
        assert kets.shape == (9, 3)
        np.testing.assert_allclose(np.linalg.norm(kets, axis=1), 1.0)

    def test_settings_span_operator_space(self):
        projectors = measurement_projectors(all_settings())
        gram = np.einsum('kij,lji->kl', projectors, projectors)
        assert np.linalg.matrix_rank(gram) == 81

    def test_projectors_sum_to_nine_identity(self):
        projectors = measurement_projectors(all_settings())
        np.testing.assert_allclose(projectors.sum(axis=0), 9 * np.eye(9), atol=1e-12)

    def test_all_settings(self):
        settings = all_settings()
        assert len(settings) == 81
        assert [s.index for s in settings] == list(range(81))
        assert sum(s.computational for s in settings) == 9

    @pytest.mark.parametrize("left,right", [(9, 0), (-1, 2), (1.5, 0)])
    def test_invalid_setting(self, left, right):
        with pytest.raises(ValueError):
            TomographySetting(left, right)

    def test_count_record_validation(self):
        setting = TomographySetting(0, 0)
        with pytest.raises(ValueError):
            CountRecord(setting, -1)
        with pytest.raises(ValueError):
            CountRecord(setting, 11, exposure=10.0)
        with pytest.raises(ValueError):
            CountRecord(setting, 0, exposure=0.0)


class TestSimulation:
    def test_counts_bounded_by_exposure(self, rng):
        records = simulate_tomography_counts(chessboard_state(), 1000, noise_p=0.2, rng=rng)
        assert len(records) == 81
        assert all(r.count <= r.exposure for r in records)
        assert records[0].exposure == pytest.approx(1250.0)

    def test_full_noise_rejected(self, rng):
        with pytest.raises(ValueError):
            simulate_tomography_counts(chessboard_state(), 1000, noise_p=1.0, rng=rng)

    def test_requires_qutrits(self, rng):
        with pytest.raises(ValueError):
            simulate_tomography_counts(projector(ghz3()), 1000, rng=rng)

    def test_seeded(self):
        a = simulate_tomography_counts(chessboard_state(), 500, rng=np.random.default_rng(3))
        b = simulate_tomography_counts(chessboard_state(), 500, rng=np.random.default_rng(3))
        assert [r.count for r in a] == [r.count for r in b]


class TestNoiseEstimate:
    def test_formula(self):
        assert noise_level_estimate(100, 80) == pytest.approx(0.2)

    def test_non_positive_rejected(self):
        with pytest.raises(ValueError):
            noise_level_estimate(0, 10)

    def test_from_simulated_counts(self):
        rng = np.random.default_rng(17)
        reference = simulate_tomography_counts(chessboard_state(), 100000, 0.0, rng)
        noisy = simulate_tomography_counts(chessboard_state(), 100000, 0.1291, rng)
        assert estimate_noise_from_records(noisy, reference) == pytest.approx(0.1291, abs=0.01)

    def test_computational_totals(self):
        records = expected_count_records(chessboard_state(), 1000)
        assert computational_total_counts(records) == pytest.approx(1000, abs=5)
        with pytest.raises(ValueError):
            computational_total_counts([r for r in records if not r.setting.computational])


class TestReconstruction:
    def test_linear_inversion(self, chessboard_counts):
        rho = linear_inversion(chessboard_counts)
        np.testing.assert_allclose(rho, chessboard_state().matrix, atol=1e-4)

    def test_linear_inversion_needs_complete_settings(self, chessboard_counts):
        with pytest.raises(ValueError, match="informationally complete"):
            linear_inversion([r for r in chessboard_counts if r.setting.computational])

    def test_mle_close_to_truth(self, chessboard_counts):
        result = mle_reconstruct(chessboard_counts)
        assert min_eigenvalue(result.rho_hat.matrix) >= -1e-10
        assert fidelity(result.rho_hat, chessboard_state()) >= 0.995

    def test_mle_exact_counts(self):
        records = expected_count_records(chessboard_state(), 1e12)
        result = mle_reconstruct(records)
        assert fidelity(result.rho_hat, chessboard_state()) >= 1 - 1e-8

    def test_mle_simulated_counts(self):
        # 9e5 signal events per setting record about 1e5 coincidences
        records = simulate_tomography_counts(chessboard_state(), 900000, rng=np.random.default_rng(11))
        result = mle_reconstruct(records)
        assert fidelity(result.rho_hat, chessboard_state()) >= 0.999

    def test_mle_noisy_state(self):
        records = simulate_tomography_counts(chessboard_state(), 900000, 0.1291, np.random.default_rng(5))
        rho = mle_reconstruct(records).rho_hat
        assert fidelity(rho, noisy_chessboard(0.1291)) >= 0.999

    @pytest.mark.slow
    def test_fidelity_improves_with_shots(self):
        mean_fidelity = []
        for shots in (900, 9000, 90000, 900000):
            values = [
                fidelity(mle_reconstruct(simulate_tomography_counts(chessboard_state(), shots,
                                                                     rng=np.random.default_rng([shots, i])),
                                         max_iter=3000, tol=1e-8).rho_hat, chessboard_state())
                for i in range(10)
            ]
            mean_fidelity.append(np.mean(values))
        assert np.all(np.diff(mean_fidelity) > 0)
        assert mean_fidelity[-1] >= 0.999

    def test_rhr_method(self, chessboard_counts):
        result = mle_reconstruct(chessboard_counts, max_iter=5000, method='rhr')
        assert np.all(np.diff(result.history) >= -1e-9)
        assert fidelity(result.rho_hat, chessboard_state()) >= 0.99

    def test_methods_agree(self, rng):
        records = simulate_tomography_counts(noisy_chessboard(0.2), 50000, rng=rng)
        apg = mle_reconstruct(records)
        rhr = mle_reconstruct(records, max_iter=20000, method='rhr')
        assert apg.log_likelihood >= rhr.log_likelihood - 1e-3
        assert fidelity(apg.rho_hat, rhr.rho_hat) >= 0.999

    def test_unknown_method(self, chessboard_counts):
        with pytest.raises(ValueError, match="method"):
            mle_reconstruct(chessboard_counts, method='newton')

    @pytest.mark.parametrize("method", ['apg', 'rhr'])
    def test_mle_needs_complete_settings(self, chessboard_counts, method):
        with pytest.raises(ValueError, match="informationally complete"):
            mle_reconstruct([r for r in chessboard_counts if r.setting.computational], method=method)

    def test_mle_likelihood_never_decreases(self, rng):
        records = simulate_tomography_counts(noisy_chessboard(0.1), 2000, rng=rng)
        result = mle_reconstruct(records, max_iter=200)
        assert np.all(np.diff(result.history) >= -1e-9)
        assert result.log_likelihood >= log_likelihood(np.eye(9) / 9, records)

    def test_mle_needs_exposures(self, chessboard_counts):
        stripped = [CountRecord(r.setting, r.count) for r in chessboard_counts]
        with pytest.raises(ValueError, match="exposure"):
            mle_reconstruct(stripped)

    def test_invalid_damping(self, chessboard_counts):
        with pytest.raises(ValueError):
            mle_reconstruct(chessboard_counts, damping=1.0)

    def test_empty_records(self):
        with pytest.raises(ValueError):
            mle_reconstruct([])


class TestProjection:
    def test_valid_state_unchanged(self):
        rho = noisy_chessboard(0.3).matrix
        np.testing.assert_allclose(project_to_density_matrix(rho), rho, atol=1e-12)

    def test_result_is_density_matrix(self, rng):
        a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
        rho = project_to_density_matrix(a + a.conj().T)
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(rho).min() >= -1e-12

    def test_negative_eigenvalues_clipped(self):
        rho = project_to_density_matrix(np.diag([0.7, 0.5, -0.2] + [0.0] * 6))
        np.testing.assert_allclose(np.diag(rho).real, [0.6, 0.4] + [0.0] * 7, atol=1e-12)


class TestBootstrap:
    def test_vector_statistic(self):
        records = expected_count_records(noisy_chessboard(0.05), 20000)
        result = bootstrap_errorbars(records, replicas=3, seed=2, max_iter=200,
                                     statistic=lambda rho: [np.trace(rho.matrix).real, rho.purity()])
        assert result.samples.shape == (3, 2)
        assert result.mean[0] == pytest.approx(1.0)
        assert np.all(result.std >= 0)

    def test_scalar_statistic(self):
        records = expected_count_records(noisy_chessboard(0.05), 20000)
        result = bootstrap_errorbars(records, replicas=2, seed=2, max_iter=100,
                                     statistic=lambda rho: rho.purity())
        assert isinstance(result.mean, float)
        assert 0 < result.mean <= 1

    def test_trace_statistic(self):
        records = expected_count_records(noisy_chessboard(0.05), 20000)
        result = bootstrap_errorbars(records, replicas=4, seed=1, max_iter=500)
        assert result.mean == pytest.approx(1.0, abs=1e-9)
        assert result.std < 1e-9

    def test_rhr_replicas(self):
        records = expected_count_records(noisy_chessboard(0.05), 20000)
        result = bootstrap_errorbars(records, replicas=2, seed=2, max_iter=200, method='rhr',
                                     statistic=lambda rho: rho.purity())
        assert 0 < result.mean <= 1

    @pytest.mark.slow
    def test_fidelity_errorbar(self):
        records = simulate_tomography_counts(chessboard_state(), 900000, rng=np.random.default_rng(21))
        point = fidelity(mle_reconstruct(records).rho_hat, chessboard_state())
        result = bootstrap_errorbars(records, replicas=100, seed=4,
                                     statistic=lambda rho: fidelity(rho, chessboard_state()))
        assert 1e-6 < result.std < 5e-3
        assert 0.995 < result.mean <= 1.0
        # replicas resample around the estimate, so their deficit is a small multiple of its own
        assert 1 - result.mean < 5 * (1 - point) + 5e-4

    def test_needs_two_replicas(self, chessboard_counts):
        with pytest.raises(ValueError):
            bootstrap_errorbars(chessboard_counts, replicas=1)

    def test_resample_deterministic(self, chessboard_counts):
        a = resample_records(chessboard_counts, np.random.default_rng(9))
        b = resample_records(chessboard_counts, np.random.default_rng(9))
        assert [r.count for r in a] == [r.count for r in b]
        assert all(r.count <= r.exposure for r in a)


class TestCountRecordFiles:
    def test_csv_round_trip(self, tmp_path, chessboard_counts):
        path = write_count_records(chessboard_counts, tmp_path / "counts.csv")
        loaded = read_count_records(path)
        assert [(r.setting, r.count, r.exposure) for r in loaded] == \
               [(r.setting, r.count, r.exposure) for r in chessboard_counts]

    def test_missing_column(self):
        df = records_to_frame(expected_count_records(chessboard_state(), 100)).drop(columns=['count'])
        with pytest.raises(ValueError, match="count"):
            frame_to_records(df)

    def test_exposure_optional(self):
        df = pd.DataFrame({'setting_left': [0], 'setting_right': [1], 'count': [5]})
        records = frame_to_records(df)
        assert records[0].exposure is None
        assert records[0].setting == TomographySetting(0, 1)


def test_reconstruction_is_valid_state(rng):
    records = simulate_tomography_counts(chessboard_state(), 5000, rng=rng)
    rho = mle_reconstruct(records, max_iter=300).rho_hat
    assert isinstance(rho, DensityMatrix)
    assert np.trace(rho.matrix).real == pytest.approx(1.0)
