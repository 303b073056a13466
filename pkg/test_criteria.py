import numpy as np
import pytest

from bloch import correlation_matrix, sector_lengths
from criteria import (STRONG_BISEP_LABEL, CriterionResult, criterion_a3, criterion_roots, criterion_strong_bisep,
                      de_vicente_criterion, de_vicente_value, detect_bound_entanglement, min_r4_given_r2,
                      two_value_grid_search)
from states import chessboard_state, ghz3, max_entangled_qutrits, noisy_chessboard
from tensor_linalg import projector


class TestCriterionResult:
    def test_greater_direction(self):
        result = CriterionResult('x', 4.0, 3.0, '>', 0.5, 'GME')
        assert result.margin == pytest.approx(1.0)
        assert result.violated
        assert result.z_score == pytest.approx(2.0)
        assert not result.significant(3.0)
        assert result.verdict() == 'violated (below significance)'
        assert result.verdict(sigma=1.0) == 'GME'

    def test_less_direction(self):
        result = CriterionResult('x', 0.01, 0.03, '<')
        assert result.margin == pytest.approx(0.02)
        assert result.z_score == np.inf
        assert result.verdict() == 'violated'

    def test_not_violated(self):
        result = CriterionResult('x', 2.0, 3.0)
        assert not result.violated
        assert result.verdict() == 'not violated'

    def test_invalid(self):
        with pytest.raises(ValueError):
            CriterionResult('x', 1.0, 0.0, '>=')
        with pytest.raises(ValueError):
            CriterionResult('x', 1.0, 0.0, std_error=-1.0)


class TestSectorLengthCriteria:
    def test_ghz(self):
        a1, a2, a3 = sector_lengths(projector(ghz3()))
        assert criterion_strong_bisep(a1, a2, a3).value == pytest.approx(4.0)
        assert criterion_a3(a3).margin == pytest.approx(1.0)
        assert criterion_a3(a3).label == 'GME'

    def test_error_propagation(self):
        result = criterion_strong_bisep(0.1, 3.0, 4.0, errs=(0.01, 0.02, 0.02))
        assert result.std_error == pytest.approx(np.sqrt(9e-4 + 4e-4 + 4e-4))
        assert result.label == STRONG_BISEP_LABEL

    def test_roots(self):
        roots = criterion_roots()
        assert roots.strong_bisep == pytest.approx((0.297, 0.612), abs=2e-3)
        assert roots.a3 == pytest.approx((0.10173, 0.85479), abs=1e-4)
        assert roots.concurrence == pytest.approx(0.292, abs=2e-3)
        assert roots.tangle == pytest.approx(0.627)


class TestDeVicente:
    def test_max_entangled(self):
        T = correlation_matrix(projector(max_entangled_qutrits()))
        assert de_vicente_value(T, 3) == pytest.approx(8.0)
        assert de_vicente_criterion(T, 3).violated

    def test_maximally_mixed_not_violated(self):
        assert not de_vicente_criterion(correlation_matrix(noisy_chessboard(1.0)), 3).violated

    def test_wrong_shape(self):
        with pytest.raises(ValueError):
            de_vicente_value(np.eye(3), 3)


class TestFourthMomentBound:
    def test_reference_value(self):
        assert min_r4_given_r2(0.2355).bound == pytest.approx(0.0277, abs=5e-4)

    def test_zero(self):
        bound = min_r4_given_r2(0.0)
        assert bound.bound == pytest.approx(0.0)
        assert bound.is_feasible()

    def test_uniform_region(self):
        # eight equal singular values stay feasible up to r2 = 1/8
        s = 0.4
        assert min_r4_given_r2(0.1).bound == pytest.approx(s ** 2 * 5 / 12 / 16)

    def test_pure_product_endpoint(self):
        bound = min_r4_given_r2(1.0)
        assert bound.bound == pytest.approx(1.0)
        assert bound.optimal_singular_values[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("r2", [-0.1, 1.5, np.nan])
    def test_infeasible(self, r2):
        with pytest.raises(ValueError):
            min_r4_given_r2(r2)

    def test_unknown_solver(self):
        with pytest.raises(ValueError):
            min_r4_given_r2(0.2, solver='newton')

    def test_monotone(self):
        values = [min_r4_given_r2(r2).bound for r2 in np.linspace(0, 1, 41)]
        assert np.all(np.diff(values) >= -1e-12)

    @pytest.mark.parametrize("r2", np.round(np.linspace(0.0, 0.9, 20), 4))
    def test_enumeration_matches_numeric(self, r2):
        enumerated = min_r4_given_r2(r2)
        numeric = min_r4_given_r2(r2, solver='numeric')
        assert enumerated.is_feasible()
        assert numeric.bound == pytest.approx(enumerated.bound, abs=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("r2", np.round(np.linspace(0.0, 0.99, 100), 4))
    def test_enumeration_matches_numeric_dense(self, r2):
        assert min_r4_given_r2(r2, solver='numeric').bound == pytest.approx(min_r4_given_r2(r2).bound, abs=1e-6)

    @pytest.mark.parametrize("r2", [0.05, 0.2355, 0.5, 0.8])
    def test_grid_search_never_below(self, r2):
        grid = two_value_grid_search(r2)
        assert grid.bound >= min_r4_given_r2(r2).bound - 1e-9
        assert grid.bound == pytest.approx(min_r4_given_r2(r2).bound, abs=1e-3)

    def test_qubit_dimension(self):
        bound = min_r4_given_r2(0.5, d=2)
        assert bound.is_feasible()
        assert len(bound.optimal_singular_values) == 3


class TestBoundEntanglement:
    def test_chessboard_detected(self):
        report = detect_bound_entanglement(chessboard_state())
        assert report.ppt
        assert report.moment_violating
        assert report.bound_entangled_evidence
        assert report.margin < 0
        assert report.criterion().violated

    def test_noisy_chessboard_still_detected(self):
        assert detect_bound_entanglement(noisy_chessboard(0.1291)).bound_entangled_evidence

    def test_maximally_mixed_not_detected(self):
        report = detect_bound_entanglement(noisy_chessboard(1.0))
        assert report.ppt
        assert not report.moment_violating

    def test_max_entangled_is_npt_with_excess(self):
        report = detect_bound_entanglement(projector(max_entangled_qutrits()))
        assert not report.ppt
        assert report.second_moment_excess
        assert report.de_vicente == pytest.approx(8.0)
        assert not report.bound_entangled_evidence

    def test_requires_two_equal_qudits(self):
        with pytest.raises(ValueError):
            detect_bound_entanglement(projector(ghz3()))
