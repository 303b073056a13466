import numpy as np
import pytest

from bloch import (PauliCoefficients, bloch_decompose, correlation_matrix, gell_mann_basis, pauli_coeffs,
                   rho_from_pauli, sector_lengths, sector_lengths_from_pauli)
from invariants import ghzw_sector_polynomials, moments_from_T
from rm_protocol import haar_unitary
from states import chessboard_state, ghz3, ghzw_mix
from tensor_linalg import DensityMatrix, PureState, kron_all, projector, singular_values


class TestPauliCoefficients:
    def test_maximally_mixed(self):
        alpha = pauli_coeffs(DensityMatrix.maximally_mixed((2, 2, 2))).alpha
        assert alpha[0, 0, 0] == pytest.approx(1.0)
        assert np.abs(alpha).sum() == pytest.approx(1.0)

    def test_ghz(self):
        alpha = pauli_coeffs(projector(ghz3())).alpha
        for index in ((3, 3, 0), (3, 0, 3), (0, 3, 3), (1, 1, 1)):
            assert alpha[index] == pytest.approx(1.0)

    def test_round_trip(self, random_qubit_states):
        for rho in random_qubit_states:
            np.testing.assert_allclose(rho_from_pauli(pauli_coeffs(rho)).matrix, rho.matrix, atol=1e-10)

    def test_wrong_shape(self):
        with pytest.raises(ValueError):
            pauli_coeffs(chessboard_state())

    def test_invalid_trace_coefficient(self):
        with pytest.raises(ValueError):
            PauliCoefficients(np.zeros((4, 4, 4)))


class TestSectorLengths:
    def test_ghz(self):
        np.testing.assert_allclose(sector_lengths(projector(ghz3())), (0.0, 3.0, 4.0), atol=1e-12)

    def test_maximally_mixed(self):
        np.testing.assert_allclose(sector_lengths(DensityMatrix.maximally_mixed((2, 2, 2))), 0.0, atol=1e-14)

    def test_ghzw_polynomials(self):
        for g in np.round(np.arange(0, 1.0001, 0.01), 10):
            np.testing.assert_allclose(sector_lengths(ghzw_mix(g)), ghzw_sector_polynomials(g), atol=1e-10)

    def test_purity_identity(self, random_qubit_states):
        for rho in random_qubit_states:
            a1, a2, a3 = sector_lengths_from_pauli(pauli_coeffs(rho))
            assert 1 + a1 + a2 + a3 == pytest.approx(8 * rho.purity(), abs=1e-9)

    def test_local_unitary_invariance(self, random_qubit_states, rng):
        rho = random_qubit_states[0]
        u = kron_all([haar_unitary(2, rng) for _ in range(3)])
        np.testing.assert_allclose(sector_lengths(rho.evolve(u)), sector_lengths(rho), atol=1e-9)


class TestGellMann:
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_orthogonality(self, d):
        lam = gell_mann_basis(d).lambdas
        assert len(lam) == d * d - 1
        gram = np.einsum('iab,jba->ij', lam, lam)
        np.testing.assert_allclose(gram, d * np.eye(d * d - 1), atol=1e-12)
        np.testing.assert_allclose(np.trace(lam, axis1=1, axis2=2), 0, atol=1e-12)

    def test_qubit_case_is_pauli(self):
        lam = gell_mann_basis(2).lambdas
        np.testing.assert_allclose(lam[0], [[0, 1], [1, 0]])
        np.testing.assert_allclose(lam[1], [[0, -1j], [1j, 0]])
        np.testing.assert_allclose(lam[2], [[1, 0], [0, -1]])

    def test_components_reconstruct(self, rng):
        basis = gell_mann_basis(3)
        state = DensityMatrix(np.eye(3) / 3, (3,))
        np.testing.assert_allclose(basis.components(state.matrix), 0, atol=1e-14)
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        h = g + g.conj().T
        h -= np.trace(h) / 3 * np.eye(3)
        x = basis.components(h)
        np.testing.assert_allclose(np.einsum('i,iab->ab', x, basis.lambdas), h, atol=1e-12)

    def test_invalid_dimension(self):
        with pytest.raises(ValueError):
            gell_mann_basis(1)


class TestBlochDecomposition:
    def test_maximally_mixed(self):
        decomposition = bloch_decompose(DensityMatrix.maximally_mixed((3, 3)))
        np.testing.assert_allclose(decomposition.alpha, 0, atol=1e-14)
        np.testing.assert_allclose(decomposition.beta, 0, atol=1e-14)
        np.testing.assert_allclose(decomposition.T, 0, atol=1e-14)

    def test_product_state_trace_norm(self):
        T = correlation_matrix(projector(PureState.basis((0, 0), (3, 3))))
        assert np.sum(singular_values(T)) == pytest.approx(2.0)

    def test_reconstruct_and_purity(self, random_qutrit_states):
        for rho in random_qutrit_states:
            decomposition = bloch_decompose(rho)
            np.testing.assert_allclose(decomposition.reconstruct().matrix, rho.matrix, atol=1e-10)
            assert decomposition.purity() == pytest.approx(rho.purity(), abs=1e-9)

    def test_chessboard_frobenius_matches_moment(self):
        T = correlation_matrix(chessboard_state())
        assert np.sum(T ** 2) == pytest.approx(4 * moments_from_T(T, 3).r2)

    def test_singular_values_local_unitary_invariant(self, random_qutrit_states, rng):
        rho = random_qutrit_states[0]
        u = kron_all([haar_unitary(3, rng), haar_unitary(3, rng)])
        np.testing.assert_allclose(singular_values(correlation_matrix(rho.evolve(u))),
                                   singular_values(correlation_matrix(rho)), atol=1e-9)

    def test_wrong_shape(self):
        with pytest.raises(ValueError):
            bloch_decompose(ghzw_mix(0.5))
