"""Fock-space layer: ladder algebra, displacement, thermal states, rotations."""

import numpy as np
import pytest
import scipy.linalg

from omlat.fock import (
    DensityMatrix,
    FockOperator,
    LayoutError,
    ModeLayout,
    basis_ket,
    displacement,
    eig_hermitian,
    expm_pade6,
    identity,
    lowering,
    mode_rotation_symm_antisymm,
    number,
    partial_trace,
    raising,
    thermal_state,
    vacuum_ket,
)


def single_mode(n_max=5, name="a"):
    return ModeLayout((name,), (n_max,))


class TestLayout:
    def test_dimension(self):
        lay = ModeLayout(("a1", "a2", "c"), (4, 4, 2))
        assert lay.dim == 5 * 5 * 3
        assert lay.dims == (5, 5, 3)

    def test_duplicate_names_rejected(self):
        with pytest.raises(LayoutError):
            ModeLayout(("a", "a"), (2, 2))

    def test_unknown_mode_rejected(self):
        with pytest.raises(LayoutError):
            lowering(single_mode(), "b")


class TestLadder:
    def test_lowering_matrix_element(self):
        # a|3> = sqrt(3)|2>
        lay = single_mode(5)
        a = lowering(lay, "a")
        out = a.mat @ basis_ket(lay, (3,))
        expected = np.sqrt(3) * basis_ket(lay, (2,))
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_vacuum_annihilation(self):
        lay = single_mode(5)
        a = lowering(lay, "a")
        assert np.linalg.norm(a.mat @ vacuum_ket(lay)) == 0.0

    def test_commutator_on_truncated_space(self):
        # [a, a+] equals the identity except for the -n_max entry in the top
        # corner; checked by direct matrix commutator.
        n_max = 7
        lay = single_mode(n_max)
        a = lowering(lay, "a").mat
        comm = a @ a.conj().T - a.conj().T @ a
        expected = np.eye(n_max + 1, dtype=complex)
        expected[n_max, n_max] = -n_max
        np.testing.assert_allclose(comm, expected, atol=1e-13)

    def test_number_operator(self):
        lay = single_mode(6)
        n = number(lay, "a")
        np.testing.assert_allclose(np.diag(n.mat), np.arange(7), atol=0)

    def test_tensor_product_consistency(self):
        # (A x 1)(1 x B) = A x B elementwise
        lay = ModeLayout(("a", "b"), (3, 2))
        a = lowering(lay, "a").mat
        b = raising(lay, "b").mat
        a_local = np.diag(np.sqrt(np.arange(1, 4, dtype=float)), 1)
        b_local = np.diag(np.sqrt(np.arange(1, 3, dtype=float)), 1).T
        np.testing.assert_allclose(a @ b, np.kron(a_local, b_local), atol=1e-14)


class TestExpm:
    def test_against_scipy(self):
        rng = np.random.default_rng(7)
        for dim in (2, 6, 17):
            m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            np.testing.assert_allclose(expm_pade6(m), scipy.linalg.expm(m),
                                       rtol=1e-11, atol=1e-11)

    def test_zero_matrix(self):
        np.testing.assert_allclose(expm_pade6(np.zeros((4, 4))), np.eye(4), atol=0)


class TestDisplacement:
    def test_zero_is_identity(self):
        lay = single_mode(8)
        np.testing.assert_allclose(displacement(lay, "a", 0.0).mat, np.eye(9), atol=1e-14)

    def test_coherent_state_mean(self):
        lay = single_mode(10)
        d = displacement(lay, "a", 0.5)
        ket = d.mat @ vacuum_ket(lay)
        n_mean = np.real(ket.conj() @ number(lay, "a").mat @ ket)
        assert abs(n_mean - 0.25) < 1e-6

    def test_inverse_product(self):
        lay = single_mode(10)
        prod = displacement(lay, "a", 0.5) @ displacement(lay, "a", -0.5)
        assert np.max(np.abs(prod.mat - np.eye(11))) < 1e-8

    def test_shifts_lowering_operator(self):
        lay = single_mode(24)
        alpha = 0.4 + 0.3j
        d = displacement(lay, "a", alpha)
        a = lowering(lay, "a").mat
        shifted = d.mat.conj().T @ a @ d.mat
        # D(-alpha) a D(alpha) = a + alpha away from the truncation edge
        defect = np.abs(shifted - (a + alpha * np.eye(25)))[:12, :12]
        assert np.max(defect) < 1e-8

    def test_unitarity_within_safe_region(self):
        lay = single_mode(12)
        for alpha in (0.3, 1.0j, 1.2 - 0.9j):
            assert abs(alpha) ** 2 <= 12 / 4
            d = displacement(lay, "a", alpha).mat
            assert np.max(np.abs(d @ d.conj().T - np.eye(13))) <= 1e-6

    def test_warns_beyond_truncation_heuristic(self):
        lay = single_mode(4)
        with pytest.warns(UserWarning, match="truncation-limited"):
            displacement(lay, "a", 2.0)


class TestThermal:
    def test_zero_occupation_is_vacuum(self):
        lay = single_mode(5)
        rho = thermal_state(lay, {"a": 0.0})
        expected = np.zeros((6, 6))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(rho.mat, expected, atol=0)

    def test_geometric_weights(self):
        # untruncated law p_n = nbar^n/(nbar+1)^(n+1); nbar = 1 gives 1/2, 1/4
        lay = single_mode(30)
        rho = thermal_state(lay, {"a": 1.0})
        p = np.real(np.diag(rho.mat))
        renorm = 1.0 - 0.5 ** 31
        assert abs(p[0] - 0.5 / renorm) < 1e-12
        assert abs(p[1] - 0.25 / renorm) < 1e-12

    def test_unit_trace_exact(self):
        lay = ModeLayout(("a", "b"), (6, 4))
        rho = thermal_state(lay, {"a": 0.7, "b": 2.0})
        assert abs(np.trace(rho.mat) - 1.0) < 1e-14

    def test_g2_of_truncated_thermal(self):
        # g2(0) -> 2 within 2 percent at nbar = 1, n_max = 20.  Oracle:
        # direct moment sums over the truncated geometric weights.
        n_max, nbar = 20, 1.0
        n = np.arange(n_max + 1)
        p = nbar ** n / (nbar + 1) ** (n + 1)
        p /= p.sum()
        g2_oracle = (p * n * (n - 1)).sum() / (p * n).sum() ** 2

        lay = single_mode(n_max)
        rho = thermal_state(lay, {"a": nbar})
        a = lowering(lay, "a").mat
        ad = a.conj().T
        nbar_num = np.real(np.trace(ad @ a @ rho.mat))
        g2_num = np.real(np.trace(ad @ ad @ a @ a @ rho.mat)) / nbar_num ** 2
        assert abs(g2_num - g2_oracle) < 1e-12
        assert abs(g2_num - 2.0) < 0.02 * 2.0

    def test_negative_occupation_rejected(self):
        with pytest.raises(ValueError):
            thermal_state(single_mode(4), {"a": -0.1})


class TestRotation:
    def lay(self, n_max=4):
        return ModeLayout(("a1", "a2"), (n_max, n_max))

    def test_single_photon_splits(self):
        lay = self.lay()
        w = mode_rotation_symm_antisymm(lay, "a1", "a2").mat
        out = w @ basis_ket(lay, (1, 0))
        expected = (basis_ket(lay, (1, 0)) + basis_ket(lay, (0, 1))) / np.sqrt(2)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_vacuum_fixed(self):
        lay = self.lay()
        w = mode_rotation_symm_antisymm(lay, "a1", "a2").mat
        np.testing.assert_allclose(w @ vacuum_ket(lay), vacuum_ket(lay), atol=1e-12)

    def test_conjugation_gives_symmetric_mode(self):
        # exact on photon-number-complete sectors (total occupation <= cutoff);
        # the beam splitter conserves total photon number, so higher sectors
        # are truncation-distorted by construction
        lay = self.lay(5)
        w = mode_rotation_symm_antisymm(lay, "a1", "a2").mat
        a1 = lowering(lay, "a1").mat
        a2 = lowering(lay, "a2").mat
        a_s = (a1 + a2) / np.sqrt(2)
        diff = w @ a1 @ w.conj().T - a_s
        total = np.add.outer(np.arange(6), np.arange(6)).ravel()
        safe = total <= 5
        assert np.max(np.abs(diff[np.ix_(safe, safe)])) < 1e-9

    def test_symmetric_photon_maps_to_slot_one(self):
        lay = self.lay(5)
        w = mode_rotation_symm_antisymm(lay, "a1", "a2").mat
        ket_s = (basis_ket(lay, (1, 0)) + basis_ket(lay, (0, 1))) / np.sqrt(2)
        np.testing.assert_allclose(w @ ket_s, basis_ket(lay, (1, 0)), atol=1e-12)
        ket_a = (basis_ket(lay, (1, 0)) - basis_ket(lay, (0, 1))) / np.sqrt(2)
        np.testing.assert_allclose(w @ ket_a, basis_ket(lay, (0, 1)), atol=1e-12)

    def test_unitary(self):
        lay = self.lay(5)
        w = mode_rotation_symm_antisymm(lay, "a1", "a2").mat
        assert np.max(np.abs(w @ w.conj().T - np.eye(lay.dim))) < 1e-9

    def test_cutoff_mismatch_rejected(self):
        lay = ModeLayout(("a1", "a2"), (3, 4))
        with pytest.raises(LayoutError):
            mode_rotation_symm_antisymm(lay, "a1", "a2")


class TestEig:
    def test_identity(self):
        lay = ModeLayout(("a",), (3,))
        w, _ = eig_hermitian(identity(lay))
        np.testing.assert_allclose(w, np.ones(4), atol=1e-14)

    def test_diagonal(self):
        lay = ModeLayout(("a",), (1,))
        op = FockOperator(lay, np.diag([0.25, 0.75]).astype(complex))
        w, _ = eig_hermitian(op)
        np.testing.assert_allclose(w, [0.25, 0.75], atol=1e-14)

    def test_random_hermitian_orthonormal_and_reconstructs(self):
        rng = np.random.default_rng(3)
        lay = ModeLayout(("a",), (19,))
        m = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
        h = (m + m.conj().T) / 2
        w, v = eig_hermitian(FockOperator(lay, h))
        assert np.max(np.abs(v.conj().T @ v - np.eye(20))) < 1e-9
        assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) < 1e-8
        assert np.all(np.diff(w) >= 0)

    def test_non_hermitian_rejected(self):
        lay = ModeLayout(("a",), (4,))
        with pytest.raises(ValueError):
            eig_hermitian(lowering(lay, "a"))

    def test_density_matrix_eigenvalues_sum_to_one(self):
        lay = ModeLayout(("a", "b"), (4, 3))
        rho = thermal_state(lay, {"a": 0.8, "b": 0.3})
        w, _ = eig_hermitian(rho.operator)
        assert abs(w.sum() - 1.0) < 1e-8


class TestPartialTrace:
    def test_product_state_factor(self):
        lay = ModeLayout(("a", "b"), (3, 2))
        rho = thermal_state(lay, {"a": 0.5, "b": 1.2})
        red = partial_trace(rho, ("a",))
        expected = thermal_state(ModeLayout(("a",), (3,)), {"a": 0.5})
        np.testing.assert_allclose(red.mat, expected.mat, atol=1e-12)

    def test_entangled_pair_reduces_to_mixed(self):
        lay = ModeLayout(("a", "b"), (1, 1))
        ket = (basis_ket(lay, (0, 0)) + basis_ket(lay, (1, 1))) / np.sqrt(2)
        red = partial_trace(DensityMatrix.from_ket(lay, ket), ("a",))
        np.testing.assert_allclose(red.mat, np.eye(2) / 2, atol=1e-12)

    def test_trace_preserved_on_random_state(self):
        rng = np.random.default_rng(11)
        lay = ModeLayout(("a", "b", "c"), (2, 2, 1))
        m = rng.standard_normal((lay.dim, lay.dim)) + 1j * rng.standard_normal((lay.dim, lay.dim))
        rho_m = m @ m.conj().T
        rho_m /= np.trace(rho_m)
        rho = DensityMatrix.from_matrix(lay, rho_m)
        red = partial_trace(rho, ("b", "c"))
        assert abs(np.trace(red.mat) - 1.0) < 1e-12
        assert red.layout.names == ("b", "c")

    def test_middle_mode_kept(self):
        lay = ModeLayout(("a", "b", "c"), (1, 2, 1))
        rho = thermal_state(lay, {"a": 0.2, "b": 0.9, "c": 0.1})
        red = partial_trace(rho, ("b",))
        expected = thermal_state(ModeLayout(("b",), (2,)), {"b": 0.9})
        np.testing.assert_allclose(red.mat, expected.mat, atol=1e-12)

    def test_empty_keep_rejected(self):
        lay = ModeLayout(("a", "b"), (1, 1))
        rho = thermal_state(lay, {})
        with pytest.raises(LayoutError):
            partial_trace(rho, ())


class TestDensityMatrix:
    def test_trace_validation(self):
        lay = ModeLayout(("a",), (2,))
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix.from_matrix(lay, np.diag([0.5, 0.3, 0.1]).astype(complex))

    def test_hermiticity_validation(self):
        lay = ModeLayout(("a",), (1,))
        m = np.array([[0.5, 0.2], [0.0, 0.5]], dtype=complex)
        with pytest.raises(ValueError, match="Hermiticity"):
            DensityMatrix.from_matrix(lay, m)

    def test_positivity_validation(self):
        lay = ModeLayout(("a",), (1,))
        m = np.diag([1.2, -0.2]).astype(complex)
        with pytest.raises(ValueError, match="eigenvalue"):
            DensityMatrix.from_matrix(lay, m)

    def test_small_negativity_tolerated_and_reported(self):
        lay = ModeLayout(("a",), (1,))
        m = np.diag([1.0 + 1e-9, -1e-9]).astype(complex)
        rho = DensityMatrix.from_matrix(lay, m)
        assert -1e-7 < rho.min_eigenvalue < 0
