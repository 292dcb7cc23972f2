"""Lattice model: jump-operator algebra, dark states, semiclassics, band check."""

import numpy as np
import pytest

from omlat.array_model import (
    ArrayParams,
    SemiclassicalState,
    appendixA_transformation_check,
    condensate_residual,
    integrate_semiclassical,
    lattice_jump_ops,
    momentum_dark_state_check,
    relative_phases,
    run_phase_locking,
    semiclassical_rhs,
    single_particle_residual,
    substitute_adiabatic,
)


class TestParams:
    def test_minimum_size(self):
        with pytest.raises(ValueError):
            ArrayParams(L=1)

    def test_odd_ring_rejected(self):
        with pytest.raises(ValueError, match="even"):
            ArrayParams(L=5)


class TestJumpOperators:
    def test_reduced_coefficient_pattern(self):
        # odd family: (2chi+1) n_0, -n_1, -(1+chi) a0†a1, +a1†a0, -chi a0†a_{-1}
        chi = 0.37
        p = ArrayParams(L=4, E=0.5, Delta=-2.0, chi=chi)
        k_odd, k_even = lattice_jump_ops(p, reduced=True, stripped=True)
        want_odd = {
            (("a", "+", 0), ("a", "-", 0)): 2 * chi + 1,
            (("a", "+", 1), ("a", "-", 1)): -1.0,
            (("a", "+", 0), ("a", "-", 1)): -(1 + chi),
            (("a", "+", 1), ("a", "-", 0)): 1.0,
            (("a", "+", 0), ("a", "-", -1)): -chi,
        }
        got = k_odd.coefficients()
        assert set(got) == set(want_odd)
        for key, val in want_odd.items():
            assert abs(got[key] - val) < 1e-15
        want_even = {
            (("a", "+", 0), ("a", "-", 0)): 1.0,
            (("a", "+", 1), ("a", "-", 1)): -(2 * chi + 1),
            (("a", "+", 1), ("a", "-", 0)): chi + 1,
            (("a", "+", 0), ("a", "-", 1)): -1.0,
            (("a", "+", 1), ("a", "-", 2)): chi,
        }
        got_even = k_even.coefficients()
        assert set(got_even) == set(want_even)
        for key, val in want_even.items():
            assert abs(got_even[key] - val) < 1e-15

    def test_adiabatic_substitution_reproduces_reduced_ops(self):
        # operator identity on coefficient lists, for several chi values
        for chi in (0.0, 0.5, 1.3):
            p = ArrayParams(L=6, E=0.7, Delta=-3.0, chi=chi)
            full_ops = lattice_jump_ops(p, reduced=False)
            red_ops = lattice_jump_ops(p, reduced=True)
            for full, red in zip(full_ops, red_ops):
                got = substitute_adiabatic(full, p).coefficients()
                want = red.coefficients()
                assert set(got) == set(want)
                for key in want:
                    assert abs(got[key] - want[key]) < 1e-14

    def test_dagger_roundtrip(self):
        p = ArrayParams(L=4, chi=0.2)
        op = lattice_jump_ops(p, reduced=True)[0]
        back = op.dagger().dagger()
        assert back.coefficients() == op.coefficients()


class TestDarkStates:
    def test_zero_momentum_exactly_dark(self):
        for L in (2, 4, 6):
            p = ArrayParams(L=L, E=0.3, Delta=-5.0, chi=0.4)
            assert single_particle_residual(p, 0) <= 1e-12
            for n in (2, 3):
                assert condensate_residual(p, n) <= 1e-12

    def test_edge_of_zone_not_dark(self):
        p = ArrayParams(L=4, E=0.3, Delta=-5.0)
        assert single_particle_residual(p, 2) > 1e-3  # k = pi

    def test_residual_proportional_to_bloch_factor(self):
        # at chi = 0 the brute-force residual is exactly proportional to
        # |e^{ik} - 1| across the grid
        L = 6
        p = ArrayParams(L=L, E=0.3, Delta=-5.0, chi=0.0)
        ratios = []
        for k_index in range(1, L):
            k = 2 * np.pi * k_index / L
            res = single_particle_residual(p, k_index)
            ratios.append(res / abs(np.exp(1j * k) - 1))
        assert max(ratios) / min(ratios) - 1 < 1e-10

    def test_momentum_space_formula_oracle(self):
        # independent oracle: per-channel norm from the quasimomentum form,
        # residual = |E/Delta| |e^{ik}-1| sqrt(sum_q |bracket(q,k)|^2) / L
        L = 6
        for chi in (0.0, 0.25, 1.0):
            p = ArrayParams(L=L, E=0.3, Delta=-5.0, chi=chi)
            qs = 2 * np.pi * np.arange(L) / L
            for k_index in (1, 2, 3):
                k = 2 * np.pi * k_index / L
                br_odd = np.exp(1j * (k + qs)) * (1 + chi) + np.exp(1j * k) - np.exp(1j * qs) * chi
                br_even = 1 + chi - np.exp(1j * k) * chi + np.exp(1j * qs) * chi
                pred = max(
                    np.linalg.norm(np.abs(br) * abs(np.exp(1j * k) - 1)) / L
                    for br in (br_odd, br_even)
                ) * abs(p.E / p.Delta)
                assert abs(single_particle_residual(p, k_index) - pred) < 1e-14

    def test_two_site_symmetric_state_dark(self):
        # L = 2, chi = 0: reduced channels have the (a_s†)(a_a) structure
        p = ArrayParams(L=2, E=0.3, Delta=-5.0, chi=0.0)
        assert momentum_dark_state_check(p, 0, n_photons=1) <= 1e-14
        assert momentum_dark_state_check(p, 0, n_photons=3) <= 1e-13

    def test_multiphoton_finite_momentum_rejected(self):
        p = ArrayParams(L=4)
        with pytest.raises(ValueError):
            momentum_dark_state_check(p, 1, n_photons=2)


class TestSemiclassical:
    def test_homogeneous_state_is_fixed_point(self):
        p = ArrayParams(L=6, E=0.4, Delta=-8.0, chi=0.3)
        alpha = 0.8 * np.exp(0.3j) * np.ones(6)
        c = np.zeros(6, dtype=complex)
        da, dc = semiclassical_rhs(p, alpha, c)
        assert np.max(np.abs(da)) == 0.0
        assert np.max(np.abs(dc)) == 0.0

    def test_free_rotation_without_drive_or_damping(self):
        p = ArrayParams(L=4, E=0.0, Delta=-3.0, Gamma_tilde=0.0)
        rng = np.random.default_rng(0)
        alpha0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        c0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        t, alphas, cs = integrate_semiclassical(
            p, SemiclassicalState(alpha0, c0), dt=1e-3, t_final=2.0, output_stride=2000)
        np.testing.assert_allclose(alphas[-1], alpha0, atol=1e-10)
        np.testing.assert_allclose(cs[-1], c0 * np.exp(1j * p.Delta * 2.0), atol=1e-8)

    def test_norm_conserved(self):
        p = ArrayParams(L=6, E=0.3, Delta=-10.0, chi=0.2)
        rng = np.random.default_rng(1)
        state = SemiclassicalState(np.exp(1j * rng.uniform(-np.pi, np.pi, 6)),
                                   np.zeros(6, dtype=complex))
        n0 = state.norm
        t, alphas, cs = integrate_semiclassical(p, state, dt=5e-3, t_final=20.0,
                                                output_stride=400)
        n_end = np.sum(np.abs(alphas[-1]) ** 2) + np.sum(np.abs(cs[-1]) ** 2)
        assert abs(n_end / n0 - 1) < 1e-8

    def test_drift_conserves_norm_instantaneously(self):
        p = ArrayParams(L=8, E=0.5, Delta=-4.0, chi=0.7)
        rng = np.random.default_rng(2)
        alpha = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        c = 0.3 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
        da, dc = semiclassical_rhs(p, alpha, c)
        ndot = 2 * np.real(np.sum(np.conj(alpha) * da) + np.sum(np.conj(c) * dc))
        assert abs(ndot) < 1e-12 * (np.sum(np.abs(alpha) ** 2) + np.sum(np.abs(c) ** 2))

    def test_phase_locking_seeding_deterministic(self):
        p = ArrayParams(L=4, E=0.2, Delta=-10.0)
        t1, a1, _, ph1 = run_phase_locking(p, rng_seed=7, t_final=1.0, dt=0.01)
        t2, a2, _, ph2 = run_phase_locking(p, rng_seed=7, t_final=1.0, dt=0.01)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(ph1, ph2)


class TestRelativePhases:
    def test_uniform_is_zero(self):
        phi = relative_phases(np.ones(5, dtype=complex))
        np.testing.assert_allclose(phi, 0.0, atol=0)

    def test_constant_gradient(self):
        ell = np.arange(12)
        alpha = np.exp(1j * np.pi * ell / 6)
        phi = relative_phases(alpha)
        np.testing.assert_allclose(phi, -np.pi / 6, atol=1e-12)

    def test_winding_identity(self):
        rng = np.random.default_rng(3)
        alpha = np.exp(1j * rng.uniform(-np.pi, np.pi, 9))
        total = np.sum(relative_phases(alpha))
        assert abs((total + np.pi) % (2 * np.pi) - np.pi) < 1e-10

    def test_zero_amplitude_flagged(self):
        alpha = np.array([1.0, 0.0, 1.0], dtype=complex)
        phi = relative_phases(alpha)
        assert np.isnan(phi[0]) and np.isnan(phi[1]) and not np.isnan(phi[2])


class TestAppendixA:
    def test_zero_hopping_is_exact(self):
        orth, off = appendixA_transformation_check(0.0, L=2)
        assert orth == 0.0 and off == 0.0

    def test_small_hopping_defects(self):
        orth, off = appendixA_transformation_check(0.01, L=2)
        assert orth <= 3e-4
        assert off <= 3e-4

    def test_quadratic_scaling(self):
        for L in (2, 4):
            o1, f1 = appendixA_transformation_check(0.02, L=L)
            o2, f2 = appendixA_transformation_check(0.04, L=L)
            assert 3.2 <= o2 / o1 <= 4.8
            assert 3.2 <= f2 / f1 <= 4.8
