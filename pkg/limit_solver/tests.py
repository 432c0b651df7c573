import numpy as np
from django.test import SimpleTestCase

from coefficients.coefficient_set import CoefficientSet, CoefficientSpectra
from coefficients.velocity import ShearSine, UniformVelocity
from dunes_project.exceptions import ParameterError, SingularSystemError
from spectral.fields import GridSpec, SpectralField2, SpectralField3, mode_index
from spectral.transforms import eval_on_grid, gradient_coeffs
from .system import (
    GaugeSpec, LimitSystem, apply_gauge, assemble, assemble_from_spectra, solve, solve_profile,
)


def smooth_hermitian(order, seed, decay=1.0):
    rng = np.random.default_rng(seed)
    width = 2 * order + 1
    raw = rng.normal(size=(width,) * 3) + 1j * rng.normal(size=(width,) * 3)
    k = mode_index(order, 3).reshape((width,) * 3 + (3,))
    raw *= np.exp(-decay * np.sum(np.abs(k), axis=-1))
    return SpectralField3(order, (raw + np.conj(np.flip(raw))) / 2, real_valued=True)


def spectra_for(a, source):
    zero = SpectralField3.zeros(a.order)
    return CoefficientSpectra(a, gradient_coeffs(a), (zero, zero), source)


class AssemblyTests(SimpleTestCase):

    def test_order_zero(self):
        system = assemble(CoefficientSet(ShearSine()), 1.0, 0)
        self.assertEqual(system.matrix.shape, (1, 1))
        self.assertLessEqual(abs(system.matrix[0, 0]), 1e-12)
        self.assertLessEqual(abs(system.rhs[0]), 1e-12)

    def test_pure_transport(self):
        order = 2
        zero = SpectralField3.zeros(order)
        system = assemble_from_spectra(spectra_for(zero, zero))
        l = mode_index(order, 3)[:, 0]
        np.testing.assert_array_equal(system.matrix, np.diag(2j * np.pi * l))
        self.assertFalse(np.any(system.rhs))

    def test_cached_operator_is_left_untouched(self):
        coefficients = CoefficientSet(ShearSine())
        spectra = coefficients.spectral_coefficients(1.0, 1)
        before = spectra.operator.copy()
        system = assemble(coefficients, 1.0, 1)
        np.testing.assert_array_equal(spectra.operator, before)
        l = mode_index(1, 3)[:, 0]
        np.testing.assert_array_equal(np.diag(system.matrix), -np.diag(before) + 2j * np.pi * l)

    def test_constant_diffusion_is_diagonal(self):
        order, alpha = 2, 0.5
        a = SpectralField3.delta(order, (0, 0, 0), alpha)
        system = assemble_from_spectra(spectra_for(a, SpectralField3.zeros(order)))
        modes = mode_index(order, 3)
        expected = 2j * np.pi * modes[:, 0] + 4 * np.pi ** 2 * alpha * (modes[:, 1] ** 2 + modes[:, 2] ** 2)
        np.testing.assert_allclose(np.diag(system.matrix), expected, rtol=1e-13)
        off_diagonal = system.matrix - np.diag(np.diag(system.matrix))
        self.assertLessEqual(np.max(np.abs(off_diagonal)), 1e-12 * np.max(np.abs(system.matrix)))

    def test_mean_mode_cancels(self):
        for order in (2, 4):
            a = smooth_hermitian(order, seed=order)
            source = smooth_hermitian(order, seed=10 + order)
            source = source.replace(coeffs=np.where(
                np.all(mode_index(order, 3) == 0, axis=1).reshape(source.coeffs.shape), 0, source.coeffs,
            ))
            system = assemble_from_spectra(spectra_for(a, source))
            center = system.mean_position
            scale = np.max(np.abs(system.matrix))
            self.assertLessEqual(np.max(np.abs(system.matrix[center, :])), 1e-10 * scale)
            self.assertLessEqual(np.max(np.abs(system.matrix[:, center])), 1e-12 * scale)
            self.assertLessEqual(abs(system.rhs[center]), 1e-8)

    def test_mean_mode_cancels_for_sampled_coefficients(self):
        system = assemble(CoefficientSet(ShearSine()), 1.0, 2)
        center = system.mean_position
        scale = np.max(np.abs(system.matrix))
        self.assertLessEqual(np.max(np.abs(system.matrix[center, :])), 1e-10 * scale)
        self.assertEqual(system.rhs[center], 0)

    def test_negative_order(self):
        with self.assertRaises(ParameterError):
            assemble(CoefficientSet(ShearSine()), 1.0, -1)


class GaugeTests(SimpleTestCase):

    def test_gauge_replaces_only_the_mean_row(self):
        a = smooth_hermitian(1, seed=3)
        system = assemble_from_spectra(spectra_for(a, SpectralField3.zeros(1)))
        gauged = apply_gauge(system, GaugeSpec(2.0))
        center = system.mean_position
        self.assertEqual(gauged.rhs[center], 2.0)
        self.assertEqual(np.count_nonzero(gauged.matrix[center]), 1)
        rows = np.arange(len(system.rhs)) != center
        np.testing.assert_array_equal(gauged.matrix[rows], system.matrix[rows])
        self.assertFalse(system.gauged)

    def test_order_zero_gauge(self):
        solution = solve(apply_gauge(assemble(CoefficientSet(ShearSine()), 1.0, 0), GaugeSpec(0.0)))
        self.assertEqual(solution.profile.coefficient(0, 0, 0), 0)

    def test_gauge_shift_moves_only_the_mean(self):
        a = smooth_hermitian(2, seed=4, decay=2.0)
        a = a.replace(coeffs=a.coeffs + np.where(np.all(mode_index(2, 3) == 0, axis=1), 3.0, 0).reshape(a.coeffs.shape))
        source = smooth_hermitian(2, seed=5)
        source = source.replace(coeffs=source.coeffs * (np.abs(mode_index(2, 3)).sum(axis=1) > 0).reshape(source.coeffs.shape))
        system = assemble_from_spectra(spectra_for(a, source))
        base = solve(apply_gauge(system, GaugeSpec(0.0))).profile
        shifted = solve(apply_gauge(system, GaugeSpec(0.7))).profile
        difference = shifted.coeffs - base.coeffs
        self.assertAlmostEqual(difference[2, 2, 2], 0.7, places=10)
        difference[2, 2, 2] = 0
        self.assertLessEqual(np.max(np.abs(difference)), 1e-10)

    def test_gauge_from_initial_mean(self):
        coeffs = np.zeros((5, 5))
        coeffs[3, 2] = coeffs[1, 2] = 0.5
        coeffs[2, 4] = coeffs[2, 0] = 0.5
        self.assertEqual(GaugeSpec.from_initial(SpectralField2(2, coeffs)).mean_value, 0)
        coeffs[2, 2] = 1.5
        self.assertEqual(GaugeSpec.from_initial(SpectralField2(2, coeffs)).mean_value, 1.5)


class SolveTests(SimpleTestCase):

    def test_analytic_diagonal_solution(self):
        order = 2
        for alpha in (0.5, 1.0, 2.0):
            for mode in [(1, 0, 0), (0, 1, -2), (-2, 2, 1)]:
                gamma = 0.3 - 0.2j
                a = SpectralField3.delta(order, (0, 0, 0), alpha)
                source = SpectralField3.delta(order, mode, gamma)
                result = solve(apply_gauge(assemble_from_spectra(spectra_for(a, source)), GaugeSpec(0.0)))
                l, m, n = mode
                expected = gamma / (2j * np.pi * l + 4 * np.pi ** 2 * alpha * (m ** 2 + n ** 2))
                got = result.profile.coefficient(*mode)
                self.assertLessEqual(abs(got - expected), 1e-10 * abs(expected))
                rest = result.profile.flat().copy()
                rest[np.ravel_multi_index(tuple(k + order for k in mode), (5, 5, 5))] = 0
                self.assertLessEqual(np.max(np.abs(rest)), 1e-14)

    def test_homogeneous_problem_gives_zero(self):
        a = smooth_hermitian(2, seed=6)
        a = a.replace(coeffs=a.coeffs + 2.0 * (np.abs(mode_index(2, 3)).sum(axis=1) == 0).reshape(a.coeffs.shape))
        result = solve(apply_gauge(assemble_from_spectra(spectra_for(a, SpectralField3.zeros(2))), GaugeSpec(0.0)))
        self.assertFalse(np.any(result.profile.coeffs))
        self.assertEqual(result.diagnostics.residual, 0.0)

    def test_singular_pivot_is_named(self):
        zero = SpectralField3.zeros(1)
        system = apply_gauge(assemble_from_spectra(spectra_for(zero, zero)), GaugeSpec(0.0))
        with self.assertRaises(SingularSystemError) as caught:
            solve(system)
        self.assertEqual(caught.exception.mode, (0, -1, -1))
        self.assertEqual((caught.exception.mode.l, caught.exception.mode.m), (0, -1))
        self.assertIn('Mode3(l=0, m=-1, n=-1)', str(caught.exception))

    def test_ungauged_system_rejected(self):
        system = LimitSystem(0, 0.0, np.zeros((1, 1), dtype=complex), np.zeros(1, dtype=complex))
        with self.assertRaises(ParameterError):
            solve(system)

    def test_shear_sine_profile_is_real(self):
        result = solve_profile(CoefficientSet(ShearSine()), 1.0, 4, GaugeSpec(0.0))
        self.assertLessEqual(result.profile.hermitian_defect(), 1e-9)
        self.assertTrue(result.profile.real_valued)
        self.assertLessEqual(result.diagnostics.residual, 1e-9)
        raw = eval_on_grid(result.profile, GridSpec(32), theta=0.3, keep_complex=True).values
        self.assertLessEqual(np.max(np.abs(raw.imag)), 1e-9 * np.max(np.abs(raw)))
        self.assertIn('residual=', result.diagnostics.comments()[0])

    def test_order_zero_profile_is_gauge(self):
        result = solve_profile(CoefficientSet(ShearSine()), 1.0, 0, GaugeSpec(0.25))
        self.assertEqual(result.profile.coefficient(0, 0, 0), 0.25)

    def test_constant_velocity_profile_is_constant(self):
        result = solve_profile(CoefficientSet(UniformVelocity(1.0, 0.5)), 0.0, 2, GaugeSpec(-0.4))
        self.assertAlmostEqual(result.profile.coefficient(0, 0, 0), -0.4)
        rest = result.profile.flat().copy()
        rest[len(rest) // 2] = 0
        self.assertLessEqual(np.max(np.abs(rest)), 1e-12)
