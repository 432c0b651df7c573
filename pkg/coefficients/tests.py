import threading

import numpy as np
from django.test import SimpleTestCase

from dunes_project.exceptions import ConfigError, InvalidSampleError, ParameterError
from spectral.transforms import dft_coefficients, divergence_form_matrix, gradient_coeffs
from .coefficient_set import LIMIT_CACHE_SIZE, PHYSICAL_EPSILON, CoefficientSet
from .expressions import compile_expression
from .hypotheses import check_hypotheses
from .laws import BedloadLaws, get_laws
from .velocity import CustomVelocity, ShearSine, TidalPiecewise, UniformVelocity, WaterHeight, eval_U


class VelocityTests(SimpleTestCase):

    def test_shear_sine_peak(self):
        np.testing.assert_allclose(eval_U(ShearSine(), 1.0, 0.25, (0.5, 0.3)), [1.0, 0.0], atol=1e-15)

    def test_tidal_slack_before_flood(self):
        np.testing.assert_array_equal(eval_U(TidalPiecewise(1.0), 0.0, 0.1, (0.2, 0.7)), [0.0, 0.0])

    def test_tidal_flood_ramp(self):
        np.testing.assert_allclose(eval_U(TidalPiecewise(1.0), 0.0, 0.25, (0.2, 0.7)), [0.0, 0.5], atol=1e-14)

    def test_tidal_plateau_bump(self):
        velocity = TidalPiecewise(2.0)
        t, x1 = 3.0, 0.125
        amplitude = 1 + np.sin(np.pi * t / 30)
        u = eval_U(velocity, t, 0.35, (x1, 0.0))
        self.assertAlmostEqual(u[0], 0.25 * amplitude * 0.1 * (1 + np.sin(2 * np.pi * x1)), places=12)
        self.assertAlmostEqual(u[1], 2.0 + 0.25 * amplitude * 2.0, places=12)

    def test_tidal_is_continuous_at_breakpoints(self):
        velocity = TidalPiecewise(1.0)
        for breakpoint in velocity.breakpoints:
            below = eval_U(velocity, 0.5, breakpoint - 1e-9, (0.3, 0.1))
            above = eval_U(velocity, 0.5, breakpoint + 1e-9, (0.3, 0.1))
            self.assertLess(np.max(np.abs(below - above)), 1e-7, msg=f'jump at theta={breakpoint}')

    def test_tidal_ebb_is_negative(self):
        self.assertLess(eval_U(TidalPiecewise(1.0), 0.0, 0.75, (0.0, 0.0))[1], -1.0)

    def test_theta_reduced_mod_one(self):
        velocity = TidalPiecewise(1.0)
        np.testing.assert_allclose(eval_U(velocity, 0.0, 1.25, (0.2, 0.7)), eval_U(velocity, 0.0, 0.25, (0.2, 0.7)))

    def test_non_positive_threshold(self):
        with self.assertRaises(ParameterError):
            TidalPiecewise(0.0)

    def test_custom_non_finite_sample(self):
        velocity = CustomVelocity(lambda t, th, x1, x2: (1.0 / (x1 - 0.5), 0 * x2))
        with self.assertRaises(InvalidSampleError) as caught:
            velocity(0.0, 0.0, np.array([0.25, 0.5]), np.array([0.0, 0.0]))
        self.assertEqual(caught.exception.point, (0.0, 0.0, 0.5, 0.0))

    def test_custom_from_expressions(self):
        velocity = CustomVelocity.from_expressions('cos(2*pi*theta)', 'x1 + t')
        np.testing.assert_allclose(eval_U(velocity, 1.0, 0.5, (0.25, 0.0)), [-1.0, 1.25])


class ExpressionTests(SimpleTestCase):

    def test_broadcasts_constants(self):
        f = compile_expression('2.5', ('x1', 'x2'))
        self.assertEqual(f(np.zeros((3, 3)), np.zeros((3, 3))).shape, (3, 3))

    def test_rejects_unknown_names(self):
        with self.assertRaises(ConfigError):
            compile_expression('__import__("os")', ('x1',))
        with self.assertRaises(ConfigError):
            compile_expression('y + 1', ('x1',))

    def test_rejects_attribute_access(self):
        with self.assertRaises(ConfigError):
            compile_expression('x1.real', ('x1',))

    def test_syntax_error(self):
        with self.assertRaises(ConfigError):
            compile_expression('sin(', ('x1',))


class LawTests(SimpleTestCase):

    def test_cubic_builtin(self):
        laws = get_laws('cubic')
        self.assertEqual((laws.a, laws.b, laws.c), (1.0, 0.0, 1.0))
        self.assertEqual(float(laws.g_a(2.0)), 8.0)

    def test_unknown_law(self):
        with self.assertRaises(ConfigError):
            get_laws('quadratic')

    def test_constants_validated(self):
        with self.assertRaises(ParameterError):
            BedloadLaws.cubic(a=0.0)
        with self.assertRaises(ParameterError):
            BedloadLaws.cubic(b=-1.0)


def uniform_set(u1, u2, **kwargs):
    return CoefficientSet(UniformVelocity(u1, u2), **kwargs)


class CountingVelocity:

    def __init__(self, velocity):
        self.velocity = velocity
        self.calls = 0

    def __call__(self, *args):
        self.calls += 1
        return self.velocity(*args)

    def describe(self):
        return self.velocity.describe()


class PointwiseCoefficientTests(SimpleTestCase):

    def test_a_tilde(self):
        self.assertEqual(float(uniform_set(1.0, 0.0).eval_A_tilde(0.0, 0.0, 0.1, 0.2)), 1.0)
        self.assertEqual(float(uniform_set(0.0, 0.0).eval_A_tilde(0.0, 0.0, 0.1, 0.2)), 0.0)
        self.assertEqual(float(uniform_set(0.0, -2.0).eval_A_tilde(0.0, 0.0, 0.1, 0.2)), 8.0)

    def test_c_tilde(self):
        for (u1, u2), expected in [((0.0, 0.0), (0.0, 0.0)), ((1.0, 0.0), (1.0, 0.0)), ((0.0, -2.0), (0.0, -8.0))]:
            c1, c2 = uniform_set(u1, u2).eval_C_tilde(0.0, 0.0, 0.1, 0.2)
            self.assertEqual((float(c1), float(c2)), expected)

    def test_c_tilde_bounded_by_law(self):
        coefficients = CoefficientSet(ShearSine())
        theta, x1 = np.meshgrid(np.linspace(0, 1, 41), np.linspace(0, 1, 41), indexing='ij')
        c1, c2 = coefficients.eval_C_tilde(0.0, theta, x1, 0.0)
        speed = np.abs(np.sin(np.pi * x1) * np.sin(2 * np.pi * theta))
        self.assertTrue(np.all(np.hypot(c1, c2) <= speed ** 3 * (1 + 1e-12) + 1e-300))

    def test_first_order_terms(self):
        self.assertEqual(uniform_set(1.0, 0.0).eval_A1_C1(0.0, 0.0, 0.0, 0.0)[0], 0.0)
        no_b = uniform_set(1.0, 0.0, height=WaterHeight.constant(1.0))
        self.assertEqual(float(no_b.eval_A1_C1(0.0, 0.0, 0.0, 0.0)[0]), 0.0)
        full = uniform_set(1.0, 0.0, laws=BedloadLaws.cubic(b=1.0), height=WaterHeight.constant(1.0))
        a1, (k1, k2) = full.eval_A1_C1(0.0, 0.0, 0.0, 0.0)
        self.assertEqual((float(a1), float(k1), float(k2)), (-1.0, -1.0, 0.0))

    def test_oscillating_coefficient_uses_fast_phase(self):
        coefficients = CoefficientSet(ShearSine())
        epsilon = 0.01
        self.assertAlmostEqual(float(coefficients.eval_A_eps(epsilon, epsilon * 0.25, 0.5, 0.1)), 1.0, places=12)
        self.assertAlmostEqual(
            float(coefficients.eval_A_eps(0.5, 0.75, 0.3, 0.1)),
            float(coefficients.eval_A_tilde(0.75, 0.5, 0.3, 0.1)),
            places=15,
        )

    def test_still_water_has_no_correction(self):
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        x1, x2 = np.meshgrid(np.linspace(0, 1, 8), np.linspace(0, 1, 8), indexing='ij')
        t, epsilon = 0.37, 0.03
        np.testing.assert_array_equal(
            coefficients.eval_A_eps(epsilon, t, x1, x2),
            coefficients.eval_A_tilde(t, np.mod(t / epsilon, 1.0), x1, x2),
        )

    def test_correction_scales_with_epsilon(self):
        coefficients = uniform_set(1.0, 0.0, laws=BedloadLaws.cubic(b=1.0), height=WaterHeight.constant(1.0))
        self.assertAlmostEqual(float(coefficients.eval_A_eps(0.1, 0.0, 0.0, 0.0)), 0.9)
        self.assertAlmostEqual(float(coefficients.eval_C_eps(0.1, 0.0, 0.0, 0.0)[0]), 0.9)

    def test_epsilon_must_be_positive(self):
        with self.assertRaises(ParameterError):
            uniform_set(1.0, 0.0).eval_A_eps(0.0, 1.0, 0.0, 0.0)

    def test_periodic_in_theta(self):
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        x1, x2 = np.meshgrid(np.linspace(0, 1, 8), np.linspace(0, 1, 8), indexing='ij')
        for theta in (0.05, 0.35, 0.62, 0.77):
            np.testing.assert_allclose(
                coefficients.eval_A_tilde(0.4, theta, x1, x2),
                coefficients.eval_A_tilde(0.4, theta + 1.0, x1, x2),
                atol=1e-12,
            )

    def test_physical_epsilon(self):
        self.assertEqual(PHYSICAL_EPSILON, 0.005)


class SpectralCoefficientTests(SimpleTestCase):

    def test_constant_velocity(self):
        spectra = uniform_set(1.0, 0.0).spectral_coefficients(0.0, 2)
        self.assertAlmostEqual(spectra.a.coefficient(0, 0, 0), 1.0, places=14)
        rest = spectra.a.flat().copy()
        rest[len(rest) // 2] = 0
        self.assertLess(np.max(np.abs(rest)), 1e-14)
        self.assertLess(np.max(np.abs(spectra.div_c.coeffs)), 1e-12)

    def test_divergence_has_zero_mean(self):
        spectra = CoefficientSet(ShearSine()).spectral_coefficients(1.0, 3)
        scale = max(np.max(np.abs(c.coeffs)) for c in spectra.c)
        self.assertLessEqual(abs(spectra.div_c.coefficient(0, 0, 0)), 1e-12 * scale)

    def test_gradient_relation_is_exact(self):
        spectra = CoefficientSet(TidalPiecewise(1.0)).spectral_coefficients(0.5, 2)
        for cached, direct in zip(spectra.a_grad, gradient_coeffs(spectra.a)):
            np.testing.assert_array_equal(cached.coeffs, direct.coeffs)

    def test_divergence_mode_by_mode(self):
        spectra = CoefficientSet(TidalPiecewise(1.0)).spectral_coefficients(0.5, 2)
        k = np.arange(-2, 3)
        m, n = k[None, :, None], k[None, None, :]
        expected = 2j * np.pi * (m * spectra.c[0].coeffs + n * spectra.c[1].coeffs)
        np.testing.assert_array_equal(spectra.div_c.coeffs, expected)

    def test_matches_direct_dft(self):
        coefficients = CoefficientSet(ShearSine())
        direct = dft_coefficients(lambda th, x1, x2: coefficients.eval_A_tilde(1.0, th, x1, x2), 3)
        np.testing.assert_array_equal(coefficients.spectral_coefficients(1.0, 3).a.coeffs, direct.coeffs)

    def test_cache_regenerates_identically(self):
        coefficients = CoefficientSet(ShearSine())
        first = coefficients.spectral_coefficients(1.0, 2, 32)
        self.assertIs(coefficients.spectral_coefficients(1.0, 2, 32), first)
        coefficients.clear_cache()
        again = coefficients.spectral_coefficients(1.0, 2, 32)
        self.assertIsNot(again, first)
        np.testing.assert_array_equal(again.a.coeffs, first.a.coeffs)

    def test_concurrent_readers_share_one_result(self):
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        results = []
        workers = [
            threading.Thread(target=lambda: results.append(coefficients.spectral_coefficients(0.25, 2, 16)))
            for _ in range(4)
        ]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()
        self.assertEqual(len({id(r) for r in results}), 1)

    def test_reference_spectra_follow_fast_phase(self):
        coefficients = CoefficientSet(ShearSine())
        epsilon, t = 0.1, 0.325
        spectra = coefficients.reference_spectra(epsilon, t, 2)
        sliced = dft_coefficients(
            lambda x1, x2: coefficients.eval_A_tilde(t, np.mod(t / epsilon, 1.0), x1, x2), 2, ndim=2,
        )
        np.testing.assert_allclose(spectra.a.coeffs, sliced.coeffs, atol=1e-15)
        self.assertEqual(spectra.div_c.coefficient(0, 0), 0)

    def test_one_velocity_evaluation_per_spectrum(self):
        velocity = CountingVelocity(TidalPiecewise(1.0))
        coefficients = CoefficientSet(velocity, laws=BedloadLaws.cubic(b=1.0), height=WaterHeight.constant(0.5))
        coefficients.reference_spectra(0.1, 0.3, 2)
        self.assertEqual(velocity.calls, 1)
        coefficients.spectral_coefficients(0.3, 2)
        self.assertEqual(velocity.calls, 2)

    def test_joint_sampler_matches_separate_samplers(self):
        coefficients = CoefficientSet(ShearSine(), laws=BedloadLaws.cubic(b=0.5), height=WaterHeight.constant(0.4))
        epsilon, t = 0.05, 0.42
        spectra = coefficients.reference_spectra(epsilon, t, 3)
        theta = np.mod(t / epsilon, 1.0)

        def a_eps(x1, x2):
            return coefficients.eval_A_tilde(t, theta, x1, x2) + epsilon * coefficients.eval_A1_C1(t, theta, x1, x2)[0]

        def c_eps(x1, x2):
            c1, c2 = coefficients.eval_C_tilde(t, theta, x1, x2)
            _, (k1, k2) = coefficients.eval_A1_C1(t, theta, x1, x2)
            return c1 + epsilon * k1, c2 + epsilon * k2

        np.testing.assert_allclose(spectra.a.coeffs, dft_coefficients(a_eps, 3, ndim=2).coeffs, atol=1e-14)
        for joint, separate in zip(spectra.c, dft_coefficients(c_eps, 3, ndim=2)):
            np.testing.assert_allclose(joint.coeffs, separate.coeffs, atol=1e-14)

    def test_operator_is_built_once(self):
        spectra = CoefficientSet(TidalPiecewise(1.0)).reference_spectra(0.1, 0.3, 2)
        self.assertIs(spectra.operator, spectra.operator)
        self.assertEqual(spectra.operator.shape, (25, 25))
        np.testing.assert_array_equal(spectra.operator, divergence_form_matrix(spectra.a, spectra.a_grad))

    def test_limit_cache_is_bounded(self):
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        first = coefficients.spectral_coefficients(0.0, 1, 8)
        for step in range(1, LIMIT_CACHE_SIZE + 5):
            coefficients.spectral_coefficients(step / 100, 1, 8)
        self.assertEqual(len(coefficients._limit_cache), LIMIT_CACHE_SIZE)
        self.assertEqual(coefficients._key_locks, {})
        self.assertIsNot(coefficients.spectral_coefficients(0.0, 1, 8), first)

    def test_recent_limit_entries_survive(self):
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        kept = coefficients.spectral_coefficients(0.0, 1, 8)
        for step in range(1, LIMIT_CACHE_SIZE + 5):
            coefficients.spectral_coefficients(step / 100, 1, 8)
            self.assertIs(coefficients.spectral_coefficients(0.0, 1, 8), kept)

    def test_max_a_tilde(self):
        self.assertAlmostEqual(CoefficientSet(ShearSine()).max_a_tilde([0.0, 1.0], density=32), 1.0, places=12)
        self.assertAlmostEqual(uniform_set(0.0, -2.0).max_a_tilde([0.0]), 8.0)


class HypothesisTests(SimpleTestCase):

    def test_cubic_law_is_unbounded(self):
        report = check_hypotheses(CoefficientSet(TidalPiecewise(1.0)))
        self.assertTrue(report.violated('g-bounded'))
        self.assertFalse(report.violated('g-order'))

    def test_shear_sine(self):
        report = check_hypotheses(CoefficientSet(ShearSine()))
        self.assertFalse(report.violated('periodicity'))
        self.assertEqual(report.a_tilde_inf, 0.0)
        self.assertTrue(report.violated('diffusion-lower-bound'))
        self.assertFalse(report.passed)

    def test_tidal_periodicity_and_window(self):
        report = check_hypotheses(CoefficientSet(TidalPiecewise(1.0)), sample_density=20)
        self.assertLessEqual(report.periodicity_defect, 1e-12)
        self.assertFalse(report.violated('periodicity'))
        self.assertFalse(report.violated('still-water'))
        self.assertEqual(report.u_thr_used, 1.0)
        self.assertIsNotNone(report.threshold_window)
        self.assertGreaterEqual(report.g_thr_estimate, 1.0)

    def test_density_floor(self):
        with self.assertRaises(ParameterError):
            check_hypotheses(CoefficientSet(ShearSine()), sample_density=8)

    def test_text_lists_violations(self):
        text = check_hypotheses(CoefficientSet(ShearSine())).as_text()
        self.assertIn('diffusion-lower-bound', text)
        self.assertTrue(text.startswith('d_estimate '))
