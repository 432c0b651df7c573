import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from coefficients.coefficient_set import CoefficientSet
from coefficients.velocity import ShearSine, TidalPiecewise, UniformVelocity
from dunes_project.exceptions import DivergenceError, IntegrationFailure, ParameterError
from limit_solver.system import GaugeSpec, solve_profile
from spectral.fields import GridSpec, SpectralField2
from spectral.snapshots import load_snapshot
from spectral.transforms import eval_on_grid, gradient_coeffs, laplacian_coeffs, slice_theta, truncated_convolve
from .integrator import DormandPrince, IntegratorConfig, StepController, hermite
from .solver import (
    Constant, CosineCombo, ReferenceState, WellPrepared, integrate, project_initial, rhs,
)


def random_state(order, seed, epsilon=0.1):
    rng = np.random.default_rng(seed)
    width = 2 * order + 1
    raw = rng.normal(size=(width, width)) + 1j * rng.normal(size=(width, width))
    return ReferenceState(0.3, SpectralField2(order, (raw + np.conj(np.flip(raw))) / 2, real_valued=True), epsilon)


class InitialConditionTests(SimpleTestCase):

    def test_cosine_combo(self):
        z0 = project_initial(CosineCombo((1, 2)), 3)
        for mode in [(1, 0), (-1, 0), (2, 0), (-2, 0)]:
            self.assertEqual(z0.coefficient(*mode), 0.5)
        self.assertEqual(np.count_nonzero(z0.coeffs), 4)
        self.assertEqual(z0.coefficient(0, 0), 0)

    def test_constant(self):
        z0 = project_initial(7.0, 2)
        self.assertEqual(z0.coefficient(0, 0), 7.0)
        self.assertEqual(np.count_nonzero(z0.coeffs), 1)

    def test_sampler_matches_combo(self):
        sampled = project_initial(lambda x1, x2: np.cos(2 * np.pi * x1) + np.cos(4 * np.pi * x1) + 0 * x2, 3)
        np.testing.assert_allclose(sampled.coeffs, project_initial(CosineCombo(), 3).coeffs, atol=1e-14)

    def test_well_prepared_is_theta_zero_slice(self):
        coefficients = CoefficientSet(ShearSine())
        z0 = project_initial(WellPrepared(coefficients, GaugeSpec(0.0)), 4)
        profile = solve_profile(coefficients, 0.0, 4, GaugeSpec(0.0)).profile
        grid = GridSpec(32)
        expected = eval_on_grid(profile, grid, theta=0.0, keep_complex=True).values
        got = eval_on_grid(z0, grid, keep_complex=True).values
        self.assertLessEqual(np.max(np.abs(got - expected)), 1e-12 * max(1.0, np.max(np.abs(expected))))
        np.testing.assert_allclose(z0.coeffs, slice_theta(profile, 0.0).coeffs, rtol=0, atol=1e-13)


class RightHandSideTests(SimpleTestCase):

    def test_constant_diffusion_is_diagonal(self):
        epsilon = 0.1
        coefficients = CoefficientSet(UniformVelocity(1.0, 0.0))
        state = random_state(2, seed=1, epsilon=epsilon)
        derivative = rhs(state, coefficients)
        k = np.arange(-2, 3)
        decay = -4 * np.pi ** 2 * (k[:, None] ** 2 + k[None, :] ** 2) / epsilon
        np.testing.assert_allclose(derivative.coeffs, decay * state.z.coeffs, atol=1e-11)

    def test_zero_state_without_source(self):
        coefficients = CoefficientSet(UniformVelocity(0.0, 0.0))
        state = ReferenceState(0.0, SpectralField2.zeros(2), 0.1)
        self.assertFalse(np.any(rhs(state, coefficients).coeffs))

    def test_mean_mode_derivative_cancels(self):
        coefficients = CoefficientSet(ShearSine())
        for seed in range(3):
            derivative = rhs(random_state(4, seed=seed, epsilon=0.05), coefficients)
            scale = np.max(np.abs(derivative.coeffs))
            self.assertLessEqual(abs(derivative.coefficient(0, 0)), 1e-12 * scale)

    def test_matches_convolution_form(self):
        epsilon = 0.05
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        state = random_state(3, seed=4, epsilon=epsilon)
        spectra = coefficients.reference_spectra(epsilon, state.t, 3)
        z_x, z_y = gradient_coeffs(state.z)
        grad_x, grad_y = spectra.a_grad
        expected = (
            truncated_convolve(grad_x, z_x).coeffs + truncated_convolve(grad_y, z_y).coeffs
            + truncated_convolve(spectra.a, laplacian_coeffs(state.z)).coeffs + spectra.div_c.coeffs
        ) / epsilon
        scale = np.max(np.abs(expected))
        np.testing.assert_allclose(rhs(state, coefficients).coeffs, expected, rtol=0, atol=1e-12 * scale)

    def test_operator_reused_across_calls(self):
        coefficients = CoefficientSet(ShearSine())
        state = random_state(2, seed=5)
        rhs(state, coefficients)
        operator = coefficients.reference_spectra(state.epsilon, state.t, 2).operator
        rhs(state, coefficients)
        self.assertIs(coefficients.reference_spectra(state.epsilon, state.t, 2).operator, operator)

    def test_epsilon_must_be_positive(self):
        with self.assertRaises(ParameterError):
            ReferenceState(0.0, SpectralField2.zeros(1), 0.0)


class IntegratorTests(SimpleTestCase):

    def test_scalar_decay(self):
        integrator = DormandPrince(lambda t, y: -y, IntegratorConfig(rtol=1e-10, atol=1e-12))
        samples, statistics = integrator.integrate(0.0, np.array([1.0 + 0j]), 1.0, output_times=[0.5])
        self.assertEqual([t for t, _ in samples], [0.0, 0.5, 1.0])
        self.assertAlmostEqual(samples[-1][1][0].real, np.exp(-1.0), places=9)
        self.assertAlmostEqual(samples[1][1][0].real, np.exp(-0.5), places=6)
        self.assertGreater(statistics.accepted, 0)

    def test_terminal_time_hit_exactly(self):
        integrator = DormandPrince(lambda t, y: 1j * y)
        samples, _ = integrator.integrate(0.0, np.array([1.0 + 0j]), 0.3)
        self.assertEqual(samples[-1][0], 0.3)

    def test_stability_cap_bounds_steps(self):
        integrator = DormandPrince(lambda t, y: np.zeros_like(y), stability_cap=0.01)
        _, statistics = integrator.integrate(0.0, np.zeros(3, dtype=complex), 1.0)
        self.assertLessEqual(statistics.h_max, 0.01 * (1 + 1e-9))
        self.assertGreaterEqual(statistics.accepted, 100)

    def test_step_budget(self):
        integrator = DormandPrince(lambda t, y: -y, IntegratorConfig(max_steps=3), stability_cap=1e-3)
        with self.assertRaises(IntegrationFailure) as caught:
            integrator.integrate(0.0, np.array([1.0 + 0j]), 1.0)
        self.assertEqual(caught.exception.statistics.accepted, 3)
        self.assertIsNotNone(caught.exception.state)

    def test_non_finite_state(self):
        integrator = DormandPrince(lambda t, y: y * np.inf, IntegratorConfig(h_init=0.1))
        with self.assertRaises(DivergenceError):
            integrator.integrate(0.0, np.array([1.0 + 0j]), 1.0)

    def test_rejected_step_does_not_grow(self):
        controller = StepController()
        self.assertLess(controller.reject(4.0), 1.0)
        self.assertLessEqual(controller.accept(1e-6), 1.0)
        self.assertGreater(controller.accept(1e-6), 1.0)

    def test_hermite_reproduces_cubics(self):
        poly = lambda t: 2 * t ** 3 - t + 1
        slope = lambda t: 6 * t ** 2 - 1
        value = hermite(0.2, poly(0.2), slope(0.2), 0.9, poly(0.9), slope(0.9), 0.55)
        self.assertAlmostEqual(value, poly(0.55), places=12)

    def test_bad_configuration(self):
        with self.assertRaises(ParameterError):
            IntegratorConfig(rtol=0.0)
        with self.assertRaises(ParameterError):
            IntegratorConfig(h_max=-1.0)


class TrajectoryTests(SimpleTestCase):

    def test_analytic_exponential_decay(self):
        epsilon, T = 0.1, 0.01
        coefficients = CoefficientSet(UniformVelocity(1.0, 0.0))
        z0 = SpectralField2.delta(2, (1, 0), 1.0)
        trajectory = integrate(ReferenceState(0.0, z0, epsilon), coefficients, T, IntegratorConfig(rtol=1e-8, atol=1e-10))
        expected = np.exp(-4 * np.pi ** 2 * T / epsilon)
        got = trajectory.final.coefficient(1, 0)
        self.assertLessEqual(abs(got - expected), 1e-6 * expected)
        self.assertEqual(trajectory.times, [0.0, T])

    def test_zero_state_stays_zero(self):
        coefficients = CoefficientSet(UniformVelocity(0.0, 0.0))
        trajectory = integrate(ReferenceState(0.0, SpectralField2.zeros(1), 0.5), coefficients, 0.2, output_times=[0.1])
        for snapshot in trajectory.snapshots:
            self.assertFalse(np.any(snapshot.coeffs))
        self.assertEqual(trajectory.times, [0.0, 0.1, 0.2])

    def test_mass_and_reality_short_run(self):
        coefficients = CoefficientSet(ShearSine())
        z0 = project_initial(CosineCombo(), 2)
        trajectory = integrate(ReferenceState(0.0, z0, 0.1), coefficients, 0.05, output_times=[0.025])
        self.assertLessEqual(trajectory.mass_drift(), 1e-10)
        self.assertLessEqual(trajectory.final.hermitian_defect(), 1e-9)
        self.assertTrue(trajectory.final.real_valued)

    def test_smaller_epsilon_needs_more_steps(self):
        coefficients = CoefficientSet(ShearSine())
        z0 = project_initial(CosineCombo(), 2)
        coarse = integrate(ReferenceState(0.0, z0, 0.2), coefficients, 0.05)
        fine = integrate(ReferenceState(0.0, z0, 0.1), coefficients, 0.05)
        self.assertGreaterEqual(fine.statistics.accepted, 1.2 * coarse.statistics.accepted)

    def test_tolerance_self_convergence(self):
        coefficients = CoefficientSet(ShearSine())
        z0 = project_initial(CosineCombo(), 2)
        loose = integrate(ReferenceState(0.0, z0, 0.1), coefficients, 0.05, IntegratorConfig(rtol=1e-6, atol=1e-8))
        tight = integrate(ReferenceState(0.0, z0, 0.1), coefficients, 0.05, IntegratorConfig(rtol=5e-7, atol=5e-9))
        self.assertLessEqual(np.max(np.abs(loose.final.coeffs - tight.final.coeffs)), 10 * 1e-6)

    def test_write_snapshots_and_stats(self):
        coefficients = CoefficientSet(UniformVelocity(0.0, 0.0))
        trajectory = integrate(ReferenceState(0.0, project_initial(3.0, 1), 0.5), coefficients, 0.1, output_times=[0.05])
        with tempfile.TemporaryDirectory() as directory:
            paths = trajectory.write(directory)
            self.assertEqual([p.name for p in paths], ['z_t0.spec', 'z_t0.05.spec', 'z_t0.1.spec'])
            field, comments = load_snapshot(paths[-1])
            self.assertEqual(field.coefficient(0, 0), 3.0)
            self.assertEqual(comments, ['epsilon=0.5'])
            stats = (Path(directory) / 'stats.txt').read_text()
            self.assertTrue(stats.startswith('accepted='))

    def test_end_time_must_follow_start(self):
        with self.assertRaises(ParameterError):
            integrate(ReferenceState(1.0, SpectralField2.zeros(1), 0.1), CoefficientSet(ShearSine()), 0.5)

    @tag('slow')
    def test_mass_conservation_over_unit_time(self):
        coefficients = CoefficientSet(ShearSine())
        z0 = project_initial(CosineCombo(), 4)
        trajectory = integrate(
            ReferenceState(0.0, z0, 0.01), coefficients, 1.0, output_times=[0.25, 0.5, 0.75],
        )
        self.assertLessEqual(trajectory.mass_drift(), 1e-10)
        self.assertLessEqual(trajectory.final.hermitian_defect(), 1e-9)
