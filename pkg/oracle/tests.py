import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from coefficients.coefficient_set import CoefficientSet
from coefficients.velocity import ShearSine, UniformVelocity
from dunes_project.exceptions import NonConvergenceError, ParameterError, SnapshotFormatError
from limit_solver.system import GaugeSpec, solve_profile
from reference_solver.integrator import IntegratorConfig
from reference_solver.solver import CosineCombo, ReferenceState, integrate, project_initial
from spectral.fields import GridSpec
from spectral.transforms import real_grid
from .finite_difference import (
    apply_flux, cn_limit_march, fd_reference_solve, flux_divergence, flux_matrix, stable_step,
)
from .grids import FDGrid, dump_grid, load_grid, parse_grid


class TravellingSource:
    """
    A~ = 1 and C~ = (cos 2pi(theta + x1), 0)
    """

    def eval_A_tilde(self, t, theta, x1, x2):
        return np.ones_like(x1)

    def eval_C_tilde(self, t, theta, x1, x2):
        return np.cos(2 * np.pi * (theta + x1)), np.zeros_like(x1)


class StillSource:

    def eval_A_tilde(self, t, theta, x1, x2):
        return 2.0 * np.ones_like(x1)

    def eval_C_tilde(self, t, theta, x1, x2):
        return np.zeros_like(x1), np.zeros_like(x1)


def travelling_profile(n):
    zhat = 1j * np.pi / (2j * np.pi + 4 * np.pi ** 2)
    x1 = np.arange(n) / n
    return np.broadcast_to(2 * np.real(zhat * np.exp(2j * np.pi * x1))[:, None], (n, n))


def relative_rms(got, expected):
    return float(np.sqrt(np.mean((got - expected) ** 2)) / np.sqrt(np.mean(expected ** 2)))


class FluxOperatorTests(SimpleTestCase):

    def test_matrix_matches_stencil(self):
        rng = np.random.default_rng(0)
        n, h = 32, 1 / 32
        a_east, a_north = 1 + rng.random((n, n)), 1 + rng.random((n, n))
        z = rng.normal(size=(n, n))
        matrix = flux_matrix(a_east, a_north, h)
        np.testing.assert_allclose((matrix @ z.ravel()).reshape(n, n), apply_flux(z, a_east, a_north, h), atol=1e-8)

    def test_fluxes_telescope(self):
        rng = np.random.default_rng(1)
        n = 32
        z = rng.normal(size=(n, n))
        self.assertLessEqual(abs(np.sum(apply_flux(z, rng.random((n, n)), rng.random((n, n)), 1 / n))), 1e-8)
        self.assertLessEqual(abs(np.sum(flux_divergence(rng.normal(size=(n, n)), rng.normal(size=(n, n)), 1 / n))), 1e-9)


class LimitMarchTests(SimpleTestCase):

    def test_single_mode_source_matches_analytic_profile(self):
        grid = cn_limit_march(TravellingSource(), 1.0, n=64, dtheta=1 / 512)
        self.assertLessEqual(relative_rms(grid.values, travelling_profile(64)), 1e-3)
        self.assertLessEqual(abs(grid.mean()), 1e-12)

    def test_second_order_in_space(self):
        coarse = relative_rms(cn_limit_march(TravellingSource(), 1.0, n=32).values, travelling_profile(32))
        fine = relative_rms(cn_limit_march(TravellingSource(), 1.0, n=64).values, travelling_profile(64))
        self.assertGreaterEqual(coarse / fine, 3.0)
        self.assertLessEqual(coarse / fine, 5.0)

    def test_no_source_gives_the_gauge_constant(self):
        grid = cn_limit_march(StillSource(), 0.0, n=32, gauge=GaugeSpec(0.4))
        np.testing.assert_allclose(grid.values, 0.4, rtol=0, atol=1e-12)
        self.assertEqual(grid.iterations, 1)

    def test_period_budget(self):
        with self.assertRaises(NonConvergenceError):
            cn_limit_march(TravellingSource(), 1.0, n=32, tol_period=1e-30, max_periods=1)

    def test_theta_step_limits(self):
        with self.assertRaises(ParameterError):
            cn_limit_march(StillSource(), 0.0, n=32, dtheta=0.01)
        with self.assertRaises(ParameterError):
            cn_limit_march(StillSource(), 0.0, n=16)

    @tag('slow')
    def test_agrees_with_spectral_profile(self):
        coefficients = CoefficientSet(ShearSine())
        spectral = solve_profile(coefficients, 1.0, 10, GaugeSpec(0.0)).profile
        expected = real_grid(spectral, GridSpec(64), theta=0.0).values
        grid = cn_limit_march(coefficients, 1.0, n=64, dtheta=1 / 512, tol_period=1e-10)
        self.assertLessEqual(relative_rms(grid.values, expected), 0.03)


class ReferenceMarchTests(SimpleTestCase):

    def test_heat_kernel_decay(self):
        epsilon, T = 0.1, 0.002
        grid = fd_reference_solve(
            CoefficientSet(UniformVelocity(1.0, 0.0)), epsilon, 64,
            lambda x1, x2: np.cos(2 * np.pi * x1), T,
        )
        x1 = np.arange(64) / 64
        expected = np.broadcast_to(np.cos(2 * np.pi * x1)[:, None], (64, 64)) * np.exp(-4 * np.pi ** 2 * T / epsilon)
        self.assertLessEqual(np.max(np.abs(grid.values - expected)), 1e-3 * np.max(np.abs(expected)))
        self.assertEqual(grid.time, T)

    def test_constant_state_without_source(self):
        grid = fd_reference_solve(CoefficientSet(UniformVelocity(1.0, 0.5)), 0.1, 32, np.full((32, 32), 1.5), 0.01)
        np.testing.assert_array_equal(grid.values, 1.5)

    def test_mass_is_conserved(self):
        z0 = lambda x1, x2: np.cos(2 * np.pi * x1) + np.cos(4 * np.pi * x1)
        grid = fd_reference_solve(CoefficientSet(ShearSine()), 0.1, 32, z0, 0.01)
        self.assertLessEqual(abs(grid.mean()), 1e-12)

    def test_small_epsilon_rejected(self):
        with self.assertRaises(ParameterError):
            fd_reference_solve(CoefficientSet(ShearSine()), 0.01, 32, np.zeros((32, 32)), 0.1)

    def test_unstable_step_rejected(self):
        coefficients = CoefficientSet(UniformVelocity(1.0, 0.0))
        bound = stable_step(coefficients, 0.1, 32, 0.0, 0.01)
        with self.assertRaises(ParameterError):
            fd_reference_solve(coefficients, 0.1, 32, np.zeros((32, 32)), 0.01, dt=2 * bound)

    @tag('slow')
    def test_agrees_with_spectral_reference(self):
        epsilon, T = 0.1, 0.1
        coefficients = CoefficientSet(ShearSine())
        z0 = project_initial(CosineCombo(), 8)
        trajectory = integrate(ReferenceState(0.0, z0, epsilon), coefficients, T, IntegratorConfig(rtol=1e-8, atol=1e-10))
        expected = real_grid(trajectory.final, GridSpec(64)).values
        grid = fd_reference_solve(
            coefficients, epsilon, 64, lambda x1, x2: np.cos(2 * np.pi * x1) + np.cos(4 * np.pi * x1), T,
        )
        self.assertLessEqual(relative_rms(grid.values, expected), 0.03)


class GridDumpTests(SimpleTestCase):

    def test_dump_and_load(self):
        values = np.random.default_rng(2).normal(size=(32, 32))
        with tempfile.TemporaryDirectory() as directory:
            path = dump_grid(values, Path(directory) / 'z.csv', comments=['t=1'])
            self.assertEqual(path.read_text().splitlines()[0], '# N=32')
            np.testing.assert_array_equal(load_grid(path), values)

    def test_header_required(self):
        with self.assertRaises(SnapshotFormatError):
            parse_grid('0 0 1.0\n')

    def test_missing_rows(self):
        with self.assertRaises(SnapshotFormatError):
            parse_grid('# N=2\n0 0 1.0\n')

    def test_indices_outside_the_grid(self):
        for row in ('-1 0 1.0', '0 -1 1.0', '2 0 1.0', '0 2 1.0'):
            with self.subTest(row=row), self.assertRaises(SnapshotFormatError) as caught:
                parse_grid(f'# N=2\n0 0 1.0\n0 1 1.0\n1 0 1.0\n1 1 1.0\n{row}\n')
            self.assertIn('outside [0, 2)', str(caught.exception))

    def test_grid_size_floor(self):
        with self.assertRaises(ParameterError):
            FDGrid(8, 0.1, np.zeros((8, 8)))
