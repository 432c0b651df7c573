from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from dunes_project.exceptions import AliasingError, DimensionError, InvalidFieldError, InvalidSampleError
from .fields import GridSpec, SpectralField2, SpectralField3, mode_index
from .snapshots import parse_snapshot, serialize_snapshot
from .transforms import (
    dft_coefficients, divergence_coeffs, divergence_form_matrix, eval_on_grid, gradient_coeffs,
    slice_theta, tail_norm, truncated_convolve,
)


def hermitian_field(cls, order, seed):
    rng = np.random.default_rng(seed)
    shape = (2 * order + 1,) * cls.ndim
    raw = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return cls(order, (raw + np.conj(np.flip(raw))) / 2, real_valued=True)


def random_field(cls, order, seed):
    rng = np.random.default_rng(seed)
    shape = (2 * order + 1,) * cls.ndim
    return cls(order, rng.normal(size=shape) + 1j * rng.normal(size=shape))


class GridEvaluationTests(SimpleTestCase):

    def test_constant_field(self):
        field = SpectralField3.delta(2, (0, 0, 0), 1.0)
        values = eval_on_grid(field, GridSpec(16), theta=0.37).values
        np.testing.assert_allclose(values, 1.0, atol=1e-14)

    def test_cosine_pair(self):
        coeffs = np.zeros((3, 3, 3), dtype=complex)
        coeffs[1, 2, 1] = coeffs[1, 0, 1] = 0.5
        field = SpectralField3(1, coeffs, real_valued=True)
        values = eval_on_grid(field, GridSpec(16), theta=0.0).values
        self.assertAlmostEqual(values[0, 0], 1.0, places=14)
        self.assertAlmostEqual(values[4, 0], 0.0, places=14)
        np.testing.assert_allclose(values[:, 3], np.cos(2 * np.pi * np.arange(16) / 16), atol=1e-14)

    def test_hermitian_field_sums_to_real(self):
        field = hermitian_field(SpectralField3, 3, seed=1)
        raw = eval_on_grid(field, GridSpec(16), theta=0.21, keep_complex=True).values
        self.assertLessEqual(np.max(np.abs(raw.imag)), 1e-12 * np.max(np.abs(raw)))

    def test_direct_summation_oracle(self):
        field = random_field(SpectralField2, 2, seed=2)
        grid = GridSpec(16)
        values = eval_on_grid(field, grid).values
        q1, q2 = 3, 11
        expected = sum(
            field.coefficient(m, n) * np.exp(2j * np.pi * (m * q1 + n * q2) / 16)
            for m, n in mode_index(2, 2)
        )
        self.assertAlmostEqual(abs(values[q1, q2] - expected), 0.0, places=12)

    def test_coarse_grid_rejected(self):
        with self.assertRaises(AliasingError):
            eval_on_grid(SpectralField2.zeros(4), GridSpec(16))

    def test_non_finite_rejected(self):
        coeffs = np.zeros((3, 3))
        coeffs[1, 1] = np.nan
        with self.assertRaises(InvalidFieldError):
            eval_on_grid(SpectralField2(1, coeffs), GridSpec(8))

    def test_linearity(self):
        a = random_field(SpectralField3, 2, seed=3)
        b = random_field(SpectralField3, 2, seed=4)
        combined = SpectralField3(2, 2.5 * a.coeffs - 0.75 * b.coeffs)
        grid = GridSpec(16)
        lhs = eval_on_grid(combined, grid, theta=0.6).values
        rhs = 2.5 * eval_on_grid(a, grid, theta=0.6).values - 0.75 * eval_on_grid(b, grid, theta=0.6).values
        self.assertLessEqual(np.max(np.abs(lhs - rhs)), 1e-12 * np.max(np.abs(lhs)))

    def test_parseval_on_grid(self):
        field = random_field(SpectralField2, 3, seed=5)
        values = eval_on_grid(field, GridSpec(16)).values
        grid_energy = np.mean(np.abs(values) ** 2)
        coeff_energy = np.sum(np.abs(field.coeffs) ** 2)
        self.assertAlmostEqual(grid_energy / coeff_energy, 1.0, delta=1e-10)


class CoefficientExtractionTests(SimpleTestCase):

    def test_single_theta_harmonic(self):
        field = dft_coefficients(lambda th, x1, x2: np.cos(2 * np.pi * th) + 0 * x1, order=2)
        expected = np.zeros((5, 5, 5))
        expected[3, 2, 2] = expected[1, 2, 2] = 0.5
        np.testing.assert_allclose(field.coeffs, expected, atol=1e-14)
        self.assertTrue(field.real_valued)

    def test_constant(self):
        field = dft_coefficients(lambda th, x1, x2: 3.0, order=2)
        self.assertAlmostEqual(field.coefficient(0, 0, 0), 3.0, places=14)
        rest = field.flat().copy()
        rest[len(rest) // 2] = 0
        self.assertLessEqual(np.max(np.abs(rest)), 1e-14)

    def test_pure_mode(self):
        field = dft_coefficients(lambda th, x1, x2: np.exp(2j * np.pi * (2 * x1 + x2)), order=3)
        self.assertAlmostEqual(abs(field.coefficient(0, 2, 1) - 1.0), 0.0, places=13)
        self.assertAlmostEqual(float(np.sum(np.abs(field.coeffs))), 1.0, places=12)

    def test_vector_sampler_gives_one_field_per_component(self):
        first, second = dft_coefficients(lambda x1, x2: (np.cos(2 * np.pi * x1), 2.0 + 0 * x2), order=2, ndim=2)
        self.assertAlmostEqual(first.coefficient(1, 0), 0.5, places=14)
        self.assertAlmostEqual(second.coefficient(0, 0), 2.0, places=14)

    def test_round_trip_with_grid_evaluation(self):
        field = hermitian_field(SpectralField2, 3, seed=6)
        grid = GridSpec(16)
        values = eval_on_grid(field, grid).values
        lookup = lambda x1, x2: values[np.rint(x1 * 16).astype(int) % 16, np.rint(x2 * 16).astype(int) % 16]
        recovered = dft_coefficients(lookup, 3, n_quad=16, ndim=2)
        self.assertLessEqual(np.max(np.abs(recovered.coeffs - field.coeffs)), 1e-12 * np.max(np.abs(field.coeffs)))

    def test_non_finite_sample_names_point(self):
        def sampler(th, x1, x2):
            values = np.ones_like(x1)
            values[0, 1, 0] = np.inf
            return values
        with self.assertRaises(InvalidSampleError) as caught:
            dft_coefficients(sampler, 1, n_quad=8)
        self.assertEqual(caught.exception.point, (0.0, 0.125, 0.0))

    def test_quadrature_too_coarse(self):
        with self.assertRaises(AliasingError):
            dft_coefficients(lambda th, x1, x2: 1.0, 4, n_quad=16)


class SymbolTests(SimpleTestCase):

    def test_gradient_single_mode(self):
        gx, gy = gradient_coeffs(SpectralField3.delta(2, (0, 1, 2)))
        self.assertAlmostEqual(gx.coefficient(0, 1, 2), 2j * np.pi)
        self.assertAlmostEqual(gy.coefficient(0, 1, 2), 4j * np.pi)

    def test_gradient_of_theta_only_field_vanishes(self):
        gx, gy = gradient_coeffs(SpectralField3.delta(5, (5, 0, 0)))
        self.assertEqual(np.count_nonzero(gx.coeffs), 0)
        self.assertEqual(np.count_nonzero(gy.coeffs), 0)

    def test_gradient_of_zero(self):
        gx, gy = gradient_coeffs(SpectralField3.zeros(2))
        self.assertFalse(np.any(gx.coeffs) or np.any(gy.coeffs))

    def test_gradient_of_real_field_evaluates_real(self):
        field = hermitian_field(SpectralField3, 2, seed=7)
        for component in gradient_coeffs(field):
            raw = eval_on_grid(component, GridSpec(16), theta=0.4, keep_complex=True).values
            self.assertLessEqual(np.max(np.abs(raw.imag)), 1e-10 * np.max(np.abs(raw)))

    def test_divergence_matches_components(self):
        c1 = random_field(SpectralField3, 1, seed=8)
        c2 = random_field(SpectralField3, 1, seed=9)
        div = divergence_coeffs(c1, c2)
        expected = 2j * np.pi * (c1.coefficient(1, 1, -1) - c2.coefficient(1, 1, -1))
        self.assertAlmostEqual(abs(div.coefficient(1, 1, -1) - expected), 0.0, places=12)


class ConvolutionTests(SimpleTestCase):

    def test_identity_is_bitwise(self):
        b = random_field(SpectralField3, 2, seed=10)
        out = truncated_convolve(SpectralField3.delta(2, (0, 0, 0)), b)
        self.assertTrue(np.array_equal(out.coeffs, b.coeffs))

    def test_modes_add(self):
        a = SpectralField3.delta(2, (0, 1, 0), 2.0)
        b = SpectralField3.delta(2, (0, 0, 1), 3.0)
        out = truncated_convolve(a, b)
        self.assertAlmostEqual(out.coefficient(0, 1, 1), 6.0)
        self.assertEqual(np.count_nonzero(np.abs(out.coeffs) > 1e-15), 1)

    def test_truncation_boundary(self):
        a = SpectralField3.delta(1, (0, 1, 0))
        out = truncated_convolve(a, a)
        self.assertFalse(np.any(np.abs(out.coeffs) > 1e-15))

    def test_brute_force_sum(self):
        a = random_field(SpectralField2, 2, seed=11)
        b = random_field(SpectralField2, 2, seed=12)
        out = truncated_convolve(a, b)
        m, n = 1, -2
        expected = sum(
            a.coefficient(i, j) * b.coefficient(m - i, n - j)
            for i in range(-2, 3) for j in range(-2, 3)
        )
        self.assertAlmostEqual(abs(out.coefficient(m, n) - expected), 0.0, places=12)

    def test_product_of_real_fields_is_real(self):
        a = hermitian_field(SpectralField3, 2, seed=13)
        b = hermitian_field(SpectralField3, 2, seed=14)
        raw = eval_on_grid(truncated_convolve(a, b), GridSpec(16), theta=0.8, keep_complex=True).values
        self.assertLessEqual(np.max(np.abs(raw.imag)), 1e-10 * np.max(np.abs(raw)))

    def test_order_mismatch(self):
        with self.assertRaises(DimensionError):
            truncated_convolve(SpectralField3.zeros(1), SpectralField3.zeros(2))


class DivergenceFormMatrixTests(SimpleTestCase):

    def test_matches_convolution_form(self):
        a = hermitian_field(SpectralField2, 2, seed=15)
        z = random_field(SpectralField2, 2, seed=16)
        matrix = divergence_form_matrix(a, gradient_coeffs(a))
        zx, zy = gradient_coeffs(z)
        ax, ay = gradient_coeffs(a)
        k = np.arange(-2, 3)
        lap = z.replace(coeffs=-4 * np.pi ** 2 * (k[:, None] ** 2 + k[None, :] ** 2) * z.coeffs)
        expected = (
            truncated_convolve(ax, zx).coeffs + truncated_convolve(ay, zy).coeffs
            + truncated_convolve(a, lap).coeffs
        )
        np.testing.assert_allclose(matrix @ z.flat(), expected.ravel(), atol=1e-9)

    def test_blocked_gather_in_three_dimensions(self):
        a = hermitian_field(SpectralField3, 2, seed=18)
        z = random_field(SpectralField3, 2, seed=19)
        whole = divergence_form_matrix(a, gradient_coeffs(a))
        with mock.patch('spectral.transforms.MATRIX_BLOCK_ENTRIES', 7 * 125):
            blocked = divergence_form_matrix(a, gradient_coeffs(a))
        np.testing.assert_array_equal(blocked, whole)
        zx, zy = gradient_coeffs(z)
        ax, ay = gradient_coeffs(a)
        k = np.arange(-2, 3)
        lap = z.replace(coeffs=-4 * np.pi ** 2 * (k[None, :, None] ** 2 + k[None, None, :] ** 2) * z.coeffs)
        expected = (
            truncated_convolve(ax, zx).coeffs + truncated_convolve(ay, zy).coeffs
            + truncated_convolve(a, lap).coeffs
        )
        np.testing.assert_allclose(whole @ z.flat(), expected.ravel(), atol=1e-9)


class SliceAndTailTests(SimpleTestCase):

    def test_theta_independent_profile(self):
        coeffs = np.zeros((5, 5, 5), dtype=complex)
        coeffs[2] = random_field(SpectralField2, 2, seed=17).coeffs
        field = SpectralField3(2, coeffs)
        np.testing.assert_allclose(slice_theta(field, 0.77).coeffs, coeffs[2], rtol=0, atol=1e-14)

    def test_half_period_flips_sign(self):
        field = SpectralField3.delta(2, (1, 1, -1), 0.3 + 0.1j)
        self.assertAlmostEqual(slice_theta(field, 0.0).coefficient(1, -1), 0.3 + 0.1j)
        self.assertAlmostEqual(slice_theta(field, 0.5).coefficient(1, -1), -(0.3 + 0.1j))

    def test_slice_agrees_with_3d_evaluation(self):
        field = random_field(SpectralField3, 2, seed=18)
        grid = GridSpec(16)
        sliced = eval_on_grid(slice_theta(field, 0.3), grid).values
        direct = eval_on_grid(field, grid, theta=0.3).values
        self.assertLessEqual(np.max(np.abs(sliced - direct)), 1e-12 * np.max(np.abs(direct)))

    def test_tail_of_mean_only_field(self):
        self.assertEqual(tail_norm(SpectralField3.delta(3, (0, 0, 0)), 2), 0.0)

    def test_tail_single_corner_mode(self):
        self.assertAlmostEqual(tail_norm(SpectralField3.delta(3, (3, 0, 0), 2.0), 2), 2.0)

    def test_tail_brute_force(self):
        field = random_field(SpectralField3, 3, seed=19)
        expected = np.sqrt(sum(
            abs(field.coefficient(*mode)) ** 2
            for mode in mode_index(3, 3) if max(abs(k) for k in mode) > 1
        ))
        self.assertAlmostEqual(tail_norm(field, 1), expected, places=12)


class SnapshotTests(SimpleTestCase):

    def test_round_trip_is_bit_exact(self):
        field = random_field(SpectralField3, 2, seed=20).replace(t_param=1 / 3)
        parsed, comments = parse_snapshot(serialize_snapshot(field, comments=['residual=1e-15 cond=12']))
        self.assertTrue(np.array_equal(parsed.coeffs, field.coeffs))
        self.assertEqual(parsed.t_param, field.t_param)
        self.assertEqual(comments, ['residual=1e-15 cond=12'])

    def test_text_is_stable(self):
        field = hermitian_field(SpectralField2, 1, seed=21)
        text = serialize_snapshot(field)
        self.assertTrue(text.startswith('spectral2 P=1 t=0\n'))
        self.assertEqual(serialize_snapshot(parse_snapshot(text)[0]), text)
        self.assertTrue(parse_snapshot(text)[0].real_valued)
