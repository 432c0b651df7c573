"""
Operations on truncated Fourier fields: grid evaluation, DFT coefficient
extraction, differential symbols, truncated convolution and theta slicing.

All functions are pure; inputs are never modified.
"""
from __future__ import annotations

import numpy as np
from scipy import signal

from dunes_project.exceptions import (
    AliasingError, DimensionError, InvalidFieldError, InvalidSampleError, ParameterError,
)
from .fields import (
    GridField, GridSpec, SpectralField2, SpectralField3, check_finite, field_class, mode_index,
)

TWO_PI_I = 2j * np.pi
FOUR_PI_SQUARED = 4.0 * np.pi ** 2
REAL_RESIDUE_TOLERANCE = 1e-10
MATRIX_BLOCK_ENTRIES = 1 << 20


def default_quadrature(order):
    return max(64, 8 * order)


def _frequencies(order):
    return np.arange(-order, order + 1)


def _space_frequencies(order, ndim):
    """
    (m, n) broadcastable against a coefficient array of dimension ndim
    """
    k = _frequencies(order)
    shape_m = [1] * ndim
    shape_n = [1] * ndim
    shape_m[-2] = -1
    shape_n[-1] = -1
    return k.reshape(shape_m), k.reshape(shape_n)


def _theta_phases(order, theta):
    return np.exp(TWO_PI_I * _frequencies(order) * theta)


def slice_theta(field, theta0):
    """
    Space field Z(theta0, .) of a profile, summing the theta series at theta0
    """
    check_finite(field)
    phases = _theta_phases(field.order, theta0)
    coeffs = np.tensordot(phases, field.coeffs, axes=(0, 0))
    return SpectralField2(field.order, coeffs, field.t_param, field.real_valued)


def _evaluate(field, grid, theta):
    check_finite(field)
    grid.check_resolves(field.order)
    if field.ndim == 3:
        if theta is None:
            raise ParameterError('evaluating a 3D field needs a theta value')
        coeffs = np.tensordot(_theta_phases(field.order, theta), field.coeffs, axes=(0, 0))
    else:
        coeffs = field.coeffs
    basis = np.exp(TWO_PI_I * np.outer(grid.axis(), _frequencies(field.order)))
    return basis @ coeffs @ basis.T


def eval_on_grid(field, grid=None, theta=None, keep_complex=False):
    """
    Evaluate the series on the uniform grid by direct summation

    Fields flagged real_valued come back as real samples after checking that
    the imaginary residue is negligible; keep_complex returns the raw sums.
    """
    grid = grid or GridSpec()
    values = _evaluate(field, grid, theta)
    if keep_complex or not field.real_valued:
        return GridField(grid.n, values)
    return GridField(grid.n, _drop_imaginary(values, REAL_RESIDUE_TOLERANCE))


def real_grid(field, grid=None, theta=None, tolerance=1e-9):
    """
    Real samples of a field whose coefficients come from a real problem
    """
    grid = grid or GridSpec()
    return GridField(grid.n, _drop_imaginary(_evaluate(field, grid, theta), tolerance))


def _drop_imaginary(values, tolerance):
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > tolerance * scale:
        raise InvalidFieldError(
            f'field expected real but imaginary residue is {residue:.3e} (scale {scale:.3e})'
        )
    return values.real.copy()


def dft_coefficients(sampler, order, n_quad=None, ndim=3, t_param=0.0):
    """
    Fourier coefficients of a 1-periodic sampler by the uniform-grid DFT

    The sampler receives ndim broadcast coordinate arrays ((theta, x1, x2) or
    (x1, x2)) and returns one array, or a sequence of arrays for a vector
    field, in which case one field per component is returned.
    """
    n_quad = n_quad or default_quadrature(order)
    if n_quad < 4 * order + 2:
        raise AliasingError(f'N_quad={n_quad} is below 4P+2={4 * order + 2}')
    axis = np.arange(n_quad) / n_quad
    points = np.meshgrid(*([axis] * ndim), indexing='ij')
    sampled = sampler(*points)

    vector = isinstance(sampled, (tuple, list)) or (
        np.ndim(sampled) == ndim + 1 and np.shape(sampled)[0] != n_quad
    )
    components = list(sampled) if vector else [sampled]

    cls = field_class(ndim)
    picks = np.ix_(*([_frequencies(order) % n_quad] * ndim))
    fields = []
    for component in components:
        values = np.broadcast_to(np.asarray(component), points[0].shape)
        finite = np.isfinite(values)
        if not np.all(finite):
            where = tuple(np.argwhere(~finite)[0])
            point = tuple(float(p[where]) for p in points)
            raise InvalidSampleError(f'sampler returned a non-finite value at {point}', point=point)
        spectrum = np.fft.fftn(values) / n_quad ** ndim
        fields.append(cls(order, spectrum[picks], t_param, real_valued=bool(np.isrealobj(values))))
    return tuple(fields) if vector else fields[0]


def gradient_coeffs(field):
    """
    Space gradient: (2i pi m A, 2i pi n A)
    """
    check_finite(field)
    m, n = _space_frequencies(field.order, field.ndim)
    return (
        field.replace(coeffs=TWO_PI_I * m * field.coeffs),
        field.replace(coeffs=TWO_PI_I * n * field.coeffs),
    )


def divergence_coeffs(first, second):
    """
    Space divergence of a vector field given by its two component series
    """
    _check_compatible(first, second)
    m, n = _space_frequencies(first.order, first.ndim)
    coeffs = TWO_PI_I * (m * first.coeffs + n * second.coeffs)
    return first.replace(coeffs=coeffs, real_valued=first.real_valued and second.real_valued)


def laplacian_coeffs(field):
    m, n = _space_frequencies(field.order, field.ndim)
    return field.replace(coeffs=-FOUR_PI_SQUARED * (m ** 2 + n ** 2) * field.coeffs)


def _check_compatible(a, b):
    if a.ndim != b.ndim or a.order != b.order:
        raise DimensionError(
            f'operands disagree: {type(a).__name__} order {a.order} vs {type(b).__name__} order {b.order}'
        )


def truncated_convolve(a, b):
    """
    Product of two truncated series, re-truncated to the common order
    """
    _check_compatible(a, b)
    check_finite(a)
    check_finite(b)
    order = a.order
    full = signal.convolve(a.coeffs, b.coeffs, mode='full', method='direct')
    window = tuple(slice(order, 3 * order + 1) for _ in range(a.ndim))
    return a.replace(coeffs=full[window], real_valued=a.real_valued and b.real_valued)


def tail_norm(field, inner_order):
    """
    L2 norm of the modes a truncation to inner_order would discard
    """
    if not 0 <= inner_order < field.order:
        raise ParameterError(f'inner order must lie in [0, {field.order}), got {inner_order}')
    modes = mode_index(field.order, field.ndim)
    discarded = np.max(np.abs(modes), axis=1) > inner_order
    return float(np.sqrt(np.sum(np.abs(field.flat()[discarded]) ** 2)))


def _padded(field):
    """
    Flat coefficients embedded in the cube of order 2P, zeros outside [-P, P]
    """
    order = field.order
    padded = np.zeros((4 * order + 1,) * field.ndim, dtype=np.complex128)
    padded[(slice(order, 3 * order + 1),) * field.ndim] = field.coeffs
    return padded.ravel()


def divergence_form_matrix(a, a_grad):
    """
    Dense matrix of z -> (grad a) . (grad z) + a * laplacian(z), truncated

    Entry (k, k') is 2i pi a_grad(k-k') . (m', n') - 4 pi^2 a(k-k') (m'^2 + n'^2),
    zero whenever k - k' leaves the coefficient cube. Rows are gathered in
    blocks from the coefficients padded to order 2P.
    """
    grad_x, grad_y = a_grad
    _check_compatible(a, grad_x)
    _check_compatible(a, grad_y)
    order, ndim = a.order, a.ndim
    modes = mode_index(order, ndim)
    size = len(modes)
    strides = (4 * order + 1) ** np.arange(ndim - 1, -1, -1)
    row_keys = (modes + 2 * order) @ strides
    column_keys = modes @ strides
    m_col, n_col = modes[:, -2], modes[:, -1]
    slope_x, slope_y = TWO_PI_I * m_col, TWO_PI_I * n_col
    curvature = -FOUR_PI_SQUARED * (m_col ** 2 + n_col ** 2)
    a_pad, g1_pad, g2_pad = _padded(a), _padded(grad_x), _padded(grad_y)

    matrix = np.empty((size, size), dtype=np.complex128)
    block = max(1, MATRIX_BLOCK_ENTRIES // size)
    for start in range(0, size, block):
        gather = row_keys[start:start + block, None] - column_keys[None, :]
        matrix[start:start + block] = g1_pad[gather] * slope_x + g2_pad[gather] * slope_y + a_pad[gather] * curvature
    return matrix


__all__ = [
    'SpectralField3', 'dft_coefficients', 'divergence_coeffs', 'divergence_form_matrix',
    'eval_on_grid', 'gradient_coeffs', 'laplacian_coeffs', 'real_grid', 'slice_theta',
    'tail_norm', 'truncated_convolve',
]
