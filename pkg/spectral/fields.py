"""
Truncated Fourier fields on the torus

Coefficients are stored densely over the cube [-P, P]^d with the zero mode at
index P on every axis, so coefficient (l, m, n) lives at coeffs[l+P, m+P, n+P].
The last two axes are always the space frequencies (m, n); a third leading
axis, when present, is the fast-phase frequency l.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple

import numpy as np

from dunes_project.exceptions import AliasingError, DimensionError, InvalidFieldError, ParameterError

HERMITIAN_TOLERANCE = 1e-12
DEFAULT_GRID_N = 64


class Mode3(NamedTuple):
    l: int
    m: int
    n: int


def mode_index(order, ndim):
    """
    Integer frequencies of every mode, in lexicographic order

    Row k of the result is the mode stored at position k of the C-order
    flattened coefficient array.
    """
    axis = np.arange(-order, order + 1)
    grids = np.meshgrid(*([axis] * ndim), indexing='ij')
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    Dense truncated Fourier series of order `order`
    """
    order: int
    coeffs: np.ndarray
    t_param: float = 0.0
    real_valued: bool = False

    ndim: ClassVar[int] = 0

    def __post_init__(self):
        if self.order < 0:
            raise ParameterError(f'truncation order must be non-negative, got {self.order}')
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        expected = (2 * self.order + 1,) * self.ndim
        if coeffs.shape != expected:
            raise DimensionError(
                f'{type(self).__name__} of order {self.order} needs shape {expected}, got {coeffs.shape}'
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        object.__setattr__(self, 't_param', float(self.t_param))

    @classmethod
    def zeros(cls, order, t_param=0.0, real_valued=True):
        return cls(order, np.zeros((2 * order + 1,) * cls.ndim), t_param, real_valued)

    @classmethod
    def delta(cls, order, mode, value=1.0, t_param=0.0):
        """
        Field with a single non-zero coefficient
        """
        coeffs = np.zeros((2 * order + 1,) * cls.ndim, dtype=np.complex128)
        coeffs[tuple(k + order for k in mode)] = value
        return cls(order, coeffs, t_param, real_valued=False)

    @property
    def size(self):
        return self.coeffs.size

    def coefficient(self, *mode):
        if any(abs(k) > self.order for k in mode):
            return 0j
        return complex(self.coeffs[tuple(k + self.order for k in mode)])

    def modes(self):
        return mode_index(self.order, self.ndim)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.coeffs)))

    def hermitian_defect(self):
        """
        max |c(-k) - conj(c(k))|, relative to max |c|
        """
        scale = np.max(np.abs(self.coeffs)) if self.coeffs.size else 0.0
        if scale == 0.0:
            return 0.0
        defect = np.max(np.abs(np.flip(self.coeffs) - np.conj(self.coeffs)))
        return float(defect / scale)

    def is_hermitian(self, tolerance=HERMITIAN_TOLERANCE):
        return self.hermitian_defect() <= tolerance

    def replace(self, coeffs=None, t_param=None, real_valued=None):
        return type(self)(
            self.order,
            self.coeffs if coeffs is None else coeffs,
            self.t_param if t_param is None else t_param,
            self.real_valued if real_valued is None else real_valued,
        )

    def flat(self):
        return self.coeffs.ravel()

    def __repr__(self):
        return f'{type(self).__name__}(order={self.order}, t={self.t_param}, real_valued={self.real_valued})'


class SpectralField3(SpectralField):
    """
    Coefficients Z(l, m, n) of a profile in (theta, x1, x2)
    """
    ndim = 3


class SpectralField2(SpectralField):
    """
    Coefficients z(m, n) of a space field at one instant
    """
    ndim = 2


def field_class(ndim):
    if ndim == 3:
        return SpectralField3
    if ndim == 2:
        return SpectralField2
    raise DimensionError(f'only 2D and 3D fields are supported, got ndim={ndim}')


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform N x N grid x_q = (q1/N, q2/N) on the unit torus
    """
    n: int = DEFAULT_GRID_N

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ParameterError(f'grid size must be a power of two, got {self.n}')

    def axis(self):
        return np.arange(self.n) / self.n

    def points(self):
        x = self.axis()
        return np.meshgrid(x, x, indexing='ij')

    def check_resolves(self, order):
        if self.n < 2 * (2 * order + 1):
            raise AliasingError(
                f'grid N={self.n} cannot resolve order {order}: need N >= {2 * (2 * order + 1)}'
            )


@dataclass(frozen=True, eq=False)
class GridField:
    """
    Samples of a field on a GridSpec
    """
    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.n, self.n):
            raise DimensionError(f'grid field of size {self.n} needs shape {(self.n, self.n)}, got {values.shape}')
        object.__setattr__(self, 'values', values)

    @property
    def grid(self):
        return GridSpec(self.n)

    def mean_square(self):
        return float(np.mean(np.abs(self.values) ** 2))

    def l2(self):
        return float(np.sqrt(self.mean_square()))


def check_finite(field_):
    if not field_.is_finite():
        bad = np.argwhere(~np.isfinite(field_.coeffs))[0] - field_.order
        raise InvalidFieldError(f'non-finite coefficient at mode {tuple(int(k) for k in bad)}')
