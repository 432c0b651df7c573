"""
Truncated algebraic system for the profile coefficients Z(l, m, n) at a
fixed slow time t:

    2i pi l Z(k) - sum_k' [2i pi A~grad(k-k') . (m', n') - 4 pi^2 A~(k-k') |(m', n')|^2] Z(k') = divC~(k)

The mean mode (0, 0, 0) is undetermined; its equation is replaced by a
gauge row pinning Z(0, 0, 0).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from dunes_project.audit import log_run
from dunes_project.exceptions import ParameterError, SingularSystemError
from spectral.fields import Mode3, SpectralField3, mode_index
from spectral.transforms import TWO_PI_I

logger = logging.getLogger(__name__)

ILL_CONDITIONED = 1e12
RESIDUAL_TOLERANCE = 1e-9
PIVOT_TOLERANCE = 1e-14


@dataclass(frozen=True)
class GaugeSpec:
    """
    Target value of Z(0, 0, 0)
    """
    mean_value: complex = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'mean_value', complex(self.mean_value))

    @classmethod
    def from_initial(cls, z0):
        """
        Mean of an initial space field, its (0, 0) coefficient
        """
        return cls(z0.coefficient(0, 0))


@dataclass(frozen=True, eq=False)
class LimitSystem:
    order: int
    t_param: float
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    gauged: bool = False

    @property
    def modes(self):
        return mode_index(self.order, 3)

    @property
    def mean_position(self):
        return len(self.rhs) // 2


@dataclass(frozen=True)
class SolveDiagnostics:
    residual: float
    condition: float
    ill_conditioned: bool
    hermitian_defect: float

    def comments(self):
        lines = [f'residual={self.residual:.6e} cond={self.condition:.6e}']
        if self.ill_conditioned:
            lines.append(f'warning: condition estimate above {ILL_CONDITIONED:.0e}')
        return lines


@dataclass(frozen=True)
class LimitSolution:
    profile: SpectralField3
    diagnostics: SolveDiagnostics


def assemble_from_spectra(spectra, t=None):
    """
    Build the ungauged system from precomputed 3D coefficient spectra
    """
    order = spectra.order
    l = mode_index(order, 3)[:, 0]
    matrix = -spectra.operator
    matrix[np.diag_indices_from(matrix)] += TWO_PI_I * l
    t = spectra.a.t_param if t is None else float(t)
    return LimitSystem(order, t, matrix, spectra.div_c.flat().copy())


def assemble(coefficients, t, order, n_quad=None):
    if order < 0:
        raise ParameterError(f'truncation order must be non-negative, got {order}')
    return assemble_from_spectra(coefficients.spectral_coefficients(t, order, n_quad), t)


def apply_gauge(system, gauge):
    """
    Replace the mean-mode equation by Z(0, 0, 0) = gauge.mean_value
    """
    center = system.mean_position
    matrix = system.matrix.copy()
    rhs = system.rhs.copy()
    matrix[center, :] = 0
    matrix[center, center] = 1
    rhs[center] = gauge.mean_value
    return replace(system, matrix=matrix, rhs=rhs, gauged=True)


def _condition_estimate(lu, matrix):
    gecon, = linalg.lapack.get_lapack_funcs(('gecon',), (lu,))
    norm = float(np.max(np.sum(np.abs(matrix), axis=0)))
    rcond, info = gecon(lu, norm, norm='1')
    if info != 0 or rcond == 0:
        return np.inf
    return 1.0 / rcond


def solve(system):
    """
    Dense LU solve with partial pivoting, returning the profile and diagnostics
    """
    if not system.gauged:
        raise ParameterError('the limit system must be gauged before solving')
    matrix, rhs = system.matrix, system.rhs
    scale = float(np.max(np.abs(matrix)))

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    weak = np.flatnonzero(pivots <= PIVOT_TOLERANCE * scale)
    if weak.size:
        mode = Mode3(*(int(k) for k in system.modes[weak[0]]))
        raise SingularSystemError(f'limit system is singular at pivot mode {mode}', mode=mode)

    solution = linalg.lu_solve((lu, piv), rhs)
    residual = float(
        np.max(np.abs(matrix @ solution - rhs))
        / (np.max(np.sum(np.abs(matrix), axis=1)) * np.max(np.abs(solution)) + np.max(np.abs(rhs)))
    ) if np.any(rhs) else 0.0
    condition = _condition_estimate(lu, matrix)

    width = 2 * system.order + 1
    profile = SpectralField3(system.order, solution.reshape((width,) * 3), system.t_param)
    defect = profile.hermitian_defect()
    profile = profile.replace(real_valued=defect <= 1e-10)
    diagnostics = SolveDiagnostics(residual, condition, condition > ILL_CONDITIONED, defect)

    if diagnostics.ill_conditioned:
        logger.warning('Limit system at t=%s, P=%s is ill-conditioned (cond=%.3e)', system.t_param, system.order, condition)
    if residual > RESIDUAL_TOLERANCE:
        logger.warning('Limit solve residual %.3e exceeds %.0e', residual, RESIDUAL_TOLERANCE)
    return LimitSolution(profile, diagnostics)


def solve_profile(coefficients, t, order, gauge=None, n_quad=None):
    """
    spectral_coefficients -> assemble -> apply_gauge -> solve
    """
    gauge = gauge or GaugeSpec()
    system = apply_gauge(assemble(coefficients, t, order, n_quad), gauge)
    result = solve(system)
    log_run(
        'limit_solve', t=t, order=order, unknowns=len(system.rhs), gauge=gauge.mean_value,
        residual=result.diagnostics.residual, condition=result.diagnostics.condition,
        hermitian_defect=result.diagnostics.hermitian_defect,
    )
    return result
