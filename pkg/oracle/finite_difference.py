"""
Brute-force second-order finite-difference solvers on the periodic grid

Both solvers use the flux form div(A grad z) + div C with A and C sampled at
face midpoints, so the cell average is conserved by every step. They share
nothing with the spectral path beyond the coefficient samplers.
"""
from __future__ import annotations

import hashlib
import logging
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from dunes_project.audit import log_run
from dunes_project.exceptions import DivergenceError, NonConvergenceError, ParameterError
from .grids import FDGrid, check_points, face_points

logger = logging.getLogger(__name__)

MAX_THETA_STEP = 1 / 256
MAX_PERIODS = 200
MIN_EPSILON = 0.05
DEFAULT_STEPS_WITHOUT_DIFFUSION = 100


def apply_flux(z, a_east, a_north, h):
    """
    div(A grad z) with A given on east and north faces
    """
    flux_east = a_east * (np.roll(z, -1, axis=0) - z)
    flux_north = a_north * (np.roll(z, -1, axis=1) - z)
    return (flux_east - np.roll(flux_east, 1, axis=0) + flux_north - np.roll(flux_north, 1, axis=1)) / h ** 2


def flux_divergence(c_east, c_north, h):
    """
    div C with C1 given on east faces and C2 on north faces
    """
    return (c_east - np.roll(c_east, 1, axis=0) + c_north - np.roll(c_north, 1, axis=1)) / h


def flux_matrix(a_east, a_north, h):
    """
    Sparse matrix of apply_flux on the C-order flattened grid
    """
    n = a_east.shape[0]
    index = np.arange(n * n).reshape(n, n)
    here = index.ravel()
    east = np.roll(index, -1, axis=0).ravel()
    north = np.roll(index, -1, axis=1).ravel()
    w_east = a_east.ravel() / h ** 2
    w_north = a_north.ravel() / h ** 2
    coupling = sparse.coo_matrix(
        (
            np.concatenate([w_east, w_east, w_north, w_north]),
            (np.concatenate([here, east, here, north]), np.concatenate([east, here, north, here])),
        ),
        shape=(n * n, n * n),
    ).tocsr()
    return (coupling - sparse.diags(np.asarray(coupling.sum(axis=1)).ravel())).tocsc()


class FaceSampler:
    """
    Coefficients on the faces of an n x n grid
    """

    def __init__(self, n):
        self.n = n
        self.h = 1.0 / n
        self.points = face_points(n)

    def limit(self, coefficients, t, theta):
        (e1, e2), (n1, n2) = self.points['east'], self.points['north']
        a_east = np.asarray(coefficients.eval_A_tilde(t, theta, e1, e2), dtype=float)
        a_north = np.asarray(coefficients.eval_A_tilde(t, theta, n1, n2), dtype=float)
        c_east = np.asarray(coefficients.eval_C_tilde(t, theta, e1, e2)[0], dtype=float)
        c_north = np.asarray(coefficients.eval_C_tilde(t, theta, n1, n2)[1], dtype=float)
        return self._broadcast(a_east, a_north, c_east, c_north)

    def reference(self, coefficients, epsilon, t):
        (e1, e2), (n1, n2) = self.points['east'], self.points['north']
        a_east, (c_east, _) = coefficients.eval_eps(epsilon, t, e1, e2)
        a_north, (_, c_north) = coefficients.eval_eps(epsilon, t, n1, n2)
        return self._broadcast(*(np.asarray(v, dtype=float) for v in (a_east, a_north, c_east, c_north)))

    def _broadcast(self, a_east, a_north, c_east, c_north):
        shape = (self.n, self.n)
        a_east, a_north = np.broadcast_to(a_east, shape), np.broadcast_to(a_north, shape)
        source = flux_divergence(np.broadcast_to(c_east, shape), np.broadcast_to(c_north, shape), self.h)
        return a_east, a_north, source


class _ImplicitFactor:
    """
    splu of I - (dtheta/2) L, refactored only when the face coefficients change
    """

    def __init__(self, half_step, h):
        self.half_step = half_step
        self.h = h
        self._key = None
        self._lu = None
        self.factorizations = 0

    def solve(self, a_east, a_north, rhs):
        key = hashlib.blake2b(
            np.ascontiguousarray(a_east).tobytes() + np.ascontiguousarray(a_north).tobytes(), digest_size=16,
        ).digest()
        if key != self._key:
            operator = flux_matrix(a_east, a_north, self.h)
            system = sparse.identity(operator.shape[0], format='csc') - self.half_step * operator
            self._lu = sparse_linalg.splu(system.tocsc())
            self._key = key
            self.factorizations += 1
        return self._lu.solve(rhs.ravel()).reshape(rhs.shape)


def _theta_steps(dtheta):
    if not 0 < dtheta <= MAX_THETA_STEP:
        raise ParameterError(f'theta step must lie in (0, {MAX_THETA_STEP}], got {dtheta}')
    steps = round(1 / dtheta)
    if abs(steps * dtheta - 1) > 1e-12:
        raise ParameterError(f'theta step must divide the unit period, got {dtheta}')
    return steps


def cn_limit_march(coefficients, t, n=64, dtheta=1 / 512, tol_period=1e-10, gauge=None, max_periods=MAX_PERIODS):
    """
    theta-periodic solution of dZ/dtheta = div(A~ grad Z) + div C~ at slow time t

    Crank-Nicolson in theta from a flat start, one whole period at a time,
    until two successive period ends differ by at most tol_period (RMS).
    The mean is reset to the gauge value after each period. Returns the
    grid at theta = 0.
    """
    check_points(n)
    steps = _theta_steps(dtheta)
    target = 0.0 if gauge is None else float(np.real(gauge.mean_value))
    faces = FaceSampler(n)
    factor = _ImplicitFactor(0.5 * dtheta, faces.h)

    z = np.full((n, n), target)
    current = faces.limit(coefficients, t, 0.0)
    change = math.inf
    for period in range(1, max_periods + 1):
        start = z.copy()
        for s in range(steps):
            upcoming = faces.limit(coefficients, t, (s + 1) * dtheta)
            a_east, a_north, source = current
            rhs = z + 0.5 * dtheta * (apply_flux(z, a_east, a_north, faces.h) + source + upcoming[2])
            z = factor.solve(upcoming[0], upcoming[1], rhs)
            current = upcoming
        z += target - z.mean()
        change = float(np.sqrt(np.mean((z - start) ** 2)))
        logger.debug('Period %s: RMS change %.3e', period, change)
        if change <= tol_period:
            break
    else:
        raise NonConvergenceError(
            f'theta march did not become periodic within {max_periods} periods (last change {change:.3e})'
        )

    log_run(
        'cn_limit_march', t=t, n=n, dtheta=dtheta, periods=period, change=change,
        factorizations=factor.factorizations,
    )
    return FDGrid(n, dtheta, z, time=t, iterations=period)


def _initial_grid(z0, n):
    if callable(z0):
        x1, x2 = face_points(n)['centre']
        return np.asarray(z0(x1, x2), dtype=float) * np.ones((n, n))
    values = getattr(z0, 'values', z0)
    values = np.array(values, dtype=float)
    if values.shape != (n, n):
        raise ParameterError(f'initial grid must have shape {(n, n)}, got {values.shape}')
    return values


def stable_step(coefficients, epsilon, n, t0, T):
    """
    Explicit bound eps h^2 / (4 max A^eps), with A^eps sampled over [t0, T]
    """
    faces = FaceSampler(n)
    peak = coefficients.max_a_tilde(np.linspace(t0, T, 5))
    for time in np.linspace(t0, T, 65):
        a_east, a_north, _ = faces.reference(coefficients, epsilon, time)
        peak = max(peak, float(np.max(a_east)), float(np.max(a_north)))
    if peak <= 0:
        return math.inf
    return epsilon * faces.h ** 2 / (4 * peak)


def fd_reference_solve(coefficients, epsilon, n, z0, T, dt=None, t0=0.0):
    """
    Explicit Heun march of dz/dt = (1/eps)[div(A^eps grad z) + div C^eps] from t0 to T
    """
    if epsilon < MIN_EPSILON:
        raise ParameterError(f'the finite-difference reference is limited to epsilon >= {MIN_EPSILON}, got {epsilon}')
    check_points(n)
    if not T > t0:
        raise ParameterError(f'T must exceed the start time {t0}, got {T}')
    z = _initial_grid(z0, n)
    dt_max = stable_step(coefficients, epsilon, n, t0, T)
    if dt is None:
        dt = 0.9 * dt_max if math.isfinite(dt_max) else (T - t0) / DEFAULT_STEPS_WITHOUT_DIFFUSION
    elif dt > dt_max:
        raise ParameterError(f'time step {dt:.3e} violates the explicit stability bound {dt_max:.3e}')
    steps = math.ceil((T - t0) / dt)
    dt = (T - t0) / steps
    faces = FaceSampler(n)

    def derivative(time, state):
        a_east, a_north, source = faces.reference(coefficients, epsilon, time)
        return (apply_flux(state, a_east, a_north, faces.h) + source) / epsilon

    time = t0
    for step in range(steps):
        k1 = derivative(time, z)
        k2 = derivative(time + dt, z + dt * k1)
        z = z + 0.5 * dt * (k1 + k2)
        time = t0 + (step + 1) * dt
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f'finite-difference state became non-finite at t={time:.6g}', state=(time, z))

    log_run('fd_reference_solve', epsilon=epsilon, n=n, T=T, dt=dt, dt_max=dt_max, steps=steps)
    return FDGrid(n, dt, z, time=T, iterations=steps)
